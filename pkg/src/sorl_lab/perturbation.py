"""Rank-one label perturbation of the graph and its effect on clustering quality.

The perturbed adjacency is A(delta) = A(0) + delta * l l' for a single label
connection vector l. Embeddings, the clustering measure difference, the exact
derivative of the measure at delta = 0 (through eigenvalue and spectral
projector derivatives), its leading trace form, and the class-wise lower
bound are all computed here.

The derivative formulas assume the base graph has unit row sums; bases with
constant row sums are rescaled to satisfy that exactly (factor recorded), and
bases with varying degrees support only the numeric sweep path.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clustering import partition_from_labels, scatter_from_product
from .errors import (
    AssumptionError,
    ConfigError,
    DegenerateInterError,
    NumericError,
    RepeatedEigenvalueError,
)
from .graph import build_label_vector, build_unlabeled_adjacency
from .spectral import GAP_EPS, decompose_matrix, eig_descending

LABEL_SUM_TOL = 1e-8
UNIFORM_TOL = 1e-9
INTER_EPS = 1e-12


@dataclass(frozen=True)
class PerturbationSetup:
    """Frozen state at delta = 0: spectrum, embedding product, measure pieces.

    eta1 = 1 / inter, eta2 = intra / inter, and upsilon is the partition
    weighting (1 + eta2) H - I - (eta2 / N) 11' entering every trace formula.
    """

    base: np.ndarray
    label_vector: np.ndarray
    k: int
    partition: object
    scale: float
    uniform_degrees: bool
    degrees0: np.ndarray
    eigenvalues: np.ndarray
    vectors: np.ndarray
    ZZ0: np.ndarray
    m0: float
    intra0: float
    inter0: float
    eta1: float
    eta2: float
    upsilon: np.ndarray


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def make_setup(base, label_vector, k, partition):
    base = np.asarray(base, dtype=float)
    l = np.asarray(label_vector, dtype=float)
    n = base.shape[0]
    if base.ndim != 2 or base.shape != (n, n):
        raise ConfigError(f"base must be square, got {base.shape}")
    if np.max(np.abs(base - base.T)) > 1e-12:
        raise ConfigError("base adjacency must be symmetric")
    if l.shape != (n,):
        raise ConfigError(f"label vector shape {l.shape} does not match N={n}")
    if abs(l.sum() - 1.0) > LABEL_SUM_TOL and np.any(l != 0):
        raise ConfigError(
            f"label vector must sum to 1 or be identically zero (got sum {l.sum()!r}); "
            "the derivative normalization depends on it"
        )
    if not 1 <= k < n:
        raise ConfigError(f"need 1 <= k < N, got k={k}")
    if partition.size != n:
        raise ConfigError("partition does not cover the vertex set")
    d = base.sum(axis=1)
    if np.any(d <= 0):
        raise ConfigError("base adjacency has nonpositive row sums")
    uniform = bool(np.ptp(d) <= UNIFORM_TOL * max(1.0, float(np.mean(d))))
    scale = 1.0
    if uniform:
        scale = float(np.mean(d))
        base = base / scale
        d = base.sum(axis=1)
    w, V = eig_descending(_normalized(base, d))
    if w[k - 1] - w[k] < GAP_EPS:
        raise NumericError(f"gap at k={k} is degenerate at delta=0")
    ZZ0 = _zz_product_from(base, d, w, V, k)
    intra0, inter0, m0 = _measure(partition, ZZ0)
    eta1 = 1.0 / inter0
    eta2 = intra0 / inter0
    H = partition.membership()
    ups = (1.0 + eta2) * H - np.eye(n) - (eta2 / n) * np.ones((n, n))
    return PerturbationSetup(
        base=_freeze(base),
        label_vector=_freeze(l),
        k=int(k),
        partition=partition,
        scale=scale,
        uniform_degrees=uniform,
        degrees0=_freeze(d),
        eigenvalues=_freeze(w),
        vectors=_freeze(V),
        ZZ0=_freeze(ZZ0),
        m0=m0,
        intra0=intra0,
        inter0=inter0,
        eta1=eta1,
        eta2=eta2,
        upsilon=_freeze(ups),
    )


def setup_from_world(world, eta_u, k, partition=None):
    """Setup with base eta_u * A_u and the single labeled class's connection vector."""
    if len(world.labeled_classes) != 1:
        raise ConfigError(
            "the analytic perturbation path handles exactly one labeled class; "
            f"got {world.labeled_classes}"
        )
    if partition is None:
        if world.natural_count != world.augmented_count:
            raise ConfigError(
                "cannot derive a vertex partition from natural-sample classes "
                "unless M = N; pass one explicitly"
            )
        partition = partition_from_labels(list(world.class_of))
    l = build_label_vector(world, world.labeled_classes[0])
    base = eta_u * build_unlabeled_adjacency(world)
    return make_setup(base, l, k, partition)


def _normalized(A, d):
    s = 1.0 / np.sqrt(d)
    return s[:, None] * A * s[None, :]


def _zz_product_from(A, d, w, V, k):
    s = 1.0 / np.sqrt(d)
    core = V[:, :k] @ (w[:k, None] * V[:, :k].T)
    return (s[:, None] * core) * s[None, :]


def _measure(partition, ZZ):
    intra, inter = scatter_from_product(partition, ZZ)
    if inter <= INTER_EPS:
        raise DegenerateInterError(f"inter-class scatter {inter!r} at delta=0")
    return intra, inter, intra / inter


def perturbed_matrix(setup, delta):
    if delta < 0:
        raise ConfigError(f"delta must be nonnegative, got {delta}")
    return setup.base + delta * np.outer(setup.label_vector, setup.label_vector)


def perturbed_embedding(setup, delta):
    """Spectral embedding of A(delta) with exact row-sum degrees."""
    A = perturbed_matrix(setup, delta)
    d = A.sum(axis=1)
    return decompose_matrix(_normalized(A, d), d, setup.k)


def _zz_product(setup, delta):
    A = perturbed_matrix(setup, delta)
    d = A.sum(axis=1)
    w, V = eig_descending(_normalized(A, d))
    if w[setup.k - 1] - w[setup.k] < GAP_EPS:
        raise NumericError(f"gap at k={setup.k} degenerates at delta={delta}")
    return _zz_product_from(A, d, w, V, setup.k)


def kms_at(setup, delta):
    return _measure(setup.partition, _zz_product(setup, delta))[2]


def delta_kms(setup, delta):
    """Measure improvement m(0) - m(delta); positive means the labels helped."""
    return setup.m0 - kms_at(setup, delta)


def _require_uniform(setup, what):
    if not setup.uniform_degrees:
        raise NumericError(
            f"{what} requires the base graph to have constant row sums "
            "(the unit-degree normalization of the derivative formulas)"
        )


def _distinct_spectrum(setup):
    w = setup.eigenvalues
    diffs = np.abs(np.diff(w))
    bad = np.where(diffs < GAP_EPS)[0]
    if bad.size:
        raise RepeatedEigenvalueError([(int(i), int(i) + 1) for i in bad])


def _contractions(setup):
    V = setup.vectors
    l = setup.label_vector
    W = V.T @ setup.upsilon @ V
    u = V.T @ l
    G = V.T @ (l[:, None] * V)
    return W, u, G


def analytic_derivative(setup):
    """d m_kms / d delta at 0, exact through the full projector-derivative sum.

    Three pieces: the degree correction, the eigenvalue derivatives, and the
    cross-projector sum weighted by lambda_j / (lambda_j - lambda_i) over every
    i != j (no truncation of the residual series).
    """
    _require_uniform(setup, "analytic_derivative")
    _distinct_spectrum(setup)
    w = setup.eigenvalues
    k = setup.k
    W, u, G = _contractions(setup)
    WG = W @ G
    m_a = sum(w[j] * WG[j, j] for j in range(k))
    m_b = -sum((u[j] ** 2 - w[j] * G[j, j]) * W[j, j] for j in range(k))
    m_c = 0.0
    n = w.shape[0]
    for j in range(k):
        others = np.arange(n) != j
        coef = 2.0 * w[j] / (w[j] - w[others])
        cross = u[others] * u[j] - 0.5 * (w[others] + w[j]) * G[others, j]
        m_c -= float(np.sum(coef * W[others, j] * cross))
    return setup.eta1 * (m_a + m_b + m_c)


def eigenvalue_derivatives(setup):
    """d lambda_j / d delta at 0 for every j: v_j'(l l' - lambda_j diag(l)) v_j."""
    _require_uniform(setup, "eigenvalue_derivatives")
    _, u, G = _contractions(setup)
    return u**2 - setup.eigenvalues * np.diag(G)


def leading_term(setup, delta):
    """First-order trace form of the measure improvement.

    delta * eta1 * Tr(Upsilon (Vk Vk' l l' (I + Vn Vn') - 2 A_k diag(l)));
    differs from -delta * analytic_derivative by the O(1/gap) residual.
    """
    n = setup.base.shape[0]
    k = setup.k
    V = setup.vectors
    w = setup.eigenvalues
    l = setup.label_vector
    Pk = V[:, :k] @ V[:, :k].T
    Pn = np.eye(n) - Pk
    Ak = V[:, :k] @ (w[:k, None] * V[:, :k].T)
    M = Pk @ np.outer(l, l) @ (np.eye(n) + Pn) - 2.0 * Ak @ np.diag(l)
    return delta * setup.eta1 * float(np.trace(setup.upsilon @ M))


def class_connections(setup):
    """Mean label connection per class."""
    l = setup.label_vector
    return np.array([float(l[np.asarray(g)].mean()) for g in setup.partition.groups])


def classwise_terms(setup):
    """Per-class values (l_c - 1/N) - 2 (1 - |c|/N) (intra-sim - inter-sim)."""
    n = setup.base.shape[0]
    ZZ = setup.ZZ0
    lcs = class_connections(setup)
    out = []
    for c, grp in enumerate(setup.partition.groups):
        idx = np.asarray(grp)
        mask = np.zeros(n, dtype=bool)
        mask[idx] = True
        s_in = float(ZZ[np.ix_(idx, idx)].mean())
        s_out = float(ZZ[np.ix_(idx, ~mask)].mean()) if (~mask).any() else 0.0
        out.append((lcs[c] - 1.0 / n) - 2.0 * (1.0 - len(grp) / n) * (s_in - s_out))
    return np.array(out)


@dataclass(frozen=True)
class AssumptionReport:
    gap_ratio: float
    gap_ok: bool
    span_residual: float
    span_ok: bool
    constancy_spread: float
    constancy_ok: bool

    @property
    def all_ok(self):
        return self.gap_ok and self.span_ok and self.constancy_ok


def check_assumptions(setup, gap_threshold=10.0, span_tol=1e-6, constancy_tol=1e-8):
    """Programmatic form of the three hypotheses behind the class-wise bound."""
    V = setup.vectors
    l = setup.label_vector
    k = setup.k
    resid = l - V[:, :k] @ (V[:, :k].T @ l)
    span_residual = float(np.linalg.norm(resid) / max(np.linalg.norm(l), 1e-300))
    scale = max(float(np.max(np.abs(l))), 1e-300)
    spread = max(float(np.ptp(l[np.asarray(g)])) for g in setup.partition.groups) / scale
    gap = setup.eigenvalues[setup.k - 1] / max(setup.eigenvalues[setup.k], 1e-300)
    return AssumptionReport(
        gap_ratio=float(gap),
        gap_ok=bool(gap >= gap_threshold),
        span_residual=span_residual,
        span_ok=bool(span_residual <= span_tol),
        constancy_spread=spread,
        constancy_ok=bool(spread <= constancy_tol),
    )


@dataclass(frozen=True)
class ClasswiseBound:
    delta: float
    per_class: np.ndarray
    connections: np.ndarray
    aggregate: float
    delta_kms: float
    margin: float
    holds: bool
    assumptions: AssumptionReport


def classwise_bound(setup, delta, gap_threshold=10.0, span_tol=1e-6,
                    constancy_tol=1e-8, slack=1e-8):
    """Per-class perturbation terms and the aggregate lower bound on delta_kms."""
    _require_uniform(setup, "classwise_bound")
    report = check_assumptions(setup, gap_threshold, span_tol, constancy_tol)
    if not report.gap_ok:
        raise AssumptionError("spectral-gap", report.gap_ratio, gap_threshold)
    if not report.span_ok:
        raise AssumptionError("label-vector-span", report.span_residual, span_tol)
    if not report.constancy_ok:
        raise AssumptionError("classwise-constancy", report.constancy_spread, constancy_tol)
    per_class = classwise_terms(setup)
    lcs = class_connections(setup)
    sizes = np.array([len(g) for g in setup.partition.groups], dtype=float)
    aggregate = delta * setup.eta1 * setup.eta2 * float(np.sum(sizes * lcs * per_class))
    dk = delta_kms(setup, delta)
    return ClasswiseBound(
        delta=float(delta),
        per_class=per_class,
        connections=lcs,
        aggregate=aggregate,
        delta_kms=dk,
        margin=dk - aggregate,
        holds=bool(dk >= aggregate - slack),
        assumptions=report,
    )


def upsilon_sign_report(setup):
    """Whether the concrete partition weighting matches the qualitative sign
    pattern (positive within classes, negative across)."""
    ups = setup.upsilon
    n = ups.shape[0]
    same = np.zeros((n, n), dtype=bool)
    for grp in setup.partition.groups:
        idx = np.asarray(grp)
        same[np.ix_(idx, idx)] = True
    off = ~np.eye(n, dtype=bool)
    within = ups[same & off]
    across = ups[~same]
    return {
        "within_min": float(within.min()) if within.size else None,
        "across_max": float(across.max()) if across.size else None,
        "pattern_ok": bool(
            (within.size == 0 or within.min() > 0)
            and (across.size == 0 or across.max() < 0)
        ),
    }


def multi_label_sweep(world, eta_u, k, partition, deltas):
    """Numeric-only measure sweep for worlds with several labeled classes.

    A(delta) adds delta times every class's rank-one connection block; the
    analytic machinery is rank-one only, so just the measures are reported.
    """
    from .graph import compose_adjacency

    A_u = build_unlabeled_adjacency(world)
    vectors = [build_label_vector(world, c) for c in world.labeled_classes]
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ConfigError("delta grid is empty")

    def measure(delta):
        bundle = compose_adjacency(A_u, vectors, eta_u, delta)
        dec = decompose_matrix(bundle.A_norm, bundle.degrees, k)
        s = 1.0 / np.sqrt(bundle.degrees)
        core = dec.vectors @ (dec.eigenvalues[:, None] * dec.vectors.T)
        ZZ = (s[:, None] * core) * s[None, :]
        return _measure(partition, ZZ)[2]

    m0 = measure(0.0)
    rows = []
    for d in deltas:
        m = measure(d) if d != 0.0 else m0
        rows.append({
            "delta": d,
            "m_kms": m,
            "delta_kms": m0 - m,
            "leading_term": None,
            "analytic_derivative": None,
            "per_class": None,
        })
    return rows


def sweep(setup, deltas, max_workers=1):
    """Evaluate the measure along a delta grid; returns rows in grid order.

    Each row: delta, m_kms, delta_kms, leading_term plus the constant
    derivative column when the analytic path applies (None otherwise).
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ConfigError("delta grid is empty")
    try:
        deriv = analytic_derivative(setup)
        deriv_note = "ok"
    except (NumericError, RepeatedEigenvalueError) as exc:
        deriv = None
        deriv_note = str(exc)
    per_class = classwise_terms(setup)

    def one(d):
        return {
            "delta": d,
            "m_kms": kms_at(setup, d),
            "delta_kms": delta_kms(setup, d),
            "leading_term": leading_term(setup, d),
            "analytic_derivative": deriv,
            "per_class": per_class,
        }

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(one, deltas))
    else:
        rows = [one(d) for d in deltas]
    return rows, deriv_note
