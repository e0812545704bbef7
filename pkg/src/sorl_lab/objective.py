"""The five-term contrastive objective and its exact evaluation on finite worlds.

All expectations are computed in closed form by contracting the label vectors
l_i, the unlabeled marginal p = T'P and the gram matrix of the feature rows;
nothing is sampled. Cost is O(N^2 k).

Writing F = diag(sqrt(w)) f with w the graph degrees, the objective differs
from the low-rank factorization loss ||A_norm - F F'||_F^2 by the constant
||A_norm||_F^2, provided the augmentation rows are normalized distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConvergenceError
from .graph import build_label_vector
from .spectral import OptimizerConfig, lowrank_loss


@dataclass(frozen=True)
class FeatureMap:
    """Free N x k feature matrix, one row per population point, tied to its world."""

    values: np.ndarray
    world: object
    bundle: object

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ConfigError(f"feature matrix must be 2-d, got shape {v.shape}")
        if v.shape[0] != self.bundle.A.shape[0]:
            raise ConfigError(
                f"feature rows {v.shape[0]} do not match population size {self.bundle.A.shape[0]}"
            )
        if not np.all(np.isfinite(v)):
            raise ConfigError("feature matrix contains non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def scaled(self):
        """F = diag(sqrt(w)) f with w the bundle degrees."""
        return np.sqrt(self.bundle.degrees)[:, None] * self.values


def _label_vectors(world):
    return [build_label_vector(world, c) for c in world.labeled_classes]


def population_weights(world, eta_u, eta_l):
    """w_x = eta_l * sum_i l_i(x) + eta_u * p(x); equals the graph degrees when
    every augmentation row is a normalized distribution."""
    vecs = _label_vectors(world)
    total = sum(vecs) if vecs else np.zeros(world.augmented_count)
    return eta_l * total + eta_u * world.unlabeled_marginal()


def sorl_terms_from_gram(G, world):
    """The five expectation terms evaluated on a gram matrix G[x, x'] = f(x)'f(x')."""
    G = np.asarray(G, dtype=float)
    A_u = world.T.T @ (world.P[:, None] * world.T)
    vecs = _label_vectors(world)
    p = world.unlabeled_marginal()
    L = sum(vecs) if vecs else np.zeros(world.augmented_count)
    Q = G * G
    l1 = float(sum(v @ G @ v for v in vecs))
    l2 = float(np.sum(A_u * G))
    l3 = float(L @ Q @ L)
    l4 = float(L @ Q @ p)
    l5 = float(p @ Q @ p)
    return l1, l2, l3, l4, l5


def sorl_terms(f, world, bundle):
    """Exact positive-pair terms L1, L2 and negative-pair terms L3, L4, L5."""
    values = f.values if isinstance(f, FeatureMap) else np.asarray(f, dtype=float)
    if values.shape[0] != world.augmented_count:
        raise ConfigError("feature rows do not match the world population")
    return sorl_terms_from_gram(values @ values.T, world)


def combine_terms(terms, eta_u, eta_l):
    l1, l2, l3, l4, l5 = terms
    return (
        -2.0 * eta_l * l1
        - 2.0 * eta_u * l2
        + eta_l**2 * l3
        + 2.0 * eta_l * eta_u * l4
        + eta_u**2 * l5
    )


def sorl_loss(f, world, bundle):
    return combine_terms(sorl_terms(f, world, bundle), bundle.eta_u, bundle.eta_l)


def sorl_grad(f, world, bundle):
    """Exact gradient of sorl_loss with respect to the raw feature matrix."""
    values = f.values if isinstance(f, FeatureMap) else np.asarray(f, dtype=float)
    w = population_weights(world, bundle.eta_u, bundle.eta_l)
    G = values @ values.T
    # linear part -2 sum w_xx' f(x)'f(x') has gradient -4 A f; the quadratic part
    # sum w_x w_x' (f(x)'f(x'))^2 has gradient 4 diag(w) G diag(w) f.
    return -4.0 * (bundle.A @ values) + 4.0 * (w[:, None] * (G @ (w[:, None] * values)))


def norm_constant(bundle):
    """||A_norm||_F^2, the f-independent offset between the two objectives."""
    return float(np.sum(bundle.A_norm * bundle.A_norm))


def offset_constant_direct(bundle):
    """Same constant by the direct route sum_xx' w_xx'^2 / (w_x w_x')."""
    w = bundle.degrees
    return float(np.sum(bundle.A * bundle.A / np.outer(w, w)))


def equivalence_offsets(world, bundle, k=3, n_maps=5, seed=0):
    """Offsets lowrank_loss(diag(sqrt(w)) f) - sorl_loss(f) for seeded random maps.

    On worlds with normalized augmentation rows every offset equals
    ||A_norm||_F^2; the spread over maps certifies the equivalence.
    """
    rng = np.random.default_rng(seed)
    n = world.augmented_count
    offsets = []
    for _ in range(n_maps):
        f = FeatureMap(rng.standard_normal((n, k)), world, bundle)
        offsets.append(lowrank_loss(f.scaled(), bundle) - sorl_loss(f, world, bundle))
    return np.array(offsets)


def matrix_form_offsets(bundle, k=3, n_maps=5, seed=0):
    """Offsets against the degree-weighted quadratic form instead of the five terms.

    This identity is pure algebra and holds for any symmetric adjacency with
    positive degrees, normalized augmentation rows or not.
    """
    rng = np.random.default_rng(seed)
    n = bundle.A.shape[0]
    w = bundle.degrees
    offsets = []
    for _ in range(n_maps):
        f = rng.standard_normal((n, k))
        G = f @ f.T
        quad = float(w @ ((G * G) @ w))
        linear = -2.0 * float(np.sum(bundle.A * G))
        F = np.sqrt(w)[:, None] * f
        offsets.append(lowrank_loss(F, bundle) - (linear + quad))
    return np.array(offsets)


def train_sorl(world, bundle, k, opt=OptimizerConfig(), return_trace=False):
    """Gradient descent on the five-term objective over the raw N x k feature matrix."""
    n = world.augmented_count
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= N, got k={k}, N={n}")
    w = population_weights(world, bundle.eta_u, bundle.eta_l)
    lam1 = float(np.linalg.eigvalsh(bundle.A_norm)[-1])
    # a step of size s on f moves the scaled features by s * w_row, so the
    # low-rank default step shrinks by the largest weight
    step = opt.step if opt.step is not None else 0.1 / (max(lam1, 1e-12) ** 2 * max(w.max(), 1e-12))
    rng = np.random.default_rng(opt.seed)
    values = (0.1 / np.sqrt(max(w.max(), 1e-12))) * rng.standard_normal((n, k))
    trace = []
    grad_norm = np.inf
    for it in range(opt.max_iters):
        grad = sorl_grad(values, world, bundle)
        grad_norm = float(np.linalg.norm(grad))
        if return_trace:
            trace.append((it, sorl_loss(values, world, bundle), grad_norm))
        if grad_norm <= opt.tol:
            break
        values = values - step * grad
    else:
        raise ConvergenceError(
            f"feature training did not reach tol={opt.tol} in {opt.max_iters} iterations",
            sorl_loss(values, world, bundle),
            grad_norm,
        )
    fmap = FeatureMap(values, world, bundle)
    return (fmap, trace) if return_trace else fmap
