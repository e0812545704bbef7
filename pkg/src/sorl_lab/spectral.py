"""Spectral decomposition of the normalized adjacency and the low-rank objective.

The matrix is symmetric, so the decomposition is a symmetric eigendecomposition
sorted by descending eigenvalue; for the PSD-on-top matrices built here this
coincides with the truncated SVD. The feature matrix is
Z = D^{-1/2} V_k sqrt(Sigma_k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateGapError,
    DegenerateNormalizerError,
    NegativeEigenvalueError,
)

GAP_EPS = 1e-9
EIG_NEG_EPS = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """Plain gradient descent settings. step=None picks 0.1 / lambda_1^2."""

    step: float | None = None
    max_iters: int = 50000
    seed: int = 0
    tol: float = 1e-8


@dataclass(frozen=True)
class SpectralEmbedding:
    k: int
    eigenvalues: np.ndarray      # top-k, descending
    vectors: np.ndarray          # N x k, orthonormal
    null_space: np.ndarray       # N x (N-k), orthonormal complement
    gap_abs: float               # lambda_k - lambda_{k+1}
    gap_ratio: float             # lambda_k / lambda_{k+1} (inf if the latter <= 0)
    Z: np.ndarray                # N x k feature matrix
    all_eigenvalues: np.ndarray  # full spectrum, descending


def _fix_signs(V):
    """Largest-|entry| coordinate of each column made positive; ties at the lowest index."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        i = int(np.argmax(np.abs(col)))  # argmax takes the first maximal entry
        if col[i] < 0:
            V[:, j] = -col
    return V


def eig_descending(S):
    """Full symmetric eigendecomposition, eigenvalues descending, deterministic signs."""
    w, V = np.linalg.eigh(S)
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], _fix_signs(V[:, order])


def decompose_matrix(A_norm, degrees, k):
    """Top-k spectral embedding of a symmetric normalized adjacency."""
    A_norm = np.asarray(A_norm, dtype=float)
    degrees = np.asarray(degrees, dtype=float)
    n = A_norm.shape[0]
    if not 1 <= k < n:
        raise ConfigError(f"need 1 <= k < N, got k={k}, N={n}")
    w, V = eig_descending(A_norm)
    gap_abs = float(w[k - 1] - w[k])
    if gap_abs < GAP_EPS:
        raise DegenerateGapError(
            f"gap at k={k} is degenerate: lambda_k={w[k-1]!r}, lambda_k+1={w[k]!r}"
        )
    gap_ratio = float(w[k - 1] / w[k]) if w[k] > 0 else float("inf")
    Z = feature_matrix(degrees, V[:, :k], w[:k])

    def frozen(a):
        out = np.array(a)
        out.setflags(write=False)
        return out

    return SpectralEmbedding(
        k=int(k),
        eigenvalues=frozen(w[:k]),
        vectors=frozen(V[:, :k]),
        null_space=frozen(V[:, k:]),
        gap_abs=gap_abs,
        gap_ratio=gap_ratio,
        Z=frozen(Z),
        all_eigenvalues=frozen(w),
    )


def feature_matrix(degrees, vectors, eigenvalues):
    """Z = D^{-1/2} V_k sqrt(Sigma_k); rejects genuinely negative retained eigenvalues."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if np.any(eigenvalues < -EIG_NEG_EPS):
        raise NegativeEigenvalueError(
            f"cannot take sqrt of retained eigenvalues {eigenvalues[eigenvalues < -EIG_NEG_EPS]}"
        )
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    return (1.0 / np.sqrt(degrees))[:, None] * np.asarray(vectors) * roots[None, :]


def topk_decompose(bundle, k):
    return decompose_matrix(bundle.A_norm, bundle.degrees, k)


def embedding(bundle, decomposition):
    return feature_matrix(bundle.degrees, decomposition.vectors, decomposition.eigenvalues)


def lowrank_loss(F, bundle_or_matrix):
    """Squared Frobenius distance between the normalized adjacency and F F'."""
    A_norm = getattr(bundle_or_matrix, "A_norm", bundle_or_matrix)
    F = np.asarray(F, dtype=float)
    R = A_norm - F @ F.T
    return float(np.sum(R * R))


def rank_k_truncation(A_norm, k):
    w, V = eig_descending(np.asarray(A_norm, dtype=float))
    return V[:, :k] @ (w[:k, None] * V[:, :k].T)


def minimize_lowrank(bundle_or_matrix, k, opt=OptimizerConfig(), return_trace=False):
    """Gradient descent on ||A_norm - F F'||_F^2 from a seeded random start."""
    A_norm = getattr(bundle_or_matrix, "A_norm", bundle_or_matrix)
    n = A_norm.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"need 1 <= k <= N, got k={k}, N={n}")
    lam1 = float(np.linalg.eigvalsh(A_norm)[-1])
    step = opt.step if opt.step is not None else 0.1 / max(lam1, 1e-12) ** 2
    rng = np.random.default_rng(opt.seed)
    F = 0.1 * rng.standard_normal((n, k))
    trace = []
    grad_norm = np.inf
    for it in range(opt.max_iters):
        R = F @ F.T - A_norm
        grad = 4.0 * (R @ F)
        grad_norm = float(np.linalg.norm(grad))
        if return_trace:
            trace.append((it, float(np.sum(R * R)), grad_norm))
        if grad_norm <= opt.tol:
            break
        F -= step * grad
    else:
        loss = float(np.sum((F @ F.T - A_norm) ** 2))
        raise ConvergenceError(
            f"gradient descent did not reach tol={opt.tol} in {opt.max_iters} iterations",
            loss,
            grad_norm,
        )
    return (F, trace) if return_trace else F


def simclr_effective_matrix(bundle):
    """Adjacency corrected by the degree outer-product term from the large-temperature
    expansion of the InfoNCE-style objective: A - (d d' - diag(d^2)) / ((tr D)^2 - tr D^2)."""
    d = bundle.degrees
    denom = float(d.sum() ** 2 - (d * d).sum())
    if denom <= 1e-12:
        raise DegenerateNormalizerError(
            f"(tr D)^2 - tr(D^2) = {denom!r} is not positive; correction undefined"
        )
    correction = (np.outer(d, d) - np.diag(d * d)) / denom
    return bundle.A - correction


def sin_distance(U, W):
    """Frobenius norm of the sines of the principal angles between two column spans."""
    angles = subspace_angles(np.asarray(U, dtype=float), np.asarray(W, dtype=float))
    return float(np.linalg.norm(np.sin(angles)))
