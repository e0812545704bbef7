"""Shared generators: random row-stochastic worlds, symmetric doubly stochastic
matrices for derivative tests, and tuned block worlds for the bound checks."""

import numpy as np

from sorl_lab import BlockWorldParams, make_setup, make_world, partition_from_labels, synth_block_world


def random_world(seed, m=8, n=10, n_labeled=2, n_classes=None):
    """Row-stochastic world with n_labeled labeled classes out of n_classes."""
    g = np.random.default_rng(seed)
    n_classes = n_classes or n_labeled + 1
    T = g.uniform(0.01, 1.0, (m, n))
    T /= T.sum(axis=1, keepdims=True)
    P = g.uniform(0.2, 1.0, m)
    P /= P.sum()
    class_of = g.integers(0, n_classes, m)
    class_of[:n_classes] = np.arange(n_classes)  # every class inhabited
    P_l = {}
    for c in range(n_labeled):
        mask = class_of == c
        v = np.zeros(m)
        v[mask] = g.uniform(0.2, 1.0, int(mask.sum()))
        v /= v.sum()
        P_l[str(c)] = v
    return make_world(T, P, [str(c) for c in class_of], [str(c) for c in range(n_labeled)], P_l)


def sym_doubly_stochastic(seed, n, iters=4000):
    """Symmetric matrix with unit row sums via symmetric scaling iterations."""
    g = np.random.default_rng(seed)
    M = g.uniform(0.05, 1.0, (n, n))
    A = 0.5 * (M + M.T)
    for _ in range(iters):
        r = A.sum(axis=1)
        if np.max(np.abs(r - 1.0)) < 1e-15:
            break
        s = 1.0 / np.sqrt(r)
        A = s[:, None] * A * s[None, :]
    return 0.5 * (A + A.T)


def random_uniform_setup(seed, n=10, k=3, n_classes=3):
    """Unit-row-sum base, probability label vector, random partition."""
    g = np.random.default_rng(seed)
    base = sym_doubly_stochastic(seed, n)
    l = g.uniform(0.0, 1.0, n)
    l /= l.sum()
    labels = g.integers(0, n_classes, n)
    labels[:n_classes] = np.arange(n_classes)
    return make_setup(base, l, k, partition_from_labels(labels))


def connected_block_params(rng):
    """Three connected blocks, one slow within-block mode, gap >= 10 at k = 4."""
    q1 = rng.uniform(0.01, 0.03)
    p1 = rng.uniform(0.33, 0.40)
    s0 = rng.uniform(0.17, 0.21)
    s2 = rng.uniform(0.17, 0.21)
    return BlockWorldParams(
        sizes=(4, 4, 4),
        within_pair=(s0, p1, s2),
        cross_pair=(s0, q1, s2),
        cross={
            (0, 1): rng.uniform(0.004, 0.012),
            (0, 2): rng.uniform(0.001, 0.004),
            (1, 2): rng.uniform(0.001, 0.004),
        },
    )


def fig1_block_params():
    """Labeled block 0, novel block 1 connected to it, novel block 2 isolated."""
    return BlockWorldParams(
        sizes=(4, 4, 4),
        within_pair=(0.19, 0.36, 0.19),
        cross_pair=(0.19, 0.02, 0.19),
        cross={(0, 1): 0.012, (0, 2): 0.0, (1, 2): 0.0},
    )


def gap_block_world(target_gap, seed=0):
    """Connected block world whose ratio lambda_3 / lambda_4 is close to target_gap.

    The block quotient (exact even under pair jitter) fixes the top three
    eigenvalues. The block-1 even mode is solved to land at lambda_3 /
    target_gap and every other within-block mode is parked well below it.
    """
    cross = {(0, 1): 0.010, (0, 2): 0.006, (1, 2): 0.004}
    cr = [4 * (cross[(0, 1)] + cross[(0, 2)]),
          4 * (cross[(0, 1)] + cross[(1, 2)]),
          4 * (cross[(0, 2)] + cross[(1, 2)])]
    Q = np.array([
        [1 - cr[0], 4 * cross[(0, 1)], 4 * cross[(0, 2)]],
        [4 * cross[(0, 1)], 1 - cr[1], 4 * cross[(1, 2)]],
        [4 * cross[(0, 2)], 4 * cross[(1, 2)], 1 - cr[2]],
    ])
    lam3 = np.sort(np.linalg.eigvalsh(Q))[0] ** 2
    t_target = np.sqrt(lam3 / target_gap)   # block-1 mode of T: 1 - 4 q1 - cr1
    # distinct nuisance levels per block, all below the target (jitter cannot
    # split the even in-block modes, so exact collisions must be avoided here)
    nuis = (0.60 * t_target, 0.50 * t_target, 0.55 * t_target)
    q1 = (1.0 - cr[1] - t_target) / 4.0
    p1 = (1.0 - 2.0 * q1 - cr[1] - nuis[1]) / 2.0
    s0 = (1.0 - cr[0] - nuis[0]) / 4.0
    s2 = (1.0 - cr[2] - nuis[2]) / 4.0
    # the jitters break exact block equitability and the uneven pool gives the
    # label vector within-block components; both are needed for a genuine
    # truncation residual (perfectly equitable worlds have residual exactly 0)
    params = BlockWorldParams(
        sizes=(4, 4, 4),
        within_pair=(s0, p1, s2),
        cross_pair=(s0, q1, s2),
        cross=cross,
        pair_jitter=min(0.003, float(min(nuis)) / 8.0),
        cross_jitter=0.002,
        label_pool=(0.4, 0.3, 0.2, 0.1),
    )
    return synth_block_world(params, seed=seed)


def normalized_measure(A, partition_labels, k):
    """Independent clustering-measure oracle: normalize, eigendecompose, truncate,
    take the two scatter traces directly. Used to finite-difference the library."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    d = A.sum(axis=1)
    s = 1.0 / np.sqrt(d)
    An = s[:, None] * A * s[None, :]
    w, V = np.linalg.eigh(An)
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    ZZ = (s[:, None] * (V[:, :k] @ (w[:k, None] * V[:, :k].T))) * s[None, :]
    H = np.zeros((n, n))
    labels = np.asarray(partition_labels)
    for c in np.unique(labels):
        idx = np.where(labels == c)[0]
        H[np.ix_(idx, idx)] = 1.0 / idx.size
    intra = float(np.trace(ZZ) - np.sum(H * ZZ))
    inter = float(np.sum(H * ZZ) - np.sum(ZZ) / n)
    return intra / inter


def central_fd_derivative(setup, h=1e-6):
    """(m(h) - m(-h)) / 2h around delta = 0, computed without the library's
    perturbation path (negative offsets included)."""
    rank1 = np.outer(setup.label_vector, setup.label_vector)
    mp = normalized_measure(setup.base + h * rank1, setup.partition.labels, setup.k)
    mm = normalized_measure(setup.base - h * rank1, setup.partition.labels, setup.k)
    return (mp - mm) / (2.0 * h)
