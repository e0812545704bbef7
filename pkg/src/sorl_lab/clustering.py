"""Clustering quality measures and the seeded evaluation protocol.

The intra/inter scatter pair is computed twice, once as direct sums over
cluster members and once through the membership-matrix trace forms; the two
routes must agree, which guards the matrix algebra used by the perturbation
analysis. Clustering accuracy is Hungarian-matched on the contingency table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError, DegenerateInterError, EmptyClusterError, NumericError

INTER_EPS = 1e-12
CROSS_CHECK_TOL = 1e-10


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of [N] by C nonempty index sets."""

    labels: np.ndarray           # length N, values 0..C-1
    groups: tuple                # tuple of index tuples

    @property
    def class_count(self):
        return len(self.groups)

    @property
    def size(self):
        return self.labels.shape[0]

    def membership(self):
        """Block matrix averaging within clusters: idempotent, symmetric, rows sum to 1."""
        n = self.size
        H = np.zeros((n, n))
        for grp in self.groups:
            idx = np.asarray(grp)
            H[np.ix_(idx, idx)] = 1.0 / len(grp)
        return H


def partition_from_labels(labels):
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ConfigError("labels must be a nonempty 1-d sequence")
    uniq = sorted(set(labels.tolist()))
    remap = {c: i for i, c in enumerate(uniq)}
    dense = np.array([remap[c] for c in labels.tolist()], dtype=int)
    groups = tuple(tuple(np.where(dense == i)[0].tolist()) for i in range(len(uniq)))
    dense.setflags(write=False)
    return Partition(labels=dense, groups=groups)


def partition_from_groups(groups, n):
    labels = np.full(n, -1, dtype=int)
    for i, grp in enumerate(groups):
        for x in grp:
            if not 0 <= x < n:
                raise ConfigError(f"index {x} out of range for N={n}")
            if labels[x] != -1:
                raise ConfigError(f"index {x} appears in more than one group")
            labels[x] = i
    if np.any(labels == -1):
        raise ConfigError("groups must cover every index")
    return partition_from_labels(labels)


@dataclass(frozen=True)
class ClusterScores:
    intra: float
    inter: float
    kms: float
    error_ratio: float | None


def intra_inter(partition, Z):
    """Within-cluster scatter and size-weighted center spread, cross-checked
    against the trace forms Tr((I-H) Z Z') and Tr((H - 11'/N) Z Z')."""
    Z = np.asarray(Z, dtype=float)
    n = partition.size
    if Z.shape[0] != n:
        raise ConfigError(f"Z has {Z.shape[0]} rows for a partition over {n} points")
    mu_all = Z.mean(axis=0)
    intra = 0.0
    inter = 0.0
    for grp in partition.groups:
        idx = np.asarray(grp)
        mu = Z[idx].mean(axis=0)
        intra += float(np.sum((Z[idx] - mu) ** 2))
        inter += len(grp) * float(np.sum((mu - mu_all) ** 2))
    H = partition.membership()
    ZZ = Z @ Z.T
    intra_tr = float(np.trace(ZZ) - np.sum(H * ZZ))
    inter_tr = float(np.sum(H * ZZ) - np.sum(ZZ) / n)
    scale = max(1.0, abs(intra), abs(inter))
    if abs(intra - intra_tr) > CROSS_CHECK_TOL * scale or abs(inter - inter_tr) > CROSS_CHECK_TOL * scale:
        raise NumericError(
            f"direct and trace forms disagree: intra {intra!r} vs {intra_tr!r}, "
            f"inter {inter!r} vs {inter_tr!r}"
        )
    return intra, inter


def scatter_from_product(partition, ZZ):
    """Trace-form intra/inter straight from a gram matrix Z Z'."""
    n = partition.size
    H = partition.membership()
    intra = float(np.trace(ZZ) - np.sum(H * ZZ))
    inter = float(np.sum(H * ZZ) - np.sum(ZZ) / n)
    return intra, inter


def kmeans_measure(partition, Z):
    intra, inter = intra_inter(partition, Z)
    if inter <= INTER_EPS:
        raise DegenerateInterError(f"inter-class scatter {inter!r} below {INTER_EPS}")
    return intra / inter


def error_ratio(partition, Z):
    """Harmonic mean over ordered cluster pairs of |xi| / (|pi| + |pi'|), where xi
    collects the points of pi at least as close to the other center (ties count).
    Returns None when some pair has an empty xi."""
    Z = np.asarray(Z, dtype=float)
    C = partition.class_count
    if C < 2:
        raise ConfigError("error ratio needs at least two classes")
    centers = np.stack([Z[np.asarray(g)].mean(axis=0) for g in partition.groups])
    inv_sum = 0.0
    for a in range(C):
        idx = np.asarray(partition.groups[a])
        da = np.linalg.norm(Z[idx] - centers[a], axis=1)
        for b in range(C):
            if b == a:
                continue
            db = np.linalg.norm(Z[idx] - centers[b], axis=1)
            xi = int(np.sum(da >= db))
            if xi == 0:
                return None
            inv_sum += (len(partition.groups[a]) + len(partition.groups[b])) / xi
    return C * (C - 1) / inv_sum


def cluster_scores(partition, Z):
    intra, inter = intra_inter(partition, Z)
    if inter <= INTER_EPS:
        raise DegenerateInterError(f"inter-class scatter {inter!r} below {INTER_EPS}")
    return ClusterScores(
        intra=intra,
        inter=inter,
        kms=intra / inter,
        error_ratio=error_ratio(partition, Z) if partition.class_count >= 2 else None,
    )


@dataclass(frozen=True)
class KMeansConfig:
    seed: int = 0
    max_iters: int = 300
    restarts: int = 5


def _init_centroids(Z, known, C_total, rng):
    """Known-class centroids from labeled means; the rest by distance-weighted
    sampling over the unlabeled rows (farthest points are most likely)."""
    n, dim = Z.shape
    centroids = np.zeros((C_total, dim))
    pinned_rows = set()
    for c, idx in known.items():
        centroids[c] = Z[np.asarray(idx)].mean(axis=0)
        pinned_rows.update(int(i) for i in idx)
    free = sorted(set(range(n)) - pinned_rows)
    placed = sorted(known.keys())
    for c in range(C_total):
        if c in known:
            continue
        if not free:
            raise EmptyClusterError("no unlabeled rows left to seed a novel centroid")
        d2 = np.min(
            np.stack([np.sum((Z[free] - centroids[p]) ** 2, axis=1) for p in placed]),
            axis=0,
        ) if placed else np.ones(len(free))
        total = float(d2.sum())
        if total <= 0:
            pick = free[int(rng.integers(len(free)))]
        else:
            pick = free[int(rng.choice(len(free), p=d2 / total))]
        centroids[c] = Z[pick]
        placed.append(c)
    return centroids


def _lloyd(Z, known, C_total, centroids, max_iters):
    n = Z.shape[0]
    pinned = np.full(n, -1, dtype=int)
    for c, idx in known.items():
        pinned[np.asarray(idx)] = c
    assign = np.full(n, -1, dtype=int)
    for _ in range(max_iters):
        dists = np.sum((Z[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dists, axis=1)
        new_assign[pinned >= 0] = pinned[pinned >= 0]
        # emptied clusters re-seed from the farthest free point; free means
        # unpinned and not the sole member of its current cluster
        empty = [c for c in range(C_total) if not np.any(new_assign == c)]
        guard = 0
        while empty and guard <= C_total:
            c = empty[0]
            score = np.min(dists, axis=1).copy()
            score[pinned >= 0] = -1.0
            for cc in range(C_total):
                members = np.where(new_assign == cc)[0]
                if members.size == 1:
                    score[members] = -1.0
            far = int(np.argmax(score))
            if score[far] < 0:
                raise EmptyClusterError(f"cluster {c} emptied and no free row to re-seed")
            new_assign[far] = c
            centroids[c] = Z[far]
            empty = [cc for cc in range(C_total) if not np.any(new_assign == cc)]
            guard += 1
        if empty:
            raise EmptyClusterError(f"could not repopulate clusters {empty}")
        for c in range(C_total):
            centroids[c] = Z[new_assign == c].mean(axis=0)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    sse = float(np.sum((Z - centroids[assign]) ** 2))
    return assign, sse


def seeded_kmeans(Z, labeled_indices_by_class, C_total, opt=KMeansConfig()):
    """Lloyd iterations with labeled points pinned to their classes.

    labeled_indices_by_class maps class index (0..C_total-1) to row indices;
    those rows never change cluster and initialize their class centroids.
    Runs opt.restarts seeded attempts and keeps the lowest within-cluster sum.
    """
    Z = np.asarray(Z, dtype=float)
    known = {int(c): tuple(int(i) for i in idx) for c, idx in labeled_indices_by_class.items()}
    if any(not 0 <= c < C_total for c in known):
        raise ConfigError(f"labeled class ids {sorted(known)} must lie in [0, {C_total})")
    if any(len(idx) == 0 for idx in known.values()):
        raise ConfigError("every labeled class needs at least one labeled row")
    best = None
    failures = []
    for r in range(max(1, opt.restarts)):
        rng = np.random.default_rng(opt.seed + r)
        try:
            centroids = _init_centroids(Z, known, C_total, rng)
            assign, sse = _lloyd(Z, known, C_total, centroids, opt.max_iters)
        except EmptyClusterError as exc:
            failures.append(exc)
            continue
        if best is None or sse < best[0] - 1e-15:
            best = (sse, r, assign)
    if best is None:
        raise EmptyClusterError(
            f"all {opt.restarts} restarts failed with empty clusters: {failures[-1]}"
        )
    return best[2]


def hungarian_accuracy(pred, truth):
    """Best fraction of agreements over all matchings of predicted ids to true ids."""
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise ConfigError(f"length mismatch: {pred.shape} vs {truth.shape}")
    C = int(max(pred.max(), truth.max())) + 1
    table = np.zeros((C, C), dtype=int)
    for p, t in zip(pred, truth):
        table[p, t] += 1
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / pred.size


def evaluation_scores(Z, partition, pred, known_class_ids):
    """Score dictionary for the eval report.

    accuracy_known pins known-class ids (plain classification accuracy on rows
    whose true class is known); accuracy_known_unpinned rescored under the
    joint matching; accuracy_novel is Hungarian-matched on the novel rows only.
    """
    truth = partition.labels
    pred = np.asarray(pred, dtype=int)
    scores = cluster_scores(partition, Z)
    known_mask = np.isin(truth, np.asarray(sorted(known_class_ids), dtype=int))
    out = {
        "intra": scores.intra,
        "inter": scores.inter,
        "kms": scores.kms,
        "error_ratio": scores.error_ratio,
        "accuracy_all": hungarian_accuracy(pred, truth),
    }
    out["accuracy_known"] = (
        float(np.mean(pred[known_mask] == truth[known_mask])) if known_mask.any() else None
    )
    if known_mask.any():
        C = int(max(pred.max(), truth.max())) + 1
        table = np.zeros((C, C), dtype=int)
        for p, t in zip(pred, truth):
            table[p, t] += 1
        rows, cols = linear_sum_assignment(table, maximize=True)
        mapping = dict(zip(rows.tolist(), cols.tolist()))
        mapped = np.array([mapping.get(p, -1) for p in pred])
        out["accuracy_known_unpinned"] = float(np.mean(mapped[known_mask] == truth[known_mask]))
    else:
        out["accuracy_known_unpinned"] = None
    novel_mask = ~known_mask
    out["accuracy_novel"] = (
        hungarian_accuracy(pred[novel_mask], truth[novel_mask]) if novel_mask.any() else None
    )
    return out
