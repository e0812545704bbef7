"""Augmentation graphs over explicit finite distributions.

An AugmentationWorld holds the generative objects (augmentation matrix T,
natural-sample marginal P, per-labeled-class marginals P_l). From it the
unlabeled adjacency, label-connection vectors and the composed, degree
normalized adjacency are built. All arrays are frozen after construction;
every operation here is a pure function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, InitVar
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidWorldError, UnknownClassError, ZeroDegreeError

ROW_SUM_TOL = 1e-12
DEGREE_EPS = 1e-12


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class AugmentationWorld:
    """Finite augmentation model: row m of T is the distribution over augmented points.

    Class ids are stored as strings so that worlds survive a JSON round trip
    unchanged. `row_stochastic` records whether every row of T sums to 1;
    construction rejects non-stochastic rows unless explicitly allowed
    (needed for the duplicated-type rows of the 6-node toy world).
    """

    T: np.ndarray
    P: np.ndarray
    class_of: tuple
    labeled_classes: tuple
    P_l: dict
    require_row_stochastic: InitVar[bool] = True
    row_stochastic: bool = field(init=False)

    def __post_init__(self, require_row_stochastic):
        T = _frozen(self.T)
        P = _frozen(self.P)
        if T.ndim != 2 or T.shape[0] < 1 or T.shape[1] < 1:
            raise InvalidWorldError(f"T must be a nonempty 2-d matrix, got shape {T.shape}")
        m, n = T.shape
        if np.any(T < 0) or not np.all(np.isfinite(T)):
            raise InvalidWorldError("T entries must be finite and nonnegative")
        if P.shape != (m,) or np.any(P < 0):
            raise InvalidWorldError("P must be a nonnegative vector of length natural_count")
        if abs(P.sum() - 1.0) > ROW_SUM_TOL:
            raise InvalidWorldError(f"P must sum to 1, got {P.sum()!r}")
        class_of = tuple(str(c) for c in self.class_of)
        if len(class_of) != m:
            raise InvalidWorldError("class_of must assign a class to every natural sample")
        labeled = tuple(str(c) for c in self.labeled_classes)
        if len(set(labeled)) != len(labeled):
            raise InvalidWorldError("labeled_classes contains duplicates")
        P_l = {}
        for c in labeled:
            if c not in set(class_of):
                raise InvalidWorldError(f"labeled class {c!r} has no natural samples")
            if c not in {str(k) for k in self.P_l}:
                raise InvalidWorldError(f"missing P_l entry for labeled class {c!r}")
        for key, vec in self.P_l.items():
            key = str(key)
            if key not in labeled:
                raise InvalidWorldError(f"P_l given for non-labeled class {key!r}")
            v = _frozen(vec)
            if v.shape != (m,) or np.any(v < 0):
                raise InvalidWorldError(f"P_l[{key!r}] must be a nonnegative length-{m} vector")
            if abs(v.sum() - 1.0) > ROW_SUM_TOL:
                raise InvalidWorldError(f"P_l[{key!r}] must sum to 1, got {v.sum()!r}")
            off_class = [i for i in range(m) if v[i] > 0 and class_of[i] != key]
            if off_class:
                raise InvalidWorldError(
                    f"P_l[{key!r}] puts mass on samples of other classes at indices {off_class}"
                )
            P_l[key] = v
        row_sums = T.sum(axis=1)
        stochastic = bool(np.max(np.abs(row_sums - 1.0)) <= ROW_SUM_TOL)
        if require_row_stochastic and not stochastic:
            bad = np.where(np.abs(row_sums - 1.0) > ROW_SUM_TOL)[0]
            raise InvalidWorldError(
                f"rows of T must sum to 1 (violated at rows {bad.tolist()}); "
                "pass require_row_stochastic=False only for worlds that need it"
            )
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "class_of", class_of)
        object.__setattr__(self, "labeled_classes", labeled)
        object.__setattr__(self, "P_l", P_l)
        object.__setattr__(self, "row_stochastic", stochastic)

    @property
    def natural_count(self):
        return self.T.shape[0]

    @property
    def augmented_count(self):
        return self.T.shape[1]

    def unlabeled_marginal(self):
        """Per-vertex probability of being generated from P: p = T' P."""
        return self.T.T @ self.P


def make_world(T, P, class_of, labeled_classes, P_l, require_row_stochastic=True):
    return AugmentationWorld(
        T=np.asarray(T, dtype=float),
        P=np.asarray(P, dtype=float),
        class_of=tuple(class_of),
        labeled_classes=tuple(labeled_classes),
        P_l=dict(P_l),
        require_row_stochastic=require_row_stochastic,
    )


def build_unlabeled_adjacency(world):
    """Pairwise positive-pair probabilities: entry (x, x') is sum_m P_m T[m,x] T[m,x']."""
    return world.T.T @ (world.P[:, None] * world.T)


def build_label_vector(world, class_id):
    """Connection of every vertex to the labeled pool of one class: sum_m P_l[m] T[m,x]."""
    class_id = str(class_id)
    if class_id not in world.labeled_classes:
        raise UnknownClassError(
            f"class {class_id!r} is not labeled (labeled: {world.labeled_classes})"
        )
    return world.T.T @ world.P_l[class_id]


@dataclass(frozen=True)
class AdjacencyBundle:
    """Composed graph: A = eta_u * A_u + eta_l * sum_i l_i l_i', with degrees and
    the symmetric degree-normalized adjacency A_norm = D^{-1/2} A D^{-1/2}."""

    A_u: np.ndarray
    label_vectors: tuple
    eta_u: float
    eta_l: float
    A: np.ndarray
    degrees: np.ndarray
    A_norm: np.ndarray


def compose_adjacency(A_u, label_vectors, eta_u, eta_l):
    A_u = np.asarray(A_u, dtype=float)
    if A_u.ndim != 2 or A_u.shape[0] != A_u.shape[1]:
        raise ConfigError(f"A_u must be square, got shape {A_u.shape}")
    n = A_u.shape[0]
    if not (eta_u >= 0 and eta_l >= 0 and eta_u + eta_l > 0):
        raise ConfigError(f"need eta_u >= 0, eta_l >= 0, eta_u + eta_l > 0; got {eta_u}, {eta_l}")
    vectors = []
    for v in label_vectors:
        v = np.asarray(v, dtype=float)
        if v.shape != (n,):
            raise ConfigError(f"label vector of shape {v.shape} does not match N={n}")
        vectors.append(v)
    A = eta_u * A_u
    for v in vectors:
        A = A + eta_l * np.outer(v, v)
    degrees = A.sum(axis=1)
    dead = np.where(degrees <= DEGREE_EPS)[0]
    if dead.size:
        raise ZeroDegreeError(dead)
    inv_sqrt = 1.0 / np.sqrt(degrees)
    A_norm = inv_sqrt[:, None] * A * inv_sqrt[None, :]
    return AdjacencyBundle(
        A_u=_frozen(A_u),
        label_vectors=tuple(_frozen(v) for v in vectors),
        eta_u=float(eta_u),
        eta_l=float(eta_l),
        A=_frozen(A),
        degrees=_frozen(degrees),
        A_norm=_frozen(A_norm),
    )


def bundle_from_world(world, eta_u, eta_l):
    """Build every label vector and compose; the standard world -> graph path."""
    A_u = build_unlabeled_adjacency(world)
    vectors = [build_label_vector(world, c) for c in world.labeled_classes]
    return compose_adjacency(A_u, vectors, eta_u, eta_l)


# --- world definition file (JSON) ---

def world_to_json(world):
    return {
        "natural_count": world.natural_count,
        "augmented_count": world.augmented_count,
        "T": [list(map(float, row)) for row in world.T],
        "P": list(map(float, world.P)),
        "class_of": list(world.class_of),
        "labeled_classes": list(world.labeled_classes),
        "P_l": {c: list(map(float, v)) for c, v in world.P_l.items()},
        "row_stochastic": world.row_stochastic,
    }


def world_from_json(obj):
    try:
        T = np.array(obj["T"], dtype=float)
        P = np.array(obj["P"], dtype=float)
        class_of = obj["class_of"]
        labeled = obj["labeled_classes"]
        P_l = obj["P_l"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidWorldError(f"malformed world definition: {exc}") from exc
    if T.ndim == 2 and (
        int(obj.get("natural_count", T.shape[0])) != T.shape[0]
        or int(obj.get("augmented_count", T.shape[1])) != T.shape[1]
    ):
        raise InvalidWorldError(
            f"declared counts {obj.get('natural_count')}x{obj.get('augmented_count')} "
            f"do not match T of shape {T.shape}"
        )
    stochastic = bool(obj.get("row_stochastic", True))
    return make_world(T, P, class_of, labeled, P_l, require_row_stochastic=stochastic)


def save_world(world, path):
    Path(path).write_text(json.dumps(world_to_json(world), indent=2, sort_keys=True))


def load_world(path):
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidWorldError(f"{path}: not valid JSON: {exc}") from exc
    return world_from_json(obj)
