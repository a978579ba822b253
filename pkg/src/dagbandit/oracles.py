"""Leaf evaluators: the oracle contract, synthetic sigmoid/Bernoulli oracles,
and the feature-selection oracles built on k-NN AUC.

An oracle call returns ``(value, evaluated_set)`` with ``value`` in [0, 1].
The evaluated set is the feature set the value actually belongs to -- the
node's own set for terminal evaluations, the random completion endpoint for
intermediate ones -- which is what RAVE accumulators need to see.

The AUC here is the strict pair-counting form

    V = #{(x, x') : s(x) < s(x'), y < y'} / #{(x, x') : y < y'}

with tied scores counting as non-concordant (no half credit).  That is a
deliberate deviation from the conventional AUC; the scores are positive-label
counts among the k nearest neighbours, computed with the query point excluded
from its own neighbourhood and distance ties broken by example index.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .feature_space import STOP

__all__ = [
    "Dataset",
    "OracleSpec",
    "bernoulli_sample",
    "intermediate_rollout",
    "key_features",
    "knn_auc",
    "knn_scores",
    "load_csv",
    "load_madelon",
    "make_fs_oracles",
    "make_sigmoid_bernoulli_oracles",
    "save_csv",
    "sigmoid_mean",
]


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


@dataclass
class Dataset:
    """Labeled examples: real feature matrix, binary labels in {0, 1}."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (n, d) with y of length n")
        if not np.isfinite(self.X).all():
            raise ValueError("dataset contains missing or non-finite values")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length must match X columns")
        if self.y.min() == self.y.max():
            raise ValueError("both classes must be present")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def load_csv(path) -> Dataset:
    """CSV with a header row; feature columns, final column ``y`` in {0, 1}."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-1] != "y":
        raise ValueError(f"last column must be 'y', got {header[-1]!r}")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Dataset(X=body[:, :-1], y=body[:, -1].astype(np.int64), feature_names=header[:-1])


def save_csv(data: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(data.feature_names + ["y"]) + "\n")
        for i in range(data.n):
            row = ",".join(f"{v:.10g}" for v in data.X[i])
            fh.write(f"{row},{data.y[i]:d}\n")


def load_madelon(data_path, labels_path, checksum: str | None = None) -> Dataset:
    """Madelon format: whitespace-separated integer matrix plus a labels file
    with entries in {-1, +1}, mapped to {0, 1}.  Files are user-supplied; an
    optional sha256 over both files is verified when given."""
    if checksum is not None:
        h = hashlib.sha256()
        for p in (data_path, labels_path):
            with open(p, "rb") as fh:
                h.update(fh.read())
        digest = h.hexdigest()
        if digest != checksum:
            raise ValueError(f"checksum mismatch: {digest} != {checksum}")
    X = np.loadtxt(data_path, dtype=np.float64, ndmin=2)
    raw = np.loadtxt(labels_path, dtype=np.int64)
    if not np.isin(raw, (-1, 1)).all():
        raise ValueError("labels file must contain only -1 and +1")
    y = (raw > 0).astype(np.int64)
    names = [f"v{i + 1}" for i in range(X.shape[1])]
    return Dataset(X=X, y=y, feature_names=names)


# ---------------------------------------------------------------------------
# oracle contract
# ---------------------------------------------------------------------------


@dataclass
class OracleSpec:
    """Evaluator pair: ``terminal`` for true leaves, ``intermediate`` for
    temporary frontier leaves.  Both are called as ``fn(key, rng)`` and
    return ``(value, evaluated_feature_set)``.  When the terminal oracle is
    deterministic a single call pins the leaf's value exactly."""

    terminal: Callable
    intermediate: Callable
    deterministic_terminal: bool = False


def key_features(key) -> tuple[int, ...]:
    """Feature indices of a domain key, for either key shape.

    Feature-lattice keys are ``(features, stop)``; fixed-depth lattice and
    tree keys are plain move tuples (move order is irrelevant to the value,
    which is how transposed tree nodes end up with equal means).
    """
    if len(key) == 2 and isinstance(key[1], bool):
        return key[0]
    return key


def sigmoid_mean(scores, key) -> float:
    """Logistic of the summed feature scores: sig(sum_{f in F} score(f)).

    Scores are summed in sorted feature order so every move order of the
    same position yields the bit-identical value: exact value ties between
    transposed nodes are structural, not accidental.
    """
    total = 0.0
    for f in sorted(key_features(key)):
        total += scores[f]
    return 1.0 / (1.0 + np.exp(-total))


def bernoulli_sample(mu: float, rng) -> float:
    if not 0.0 <= mu <= 1.0:
        raise ValueError(f"mean must lie in [0, 1], got {mu}")
    return 1.0 if rng.random() < mu else 0.0


def make_sigmoid_bernoulli_oracles(scores) -> OracleSpec:
    """Synthetic benchmark oracle: every leaf (temporary or terminal) draws a
    Bernoulli with mean sig(sum of its feature scores)."""

    def sample(key, rng):
        value = bernoulli_sample(sigmoid_mean(scores, key), rng)
        return value, frozenset(key_features(key))

    return OracleSpec(terminal=sample, intermediate=sample, deterministic_terminal=False)


# ---------------------------------------------------------------------------
# k-NN scores and strict pair-count AUC
# ---------------------------------------------------------------------------


@njit(cache=True)
def _knn_scores_brute(X, y, feats, queries, k):
    n = X.shape[0]
    m = queries.shape[0]
    nf = feats.shape[0]
    scores = np.empty(m, np.int64)
    best_d = np.empty(k, np.float64)
    best_j = np.empty(k, np.int64)
    for qi in range(m):
        i = queries[qi]
        cnt = 0
        for j in range(n):
            if j == i:
                continue
            d = 0.0
            for a in range(nf):
                f = feats[a]
                diff = X[i, f] - X[j, f]
                d += diff * diff
            if cnt < k:
                pos = cnt
                while pos > 0 and d < best_d[pos - 1]:
                    best_d[pos] = best_d[pos - 1]
                    best_j[pos] = best_j[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_j[pos] = j
                cnt += 1
            elif d < best_d[k - 1]:
                pos = k - 1
                while pos > 0 and d < best_d[pos - 1]:
                    best_d[pos] = best_d[pos - 1]
                    best_j[pos] = best_j[pos - 1]
                    pos -= 1
                best_d[pos] = d
                best_j[pos] = j
        s = 0
        for a in range(k):
            if y[best_j[a]] > 0:
                s += 1
        scores[qi] = s
    return scores


@njit(cache=True)
def _auc_strict(scores, labels, k):
    hist_pos = np.zeros(k + 1, np.int64)
    hist_neg = np.zeros(k + 1, np.int64)
    for i in range(scores.shape[0]):
        if labels[i] > 0:
            hist_pos[scores[i]] += 1
        else:
            hist_neg[scores[i]] += 1
    n_pos = 0
    n_neg = 0
    for v in range(k + 1):
        n_pos += hist_pos[v]
        n_neg += hist_neg[v]
    if n_pos == 0 or n_neg == 0:
        return -1.0
    concordant = 0
    pos_above = 0
    for v in range(k, -1, -1):
        concordant += hist_neg[v] * pos_above
        pos_above += hist_pos[v]
    return concordant / (n_neg * n_pos)


def neighbor_sets_brute(X, features, queries, k) -> np.ndarray:
    """k nearest neighbours per query row under the Euclidean metric
    restricted to ``features``, self excluded, ties broken by index.
    Returned as a sorted (m, k) index array."""
    y = np.zeros(X.shape[0], dtype=np.int64)
    feats = np.asarray(features, dtype=np.int64)
    qs = np.asarray(queries, dtype=np.int64)
    out = np.empty((len(qs), k), dtype=np.int64)
    sub = np.ascontiguousarray(X[:, feats])
    for row, i in enumerate(qs):
        d = ((sub - sub[i]) ** 2).sum(axis=1)
        d[i] = np.inf
        order = np.argsort(d, kind="stable")
        out[row] = np.sort(order[:k])
    return out


def neighbor_sets_kdtree(X, features, queries, k) -> np.ndarray:
    """Same neighbour sets via a KD-tree spatial index."""
    feats = np.asarray(features, dtype=np.int64)
    qs = np.asarray(queries, dtype=np.int64)
    sub = np.ascontiguousarray(X[:, feats])
    tree = cKDTree(sub)
    _, idx = tree.query(sub[qs], k=k + 1)
    idx = np.atleast_2d(idx)
    out = np.empty((len(qs), k), dtype=np.int64)
    for row, i in enumerate(qs):
        kept = [j for j in idx[row] if j != i][:k]
        out[row] = np.sort(np.asarray(kept, dtype=np.int64))
    return out


def knn_scores(data: Dataset, features, queries, k: int, index: str = "auto") -> np.ndarray:
    """Positive-neighbour counts s_F(x) for each query example."""
    feats = np.asarray(features, dtype=np.int64)
    qs = np.asarray(queries, dtype=np.int64)
    if index == "auto":
        # Brute force wins at desk scale; the spatial index pays off for
        # larger n at moderate dimension.
        index = "kdtree" if data.n > 1024 and len(feats) <= 12 else "brute"
    if index == "brute":
        return _knn_scores_brute(data.X, data.y, feats, qs, k)
    if index == "kdtree":
        sets = neighbor_sets_kdtree(data.X, feats, qs, k)
        return data.y[sets].sum(axis=1)
    raise ValueError(f"unknown index mode {index!r}")


def knn_auc(features, m: int, data: Dataset, k: int, rng=None, index: str = "auto") -> float:
    """Strict pair-count AUC of a k-NN score over a size-``m`` uniform
    subsample of the dataset (the whole dataset when m >= n).

    The subsample is redrawn (up to 10 times, then drawn stratified) until
    both classes are present, since the AUC denominator must be nonzero.
    """
    feats = tuple(features)
    if not feats:
        raise ValueError("feature set must be nonempty")
    if k >= data.n:
        raise ValueError(f"k={k} must be smaller than n={data.n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if m >= data.n:
        queries = np.arange(data.n, dtype=np.int64)
    else:
        if rng is None:
            raise ValueError("rng required when subsampling")
        queries = None
        for _ in range(10):
            cand = rng.choice(data.n, size=m, replace=False)
            labels = data.y[cand]
            if labels.min() != labels.max():
                queries = np.asarray(cand, dtype=np.int64)
                break
        if queries is None:
            pos = np.flatnonzero(data.y == 1)
            neg = np.flatnonzero(data.y == 0)
            n_pos = min(max(1, round(m * len(pos) / data.n)), m - 1)
            take_pos = rng.choice(pos, size=n_pos, replace=False)
            take_neg = rng.choice(neg, size=m - n_pos, replace=False)
            queries = np.sort(np.concatenate([take_pos, take_neg])).astype(np.int64)
    scores = knn_scores(data, feats, queries, k, index=index)
    value = _auc_strict(scores, data.y[queries], k)
    if value < 0:
        raise ValueError("subsample ended up single-class; cannot score")
    return float(value)


# ---------------------------------------------------------------------------
# feature-selection oracles
# ---------------------------------------------------------------------------


def intermediate_rollout(features, q: float, n_features: int, rng) -> frozenset:
    """Complete a feature set by uniform random continuation.

    Each round stops with probability 1 - q^{|F|} (so the empty set never
    stops immediately) and otherwise adds one unused feature uniformly at
    random; exhausting the features also stops.  Returns the terminal set,
    stopping feature included.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    current = set(features)
    while True:
        if rng.random() < 1.0 - q ** len(current):
            return frozenset(current) | {STOP}
        unused = [f for f in range(n_features) if f not in current]
        if not unused:
            return frozenset(current) | {STOP}
        current.add(unused[int(rng.integers(len(unused)))])


def make_fs_oracles(
    data: Dataset,
    m: int = 50,
    k: int = 5,
    q: float = 0.9,
    index: str = "auto",
) -> OracleSpec:
    """Feature-selection oracle pair over a dataset.

    Terminal: AUC of the node's feature set on the full dataset --
    deterministic, cached, interval collapses to a point after one call.
    The stop-only leaf (empty feature set) scores 0: constant scores have no
    concordant pairs under the strict AUC.

    Intermediate: one random completion of the node's set, scored on a
    size-``m`` subsample; the leaf's running sample mean estimates the
    rollout average.
    """
    cache: dict[tuple[int, ...], float] = {}

    def terminal(key, rng):
        features, stop = key
        if not stop:
            raise ValueError("terminal oracle called on a non-terminal node")
        evaluated = frozenset(features) | {STOP}
        if not features:
            return 0.0, evaluated
        value = cache.get(features)
        if value is None:
            value = knn_auc(features, data.n, data, k, rng, index=index)
            cache[features] = value
        return value, evaluated

    def intermediate(key, rng):
        features, stop = key
        if stop:
            raise ValueError("intermediate oracle called on a terminal leaf")
        fstar = intermediate_rollout(features, q, data.n_features, rng)
        feats = tuple(sorted(fstar - {STOP}))
        if not feats:
            return 0.0, fstar
        return knn_auc(feats, m, data, k, rng, index=index), fstar

    return OracleSpec(terminal=terminal, intermediate=intermediate, deterministic_terminal=True)
