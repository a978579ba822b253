"""Search domains over feature subsets, plus RAVE scoring.

A domain describes the *full* graph the search may explore: child/parent
relations, terminal leaves and node depth, all computed on demand from a
node's key (nothing is materialized eagerly).  Three variants:

* ``FeatureLattice`` -- the feature-selection space.  Keys are
  ``(features, stop)`` pairs; every subset has one extra child obtained by
  selecting the virtual stopping feature, which is a terminal leaf.
* ``FixedDepthLattice`` -- subsets up to a fixed size; the leaves are exactly
  the subsets of that size.  Transpositions are merged (DAG mode).
* ``FixedDepthTree`` -- same game but keyed by the ordered move sequence, so
  transposed positions stay distinct (tree mode).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "STOP",
    "FeatureLattice",
    "FixedDepthLattice",
    "FixedDepthTree",
    "FuseReport",
    "RaveTable",
    "enumerate_nodes",
    "fuse_run",
    "make_rave_scorer",
    "rave_record",
    "rave_score",
]

# Virtual stopping feature: not a real column index.
STOP = -1

FsKey = tuple[tuple[int, ...], bool]
SetKey = tuple[int, ...]


def _fmt_features(features: tuple[int, ...]) -> str:
    return ",".join(f"f{i + 1}" for i in features)


class FeatureLattice:
    """Powerset lattice over ``n_features`` with a stopping feature.

    Keys are ``(features, stop)`` where ``features`` is a sorted tuple of
    column indices.  ``(F, True)`` is the terminal leaf reached from
    ``(F, False)`` by selecting the stopping feature; it has no children and
    exactly one parent.  The full graph has ``2 ** (n + 1)`` nodes.
    """

    def __init__(self, n_features: int):
        if n_features < 1:
            raise ValueError("need at least one feature")
        self.n_features = n_features

    def root(self) -> FsKey:
        return ((), False)

    def is_terminal(self, key: FsKey) -> bool:
        return key[1]

    def depth(self, key: FsKey) -> int:
        features, stop = key
        return len(features) + (1 if stop else 0)

    def transposition_key(self, key: FsKey) -> FsKey:
        return key

    def children(self, key: FsKey) -> list[FsKey]:
        features, stop = key
        if stop:
            return []
        out: list[FsKey] = []
        for f in range(self.n_features):
            if f not in features:
                out.append((tuple(sorted(features + (f,))), False))
        out.append((features, True))
        return out

    def parents(self, key: FsKey) -> list[FsKey]:
        features, stop = key
        if stop:
            return [(features, False)]
        return [
            (tuple(x for x in features if x != f), False) for f in features
        ]

    def child_for_feature(self, key: FsKey, f: int) -> FsKey:
        """Child of ``key`` reached by selecting feature ``f`` (or STOP)."""
        features, stop = key
        if stop:
            raise ValueError("terminal leaves have no children")
        if f == STOP:
            return (features, True)
        if f in features:
            raise ValueError(f"feature {f} already selected")
        return (tuple(sorted(features + (f,))), False)

    def unused_features(self, key: FsKey) -> list[int]:
        features, _ = key
        return [f for f in range(self.n_features) if f not in features]

    def key_str(self, key: FsKey) -> str:
        features, stop = key
        body = _fmt_features(features)
        if stop:
            body = body + "|stop" if body else "stop"
        return "{" + body + "}"


class FixedDepthLattice:
    """Subset lattice truncated at depth ``d_l``; leaves are the size-``d_l``
    subsets.  With 6 features and depth 3 this has C(6,3) = 20 leaves."""

    def __init__(self, n_features: int, d_l: int):
        if not 1 <= d_l <= n_features:
            raise ValueError("need 1 <= d_l <= n_features")
        self.n_features = n_features
        self.d_l = d_l

    def root(self) -> SetKey:
        return ()

    def is_terminal(self, key: SetKey) -> bool:
        return len(key) == self.d_l

    def depth(self, key: SetKey) -> int:
        return len(key)

    def transposition_key(self, key: SetKey) -> SetKey:
        return key

    def children(self, key: SetKey) -> list[SetKey]:
        if len(key) >= self.d_l:
            return []
        return [
            tuple(sorted(key + (f,)))
            for f in range(self.n_features)
            if f not in key
        ]

    def parents(self, key: SetKey) -> list[SetKey]:
        return [tuple(x for x in key if x != f) for f in key]

    def key_str(self, key: SetKey) -> str:
        return "{" + _fmt_features(key) + "}"

    def n_leaves(self) -> int:
        return math.comb(self.n_features, self.d_l)


class FixedDepthTree:
    """Move-sequence tree of the same game: transpositions are not merged.

    Keys are ordered tuples of distinct moves, so ``(1, 2)`` and ``(2, 1)``
    are different nodes.  With 6 features and depth 3 this has
    6!/(6-3)! = 120 leaves.
    """

    def __init__(self, n_features: int, d_l: int):
        if not 1 <= d_l <= n_features:
            raise ValueError("need 1 <= d_l <= n_features")
        self.n_features = n_features
        self.d_l = d_l

    def root(self) -> SetKey:
        return ()

    def is_terminal(self, key: SetKey) -> bool:
        return len(key) == self.d_l

    def depth(self, key: SetKey) -> int:
        return len(key)

    def transposition_key(self, key: SetKey) -> SetKey:
        """The denoted position: move order is forgotten.

        Tree nodes stay distinct (no statistics sharing), but rules that ask
        whether two representative leaves are "the same leaf" compare the
        position they denote, which is what makes the redundant-tree
        benchmark's stopping rule behave like its DAG counterpart.
        """
        return tuple(sorted(key))

    def children(self, key: SetKey) -> list[SetKey]:
        if len(key) >= self.d_l:
            return []
        return [key + (f,) for f in range(self.n_features) if f not in key]

    def parents(self, key: SetKey) -> list[SetKey]:
        if not key:
            return []
        return [key[:-1]]

    def key_str(self, key: SetKey) -> str:
        return ">".join(f"f{i + 1}" for i in key) if key else "{}"

    def n_leaves(self) -> int:
        n, d = self.n_features, self.d_l
        return math.factorial(n) // math.factorial(n - d)


def enumerate_nodes(domain) -> list:
    """All reachable keys of a finite domain, sorted by (depth, key).

    This is the canonical materialization order for fixed-DAG benchmarks:
    inserting in this order gives every node all its parents up front, and
    node ids agree across engine implementations.
    """
    seen = {domain.root()}
    frontier = [domain.root()]
    while frontier:
        nxt = []
        for key in frontier:
            for child in domain.children(key):
                if child not in seen:
                    seen.add(child)
                    nxt.append(child)
        frontier = nxt
    return sorted(seen, key=lambda k: (domain.depth(k), k))


# ---------------------------------------------------------------------------
# RAVE
# ---------------------------------------------------------------------------


@dataclass
class RaveTable:
    """Global and per-node rapid value estimates for features.

    g-RAVE_f averages the value of every evaluated set containing f.
    l-RAVE_{F,f} averages the value of evaluated supersets of F that also
    contain f; it is tracked only for (F, f) pairs with F materialized in the
    search DAG (tracking all 2^n subsets is infeasible).  The blend weight
    beta = c_l / (c_l + t_{F,f}) hands over from the global to the local
    estimate as local evidence accumulates.
    """

    c_l: float = 100.0
    neutral: float = 0.5
    g_sum: dict[int, float] = field(default_factory=dict)
    g_cnt: dict[int, int] = field(default_factory=dict)
    l_sum: dict[tuple[frozenset[int], int], float] = field(default_factory=dict)
    l_cnt: dict[tuple[frozenset[int], int], int] = field(default_factory=dict)

    def g_rave(self, f: int) -> float:
        cnt = self.g_cnt.get(f, 0)
        if cnt == 0:
            return self.neutral
        return self.g_sum[f] / cnt

    def l_count(self, features: frozenset[int], f: int) -> int:
        return self.l_cnt.get((features, f), 0)


def rave_record(
    table: RaveTable,
    evaluated: frozenset[int],
    value: float,
    open_sets: list[frozenset[int]],
) -> None:
    """Fold one evaluation of the feature set ``evaluated`` into the table.

    ``open_sets`` lists the (stop-free) feature sets materialized in the
    search DAG; local estimates are updated for every tracked strict subset
    of the evaluated set.  The stopping feature is excluded: its score is an
    infinity sentinel and never read from the accumulators.
    """
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"value must lie in [0, 1], got {value}")
    feats = evaluated - {STOP}
    for f in feats:
        table.g_sum[f] = table.g_sum.get(f, 0.0) + value
        table.g_cnt[f] = table.g_cnt.get(f, 0) + 1
    for subset in open_sets:
        if len(subset) >= len(feats) or not subset < feats:
            continue
        for f in feats - subset:
            key = (subset, f)
            table.l_sum[key] = table.l_sum.get(key, 0.0) + value
            table.l_cnt[key] = table.l_cnt.get(key, 0) + 1


def make_rave_scorer(table: RaveTable):
    """New-node chooser for ``bai_add`` over a feature lattice: pick the
    missing child whose added feature maximizes the RAVE score (the stopping
    feature first, then best global/local evidence; feature index breaks
    ties)."""

    def scorer(dag, domain, parent_key, candidates, rng):
        features = frozenset(parent_key[0])

        def added_feature(cand) -> int:
            if cand[1]:
                return STOP
            return next(iter(set(cand[0]) - features))

        return min(
            candidates,
            key=lambda cand: (
                -rave_score(table, features, added_feature(cand)),
                added_feature(cand),
            ),
        )

    return scorer


def rave_score(table: RaveTable, features: frozenset[int], f: int) -> float:
    """Blended RAVE score of adding feature ``f`` to the set ``features``.

    The stopping feature scores +inf so the terminal child is always the
    first to be expanded.  With no local evidence the blend weight is 1 and
    the score equals g-RAVE; with neither local nor global evidence it falls
    back to a neutral 0.5 so unexplored features are neither favored nor
    buried.
    """
    if f == STOP:
        return math.inf
    if f in features:
        raise ValueError(f"feature {f} already in the set")
    t_lf = table.l_cnt.get((features, f), 0)
    beta = table.c_l / (table.c_l + t_lf)
    g = table.g_rave(f)
    if t_lf == 0:
        return g
    l = table.l_sum[(features, f)] / t_lf
    return (1.0 - beta) * l + beta * g


# ---------------------------------------------------------------------------
# FUSE baseline
# ---------------------------------------------------------------------------


@dataclass
class FuseReport:
    """Outcome of one FUSE run (reference implementation, not bit-faithful:
    the original is specified only by citation)."""

    recommended: object
    recommended_id: int
    value_estimate: float
    n_features: int
    samples: int
    stopped: bool
    wall_time: float
    seed: int


def fuse_run(
    domain: FeatureLattice,
    oracles,
    budget: int,
    b: float = 0.3,
    c_ucb: float = math.sqrt(2.0),
    c_l: float = 100.0,
    seed: int = 0,
    rave: RaveTable | None = None,
) -> FuseReport:
    """UCT-style feature-subset search from the empty set.

    Each iteration descends from the root: the arm pool at a node grows on
    the discrete progressive-widening schedule (floor(t^b) arms, new arms
    chosen by RAVE score, the stopping arm first), UCB1 picks within the
    pool, and the descent's endpoint (a terminal leaf or a freshly added
    node) is scored by the matching oracle.  The reward backpropagates along
    the traversed path only (update-descent).  The recommendation follows
    the highest average reward at each stage; if it ends on a non-terminal
    node the stopping arm is appended.
    """
    rng = np.random.default_rng(seed)
    if rave is None:
        rave = RaveTable(c_l=c_l)
    root = domain.root()
    count: dict = {root: 0}
    total: dict = {root: 0.0}
    pool: dict = {root: []}
    open_sets: list[frozenset[int]] = [frozenset()]
    start = time.perf_counter()
    for _ in range(max(0, budget)):
        node = root
        path = [root]
        while not domain.is_terminal(node):
            arms = pool.setdefault(node, [])
            visits = count[node]
            want = max(1, math.floor((visits + 1.0) ** b))
            fresh = None
            if len(arms) < want:
                features = frozenset(node[0])
                missing = [
                    f
                    for f in [STOP] + domain.unused_features(node)
                    if domain.child_for_feature(node, f) not in count
                ]
                if missing:
                    f_new = min(
                        missing, key=lambda f: (-rave_score(rave, features, f), f)
                    )
                    fresh = domain.child_for_feature(node, f_new)
                    arms.append(fresh)
                    count[fresh] = 0
                    total[fresh] = 0.0
                    if not fresh[1]:
                        open_sets.append(frozenset(fresh[0]))
            if fresh is not None:
                node = fresh
                path.append(node)
                break
            node = max(
                arms,
                key=lambda c: total[c] / count[c]
                + c_ucb * math.sqrt(math.log(max(visits, 1)) / count[c]),
            )
            path.append(node)
        if domain.is_terminal(node):
            value, evaluated = oracles.terminal(node, rng)
        else:
            value, evaluated = oracles.intermediate(node, rng)
        for s in path:
            count[s] += 1
            total[s] += value
        rave_record(rave, frozenset(evaluated), value, open_sets)
    node = root
    while not domain.is_terminal(node):
        kids = [c for c in pool.get(node, []) if count[c] > 0]
        if not kids:
            node = domain.child_for_feature(node, STOP)
            break
        node = max(kids, key=lambda c: total[c] / count[c])
    value, _ = oracles.terminal(node, rng)
    return FuseReport(
        recommended=node,
        recommended_id=-1,
        value_estimate=value,
        n_features=len(node[0]),
        samples=max(0, budget),
        stopped=True,
        wall_time=time.perf_counter() - start,
        seed=seed,
    )

