"""Best-leaf identification by solving best-arm problems stagewise.

The frontier walks from the root toward a terminal leaf: at each iteration
the selector descends through every node whose best-arm problem is already
solved (following its recommendation) and the sampling effort goes to the
first unsolved node.  Statistics are never reset between stages; only the
expansion clock is per-frontier, so the DAG keeps growing under whichever
best-arm problem is currently being worked on.

Solved stages are re-derived from the current bounds on every iteration: if
later samples re-open an upstream stage, the descent simply halts there
again.  The run ends when the frontier itself is a terminal leaf.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .bai import bai_add, bai_pair, bai_reco, bai_stop, expand_due, sample_leaf, uniform_scorer
from .dag import SearchDag
from .feature_space import STOP, FeatureLattice, RaveTable, make_rave_scorer, rave_record, rave_score

__all__ = [
    "BliParams",
    "BliReport",
    "bli_select",
    "bli_stop",
    "init_stage",
    "run_bli",
]


@dataclass(frozen=True)
class BliParams:
    """Run parameters for best-leaf identification.

    ``init_width``: when a stage solves and the frontier advances, the DAG
    below the new frontier is pre-initialized at depth 2 with this many
    top-RAVE features (stopping feature included via its infinite score).
    Zero disables the heuristic.
    """

    epsilon: float
    delta: float
    b: float
    max_steps: int = 100_000_000
    seed: int = 0
    init_width: int = 7

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.max_steps <= 0 or self.init_width < 0:
            raise ValueError("max_steps must be positive and init_width >= 0")


@dataclass
class BliReport:
    """Outcome of one best-leaf identification run."""

    recommended: object
    recommended_id: int
    value_estimate: float
    n_features: int
    samples: int
    node_updates: int
    node_updates_naive: int
    expansions: int
    stage_inits: int
    leaf_count_final: int
    explored_leaves: int
    stopped: bool
    wall_time: float
    seed: int
    per_stage_samples: dict = field(default_factory=dict)


def bli_stop(dag: SearchDag, node: int) -> bool:
    """True iff the node is a terminal leaf of the full domain."""
    return dag.terminal[node]


def _select_chain(dag: SearchDag, node: int, epsilon: float) -> list[int]:
    """Recommendation chain from ``node`` down to the first unsolved stage
    (or a terminal leaf), inclusive on both ends."""
    chain = [node]
    while True:
        if dag.terminal[node] or not dag.children[node]:
            return chain
        if not bai_stop(dag, node, epsilon):
            return chain
        node = bai_reco(dag, node)
        chain.append(node)


def bli_select(dag: SearchDag, node: int, epsilon: float) -> int:
    """Descend through solved stages via their recommendations; return the
    first node whose best-arm problem is open, or a terminal leaf."""
    return _select_chain(dag, node, epsilon)[-1]


def _count_features(key) -> int:
    features = key[0] if isinstance(key, tuple) and len(key) == 2 else key
    return len([f for f in features if f != STOP])


def init_stage(
    dag: SearchDag,
    domain: FeatureLattice,
    node: int,
    rave: RaveTable,
    width: int,
) -> list[int]:
    """Materialize the depth-2 neighbourhood of a fresh frontier node from
    its top-RAVE features.  Returns the inserted node ids."""
    key = dag.keys[node]
    features = frozenset(key[0])
    ranked = sorted(
        [STOP] + [f for f in domain.unused_features(key)],
        key=lambda f: (-rave_score(rave, features, f), f),
    )
    chosen = ranked[:width]
    inserted: list[int] = []
    depth_one: list[tuple[int, object]] = []
    for f in chosen:
        child = domain.child_for_feature(key, f)
        if child not in dag:
            inserted.append(dag.insert_node(child))
        if f != STOP:
            depth_one.append((f, child))
    for f, child in depth_one:
        for g in chosen:
            if g == f or (g != STOP and g < f):
                continue
            grandchild = domain.child_for_feature(child, g)
            if grandchild not in dag:
                inserted.append(dag.insert_node(grandchild))
    return inserted


def run_bli(
    dag: SearchDag,
    domain,
    oracles,
    params: BliParams,
    rave: RaveTable | None = None,
    scorer=None,
    rng=None,
    instrument=None,
) -> BliReport:
    """Identify the best terminal leaf reachable from the root.

    Per iteration: expand under the current frontier when its own clock
    fires, re-derive the frontier from the root, pre-initialize a freshly
    advanced frontier from RAVE evidence, then sample the representative
    leaf of the frontier's best-arm pick and propagate.  With a ``rave``
    table given, every evaluation endpoint is folded into the global and
    local feature estimates.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if scorer is None:
        scorer = make_rave_scorer(rave) if rave is not None else uniform_scorer
    if dag.beta.delta != params.delta:
        raise ValueError("dag exploration delta differs from params.delta")
    fs_domain = isinstance(domain, FeatureLattice)
    use_init = rave is not None and fs_domain and params.init_width > 0
    open_sets: list[frozenset[int]] = []
    if rave is not None and fs_domain:
        open_sets = [frozenset(k[0]) for k in dag.keys if not k[1]]
    start = time.perf_counter()
    t = 0
    expansions = 0
    stage_inits = 0
    stage_clock: dict[int, int] = {}
    initialized: set[int] = set()
    s_n = dag.root
    stopped = False

    def note_inserted(node: int) -> None:
        if rave is not None and fs_domain and not dag.keys[node][1]:
            open_sets.append(frozenset(dag.keys[node][0]))

    def advance_frontier() -> list[int]:
        """Walk solved stages from the root; a recommended child the walk
        first descends into gets its depth-2 RAVE neighbourhood materialized
        before its own stopping test runs, so a stage never looks trivially
        solved just because only its terminal child exists yet.  The
        insertion leaves the parent's test unchanged: sentinel children
        inflate the leader's upper bound, which the stopping rule never
        reads, and cannot raise its max-over-children lower bound."""
        nonlocal stage_inits
        node = dag.root
        chain = [node]
        while True:
            if dag.terminal[node] or not dag.children[node]:
                return chain
            if not bai_stop(dag, node, params.epsilon):
                return chain
            node = bai_reco(dag, node)
            chain.append(node)
            if use_init and not dag.terminal[node] and node not in initialized:
                initialized.add(node)
                inserted = init_stage(dag, domain, node, rave, params.init_width)
                if inserted:
                    stage_inits += len(inserted)
                    for i in inserted:
                        note_inserted(i)
                    if dag.beta.needs_leaf_count:
                        dag.refresh_bounds()

    while True:
        if dag.terminal[s_n]:
            stopped = True
            break
        if t >= params.max_steps:
            break
        if params.b > 0.0 and expand_due(stage_clock.get(s_n, 0), params.b):
            new = bai_add(dag, domain, s_n, scorer, rng)
            if new is not None:
                expansions += 1
                note_inserted(new)
                if dag.beta.needs_leaf_count:
                    dag.refresh_bounds()
        chain = advance_frontier()
        s_n = chain[-1]
        if dag.terminal[s_n] or not dag.children[s_n]:
            r = s_n
        else:
            b_t, c_t = bai_pair(dag, s_n)
            if c_t is None:
                r = b_t
            else:
                width_b = dag.upper[b_t] - dag.lower[b_t]
                width_c = dag.upper[c_t] - dag.lower[c_t]
                if width_b > width_c:
                    r = b_t
                elif width_c > width_b:
                    r = c_t
                else:
                    r = min(b_t, c_t)
        path = dag.descend(r)
        dag.bump_visits(chain + path if path[0] != chain[-1] else chain + path[1:])
        value, evaluated = sample_leaf(dag, domain, oracles, path[-1], rng)
        if rave is not None and fs_domain and evaluated is not None:
            rave_record(rave, frozenset(evaluated), value, open_sets)
        t += 1
        dag.t = t
        stage_clock[s_n] = stage_clock.get(s_n, 0) + 1
        if instrument is not None:
            instrument(dag, t, s_n)
    key = dag.keys[s_n]
    n_samples = dag.n[s_n]
    return BliReport(
        recommended=key,
        recommended_id=s_n,
        value_estimate=dag.total[s_n] / n_samples if n_samples else math.nan,
        n_features=_count_features(key),
        samples=t,
        node_updates=dag.update_count_early,
        node_updates_naive=dag.update_count_naive,
        expansions=expansions,
        stage_inits=stage_inits,
        leaf_count_final=dag.n_leaves(),
        explored_leaves=dag.explored_leaf_count,
        stopped=stopped,
        wall_time=time.perf_counter() - start,
        seed=params.seed,
        per_stage_samples={dag.keys[k]: v for k, v in stage_clock.items()},
    )
