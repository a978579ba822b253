"""LUCB-style best-arm identification over an expanding search DAG.

Five rules drive the loop: a sampling rule (pick the wider-interval node
among the lower-bound leader and its optimistic challenger), a stopping rule
(challenger's upper bound within epsilon of the leader's lower bound), a
recommendation rule (the leader), an expansion schedule (one new node
whenever floor(t^b) increments) and an addition rule (expand the node with
the highest visits-per-child index, biased toward shallow nodes).

The challenger is restricted to arms whose representative leaf differs from
the leader's: in a DAG several arms can share one representative leaf, in
which case sampling it informs all of them at once and they cannot be each
other's challenger.  If every arm shares the leader's representative leaf the
problem is trivial and the loop stops.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dag import SearchDag, StructuralError

__all__ = [
    "BaiParams",
    "BaiReport",
    "bai_add",
    "bai_pair",
    "bai_reco",
    "bai_select",
    "bai_stop",
    "bar_set",
    "expand_due",
    "floor_pow",
    "initial_dag",
    "run_bai",
    "sample_leaf",
    "uniform_scorer",
]


@dataclass(frozen=True)
class BaiParams:
    """Run parameters for best-arm identification.

    b = 0 disables expansion entirely (fixed-DAG search); the theory is
    stated for b in (0, 1] but the fixed-DAG benchmarks need b = 0.
    """

    epsilon: float
    delta: float
    b: float
    max_steps: int = 100_000_000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class BaiReport:
    """Outcome of one best-arm identification run."""

    recommended: object
    recommended_id: int
    samples: int
    node_updates: int
    node_updates_naive: int
    expansions: int
    leaf_count_final: int
    explored_leaves: int
    stopped: bool
    wall_time: float
    seed: int
    trivial_stop: bool = False


# ---------------------------------------------------------------------------
# selection / stopping / recommendation rules
# ---------------------------------------------------------------------------


def bar_set(dag: SearchDag, node: int, a: int) -> list[int]:
    """Children of ``node`` whose representative leaf differs from ``a``'s.

    "Differs" compares the position the leaf denotes (its transposition
    identity): in DAG-mode domains that is plain node identity, while in the
    redundant-tree benchmark two distinct leaf nodes can denote the same
    position, and arms whose representatives do so cannot challenge each
    other.
    """
    rep_a = dag.trans[dag.representative_leaf(a)]
    return [
        s for s in dag.children[node] if dag.trans[dag.representative_leaf(s)] != rep_a
    ]


def bai_pair(dag: SearchDag, node: int) -> tuple[int, int | None]:
    """(leader, challenger) at ``node``: argmax-L child and the max-U child
    among those whose representative leaf denotes a different position
    (None if there is no such child).  Ties break to the lowest node id."""
    kids = dag.children[node]
    if not kids:
        raise StructuralError(f"node {node} has no children")
    b = kids[0]
    best_l = dag.lower[b]
    for s in kids[1:]:
        if dag.lower[s] > best_l:
            b = s
            best_l = dag.lower[s]
    rep_b = dag.trans[dag.representative_leaf(b)]
    c = None
    best_u = -math.inf
    for s in kids:
        if dag.upper[s] > best_u and dag.trans[dag.representative_leaf(s)] != rep_b:
            c = s
            best_u = dag.upper[s]
    return b, c


def bai_select(dag: SearchDag, node: int) -> tuple[int, int, int]:
    """(b_t, c_t, R): leader, challenger, and the wider-interval of the two.

    Callers must rule out the trivial case (no challenger) via ``bai_stop``
    first.
    """
    b, c = bai_pair(dag, node)
    if c is None:
        raise StructuralError(
            "all children share one representative leaf; trivial problem"
        )
    width_b = dag.upper[b] - dag.lower[b]
    width_c = dag.upper[c] - dag.lower[c]
    if width_b > width_c:
        r = b
    elif width_c > width_b:
        r = c
    else:
        r = min(b, c)
    return b, c, r


def bai_stop(dag: SearchDag, node: int, epsilon: float) -> bool:
    """True when the challenger's U is within epsilon of the leader's L, or
    when every child shares the leader's representative leaf (any child is
    then best; the problem is trivial)."""
    b, c = bai_pair(dag, node)
    if c is None:
        return True
    return dag.upper[c] - dag.lower[b] < epsilon


def bai_reco(dag: SearchDag, node: int) -> int:
    """Current recommendation: the argmax-L child (lowest id on ties)."""
    b, _ = bai_pair(dag, node)
    return b


# ---------------------------------------------------------------------------
# expansion schedule and addition rule
# ---------------------------------------------------------------------------


def floor_pow(t: int, b: float) -> int:
    return math.floor(math.pow(t, b))


def expand_due(t: int, b: float) -> bool:
    """True iff floor((t+1)^b) - floor(t^b) = 1, so the number of expansions
    through step t is exactly floor(t^b).  Always False for b = 0."""
    return floor_pow(t + 1, b) - floor_pow(t, b) == 1


def uniform_scorer(dag, domain, parent_key, candidates, rng) -> object:
    """Pick the new child uniformly at random."""
    return candidates[int(rng.integers(len(candidates)))]


def expansion_index(dag: SearchDag, node: int) -> float:
    """Index I_s = T_s / (|C(s)| + 1) * 1/max(d(s), 1).

    The +1 keeps freshly added leaves (no children yet) at a finite index;
    the depth factor keeps the explored DAG balanced.  The root would divide
    by depth 0, so it uses factor 1.
    """
    d = max(dag.depth[node], 1)
    return dag.visits[node] / (len(dag.children[node]) + 1) / d


def bai_add(dag: SearchDag, domain, subroot: int, scorer, rng) -> int | None:
    """Materialize one new node under ``subroot``.

    Picks the expandable node (one with domain children not yet present)
    maximizing the expansion index, then one of its missing children via
    ``scorer``.  Returns the new node id, or None when nothing under
    ``subroot`` is expandable (the search simply continues).
    """
    stack = [subroot]
    seen = {subroot}
    while stack:
        s = stack.pop()
        for c in dag.children[s]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    best = None
    best_index = -math.inf
    best_candidates = None
    for s in sorted(seen):
        candidates = [k for k in domain.children(dag.keys[s]) if k not in dag]
        if candidates:
            idx = expansion_index(dag, s)
            if idx > best_index:
                best = s
                best_index = idx
                best_candidates = candidates
    if best is None:
        return None
    key = scorer(dag, domain, dag.keys[best], best_candidates, rng)
    return dag.insert_node(key)


# ---------------------------------------------------------------------------
# the main loop
# ---------------------------------------------------------------------------


def initial_dag(domain, beta, depth_one: bool = True) -> SearchDag:
    """Root-only DAG, optionally with all depth-one children materialized."""
    dag = SearchDag(domain, beta)
    if depth_one:
        for key in domain.children(domain.root()):
            dag.insert_node(key)
    return dag


def full_dag(domain, beta) -> SearchDag:
    """Materialize an entire finite domain (for fixed-DAG benchmarks)."""
    from .feature_space import enumerate_nodes

    dag = SearchDag(domain, beta)
    for key in enumerate_nodes(domain)[1:]:
        dag.insert_node(key)
    return dag


def sample_leaf(dag: SearchDag, domain, oracles, leaf: int, rng):
    """Query the right oracle for a temporary leaf and fold the sample in.

    Terminal leaves use the terminal oracle (collapsing their interval to a
    point when it is deterministic); other temporary leaves use the
    intermediate oracle.  Returns (value, evaluated_key).
    """
    key = dag.keys[leaf]
    if dag.terminal[leaf]:
        value, evaluated = oracles.terminal(key, rng)
        dag.record_sample(leaf, value, point_mass=oracles.deterministic_terminal)
    else:
        value, evaluated = oracles.intermediate(key, rng)
        dag.record_sample(leaf, value)
    return value, evaluated


def run_bai(
    dag: SearchDag,
    domain,
    oracles,
    params: BaiParams,
    scorer=None,
    rng=None,
    instrument=None,
) -> BaiReport:
    """Run LUCB best-arm identification at the root of ``dag``.

    Per iteration: check the stopping rule, expand if the schedule fires
    (then re-derive the leader/challenger on the grown DAG), sample the
    representative leaf of the wider-interval pick, and propagate bounds to
    every ancestor.  ``instrument``, if given, is called as
    ``instrument(dag, t)`` after every step.
    """
    if scorer is None:
        scorer = uniform_scorer
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if dag.beta.delta != params.delta:
        raise ValueError("dag exploration delta differs from params.delta")
    dag.beta.warn_if_delta_large(dag.n_leaves())
    start = time.perf_counter()
    t = 0
    expansions = 0
    stopped = False
    trivial = False
    while True:
        b_t, c_t = bai_pair(dag, dag.root)
        if c_t is None:
            stopped = True
            trivial = True
            break
        if dag.upper[c_t] - dag.lower[b_t] < params.epsilon:
            stopped = True
            break
        if t >= params.max_steps:
            break
        if params.b > 0.0 and expand_due(t, params.b):
            new = bai_add(dag, domain, dag.root, scorer, rng)
            if new is not None:
                expansions += 1
                if dag.beta.needs_leaf_count:
                    dag.refresh_bounds()
                b_t, c_t = bai_pair(dag, dag.root)
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
        path.insert(0, dag.root)
        dag.bump_visits(path)
        sample_leaf(dag, domain, oracles, path[-1], rng)
        t += 1
        dag.t = t
        if instrument is not None:
            instrument(dag, t)
    reco = bai_reco(dag, dag.root)
    return BaiReport(
        recommended=dag.keys[reco],
        recommended_id=reco,
        samples=t,
        node_updates=dag.update_count_early,
        node_updates_naive=dag.update_count_naive,
        expansions=expansions,
        leaf_count_final=dag.n_leaves(),
        explored_leaves=dag.explored_leaf_count,
        stopped=stopped,
        wall_time=time.perf_counter() - start,
        seed=params.seed,
        trivial_stop=trivial,
    )
