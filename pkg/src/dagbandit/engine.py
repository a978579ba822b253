"""Array-based accelerated runner for enumerable benchmark domains.

The pure-Python ``SearchDag`` + ``run_bai`` pair is the reference
implementation; this module reimplements the same loop over flat arrays with
numba for the benchmark configurations that need millions of leaf
evaluations (fixed lattice/tree comparisons, flat-domain expansion sweeps,
multi-armed instances).  Equivalence against the reference is covered by
tests: exactly for fixed-DAG runs with deterministic oracles, statistically
for stochastic ones.

Leaves draw Bernoulli samples with a per-node mean; that covers every
enumerable benchmark here (values of temporary and terminal leaves alike).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bai import BaiReport
from .feature_space import enumerate_nodes

__all__ = [
    "BETA_PRACTICAL",
    "BETA_THEORY",
    "EnumeratedDomain",
    "SAMPLE_BOTH",
    "SAMPLE_WIDEST",
    "build_enumerated",
    "kernel_run_bai",
]

BETA_THEORY = 0
BETA_PRACTICAL = 1

SAMPLE_WIDEST = 0  # sample the wider-interval pick among (leader, challenger)
SAMPLE_BOTH = 1  # sample both representative leaves every round


@dataclass
class EnumeratedDomain:
    """A finite domain flattened to CSR adjacency plus per-node metadata."""

    keys: list
    child_ptr: np.ndarray
    child_idx: np.ndarray
    child_eid: np.ndarray
    par_ptr: np.ndarray
    par_idx: np.ndarray
    par_eid: np.ndarray
    depth: np.ndarray
    trans: np.ndarray
    mu: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.keys)

    @property
    def n_edges(self) -> int:
        return len(self.child_idx)

    def n_init_depth_one(self) -> int:
        """Node count of the root plus its depth-one children."""
        return 1 + int(np.sum(self.depth == 1))


def build_enumerated(domain, mu_fn) -> EnumeratedDomain:
    """Flatten a finite domain; ``mu_fn(key)`` gives each node's leaf mean."""
    keys = enumerate_nodes(domain)
    index = {k: i for i, k in enumerate(keys)}
    n = len(keys)
    children = []
    for k in keys:
        kids = sorted(index[c] for c in domain.children(k))
        children.append(kids)
    child_ptr = np.zeros(n + 1, dtype=np.int64)
    for i, kids in enumerate(children):
        child_ptr[i + 1] = child_ptr[i] + len(kids)
    n_edges = int(child_ptr[-1])
    child_idx = np.empty(n_edges, dtype=np.int32)
    child_eid = np.arange(n_edges, dtype=np.int32)
    for i, kids in enumerate(children):
        child_idx[child_ptr[i] : child_ptr[i + 1]] = kids
    # Reverse CSR referencing the same edge ids.
    par_counts = np.zeros(n, dtype=np.int64)
    for c in child_idx:
        par_counts[c] += 1
    par_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(par_counts, out=par_ptr[1:])
    par_idx = np.empty(n_edges, dtype=np.int32)
    par_eid = np.empty(n_edges, dtype=np.int32)
    fill = par_ptr[:-1].copy()
    for p in range(n):
        for e in range(child_ptr[p], child_ptr[p + 1]):
            c = child_idx[e]
            par_idx[fill[c]] = p
            par_eid[fill[c]] = e
            fill[c] += 1
    depth = np.asarray([domain.depth(k) for k in keys], dtype=np.int32)
    tmap: dict = {}
    trans = np.asarray(
        [tmap.setdefault(domain.transposition_key(k), len(tmap)) for k in keys],
        dtype=np.int64,
    )
    mu = np.asarray([mu_fn(k) for k in keys], dtype=np.float64)
    if mu.min() < 0.0 or mu.max() > 1.0:
        raise ValueError("leaf means must lie in [0, 1]")
    return EnumeratedDomain(
        keys=keys,
        child_ptr=child_ptr,
        child_idx=child_idx,
        child_eid=child_eid,
        par_ptr=par_ptr,
        par_idx=par_idx,
        par_eid=par_eid,
        depth=depth,
        trans=trans,
        mu=mu,
    )


@njit(cache=True, inline="always")
def _beta_value(mode, n, n_leaves, delta):
    if mode == BETA_PRACTICAL:
        return np.log(np.log(np.e * n) / delta)
    lr = np.log(n_leaves / delta)
    return lr + 3.0 * np.log(lr) + 1.5 * np.log(np.log(n) + 1.0)


@njit(cache=True)
def _recompute(
    s, child_ptr, child_idx, child_eid, edge_on, nlink,
    N, tot, L, U, rep, beta_mode, delta, n_temp,
):
    if nlink[s] > 0:
        lo = -np.inf
        hi = -np.inf
        rp = -1
        for e in range(child_ptr[s], child_ptr[s + 1]):
            if not edge_on[child_eid[e]]:
                continue
            c = child_idx[e]
            if L[c] > lo:
                lo = L[c]
            if U[c] > hi:
                hi = U[c]
                rp = c
    else:
        rp = -1
        if N[s] == 0:
            lo = -1.0
            hi = 2.0
        else:
            mean = tot[s] / N[s]
            half = np.sqrt(
                _beta_value(beta_mode, float(N[s]), float(n_temp), delta)
                / (2.0 * N[s])
            )
            lo = mean - half
            hi = mean + half
    if lo != L[s] or hi != U[s] or rp != rep[s]:
        L[s] = lo
        U[s] = hi
        rep[s] = rp
        return True
    return False


@njit(cache=True, inline="always")
def _rep_leaf(s, rep, nlink):
    while nlink[s] > 0:
        s = rep[s]
    return s


@njit(cache=True)
def _pair(
    root, child_ptr, child_idx, child_eid, edge_on,
    L, U, rep, nlink, trans,
):
    """Leader (argmax L) and challenger (argmax U among arms whose
    representative leaf denotes a different position); -1 if none."""
    b = -1
    best_l = -np.inf
    for e in range(child_ptr[root], child_ptr[root + 1]):
        if not edge_on[child_eid[e]]:
            continue
        s = child_idx[e]
        if L[s] > best_l:
            b = s
            best_l = L[s]
    rep_b = trans[_rep_leaf(b, rep, nlink)]
    c = -1
    best_u = -np.inf
    for e in range(child_ptr[root], child_ptr[root + 1]):
        if not edge_on[child_eid[e]]:
            continue
        s = child_idx[e]
        if U[s] > best_u and trans[_rep_leaf(s, rep, nlink)] != rep_b:
            c = s
            best_u = U[s]
    return b, c


@njit(cache=True)
def _refresh_all(
    mat_list, n_mat, depth, max_depth,
    child_ptr, child_idx, child_eid, edge_on, nlink,
    N, tot, L, U, rep, beta_mode, delta, n_temp,
):
    for d in range(max_depth, -1, -1):
        for i in range(n_mat):
            s = mat_list[i]
            if depth[s] == d:
                _recompute(
                    s, child_ptr, child_idx, child_eid, edge_on, nlink,
                    N, tot, L, U, rep, beta_mode, delta, n_temp,
                )


@njit(cache=True)
def _materialize(
    c, mat, edge_on, nlink, cnt_matkids,
    child_ptr, child_idx, par_ptr, par_idx, par_eid,
    anc_buf, anc_start, anc_len, anc_used, depth,
    stamp, stamp_val, mat_list, n_mat, n_temp, n_explored,
):
    """Insert node ``c`` with edges to all materialized parents.  Returns
    (n_mat, n_temp, n_explored, anc_used, stamp_val), or anc_used = -1 on
    ancestor-buffer overflow."""
    mat[c] = 1
    mat_list[n_mat] = c
    n_mat += 1
    n_temp += 1
    n_explored += 1
    stamp_val += 1
    start = anc_used
    count = 0
    for e in range(par_ptr[c], par_ptr[c + 1]):
        p = par_idx[e]
        cnt_matkids[p] += 1
        if mat[p]:
            edge_on[par_eid[e]] = 1
            if nlink[p] == 0:
                n_temp -= 1
            nlink[p] += 1
            # fold p and p's ancestors into c's ancestor list
            if stamp[p] != stamp_val:
                stamp[p] = stamp_val
                if anc_used + count >= anc_buf.shape[0]:
                    return n_mat, n_temp, n_explored, -1, stamp_val
                anc_buf[start + count] = p
                count += 1
            for j in range(anc_start[p], anc_start[p] + anc_len[p]):
                a = anc_buf[j]
                if stamp[a] != stamp_val:
                    stamp[a] = stamp_val
                    if start + count >= anc_buf.shape[0]:
                        return n_mat, n_temp, n_explored, -1, stamp_val
                    anc_buf[start + count] = a
                    count += 1
    # insertion sort by depth descending: child-before-parent update order
    for i in range(start + 1, start + count):
        v = anc_buf[i]
        dv = depth[v]
        j = i - 1
        while j >= start and depth[anc_buf[j]] < dv:
            anc_buf[j + 1] = anc_buf[j]
            j -= 1
        anc_buf[j + 1] = v
    anc_start[c] = start
    anc_len[c] = count
    anc_used = start + count
    return n_mat, n_temp, n_explored, anc_used, stamp_val


@njit(cache=True)
def _update_from_leaf(
    leaf, child_ptr, child_idx, child_eid, edge_on, nlink,
    par_ptr, par_idx, par_eid,
    N, tot, L, U, rep, beta_mode, delta, n_temp,
    anc_buf, anc_start, anc_len, need, need_val,
):
    """Early-cutoff bound propagation from a freshly sampled leaf.
    Returns (recomputed_count, need_val)."""
    recomputed = 1
    changed = _recompute(
        leaf, child_ptr, child_idx, child_eid, edge_on, nlink,
        N, tot, L, U, rep, beta_mode, delta, n_temp,
    )
    need_val += 1
    if changed:
        for e in range(par_ptr[leaf], par_ptr[leaf + 1]):
            if edge_on[par_eid[e]]:
                need[par_idx[e]] = need_val
        for j in range(anc_start[leaf], anc_start[leaf] + anc_len[leaf]):
            a = anc_buf[j]
            if need[a] != need_val:
                continue
            recomputed += 1
            if _recompute(
                a, child_ptr, child_idx, child_eid, edge_on, nlink,
                N, tot, L, U, rep, beta_mode, delta, n_temp,
            ):
                for e in range(par_ptr[a], par_ptr[a + 1]):
                    if edge_on[par_eid[e]]:
                        need[par_idx[e]] = need_val
    return recomputed, need_val


@njit(cache=True)
def _sample_and_update(
    r, root, mu,
    child_ptr, child_idx, child_eid, edge_on, nlink,
    par_ptr, par_idx, par_eid,
    N, tot, T, L, U, rep, beta_mode, delta, n_temp,
    anc_buf, anc_start, anc_len, need, need_val,
):
    """Descend from arm ``r``, draw one Bernoulli sample at the leaf, and
    propagate.  Returns (early, naive, need_val)."""
    T[root] += 1
    s = r
    T[s] += 1
    while nlink[s] > 0:
        s = rep[s]
        T[s] += 1
    x = 1.0 if np.random.random() < mu[s] else 0.0
    N[s] += 1
    tot[s] += x
    early, need_val = _update_from_leaf(
        s, child_ptr, child_idx, child_eid, edge_on, nlink,
        par_ptr, par_idx, par_eid,
        N, tot, L, U, rep, beta_mode, delta, n_temp,
        anc_buf, anc_start, anc_len, need, need_val,
    )
    return early, anc_len[s] + 1, need_val


@njit(cache=True)
def _run_kernel(
    child_ptr, child_idx, child_eid, par_ptr, par_idx, par_eid,
    depth, trans, mu,
    n_init, eps, delta, bexp, beta_mode, sample_mode,
    max_steps, seed, check_prop1, anc_cap, mat_cap,
):
    n = depth.shape[0]
    n_edges = child_idx.shape[0]
    np.random.seed(seed)
    mat = np.zeros(n, dtype=np.uint8)
    edge_on = np.zeros(n_edges, dtype=np.uint8)
    nlink = np.zeros(n, dtype=np.int32)
    cnt_matkids = np.zeros(n, dtype=np.int32)
    N = np.zeros(n, dtype=np.int64)
    tot = np.zeros(n, dtype=np.float64)
    T = np.zeros(n, dtype=np.int64)
    L = np.full(n, -1.0)
    U = np.full(n, 2.0)
    rep = np.full(n, -1, dtype=np.int32)
    anc_buf = np.empty(anc_cap, dtype=np.int32)
    anc_start = np.zeros(n, dtype=np.int64)
    anc_len = np.zeros(n, dtype=np.int32)
    stamp = np.zeros(n, dtype=np.int64)
    need = np.zeros(n, dtype=np.int64)
    mat_list = np.empty(mat_cap, dtype=np.int32)
    max_depth = int(depth.max())

    # D_0: the first n_init nodes in enumeration order (depth-sorted, so
    # every parent precedes its children).
    n_mat = 0
    n_temp = 0
    n_explored = 0
    anc_used = 0
    stamp_val = 0
    need_val = 0
    root = 0
    mat[root] = 1
    mat_list[0] = root
    n_mat = 1
    n_temp = 1
    n_explored = 1
    for c in range(1, n_init):
        n_mat, n_temp, n_explored, anc_used, stamp_val = _materialize(
            c, mat, edge_on, nlink, cnt_matkids,
            child_ptr, child_idx, par_ptr, par_idx, par_eid,
            anc_buf, anc_start, anc_len, anc_used, depth,
            stamp, stamp_val, mat_list, n_mat, n_temp, n_explored,
        )
        if anc_used < 0:
            return -2, 0, 0, 0, 0, 0, 0, 0, 0
    L0_count = n_temp
    _refresh_all(
        mat_list, n_mat, depth, max_depth,
        child_ptr, child_idx, child_eid, edge_on, nlink,
        N, tot, L, U, rep, beta_mode, delta, n_temp,
    )

    t = 0
    upd_early = 0
    upd_naive = 0
    expansions = 0
    stopped = 0  # 0 cap, 1 stopped, 2 trivial stop
    violations = 0

    while True:
        b, c = _pair(
            root, child_ptr, child_idx, child_eid, edge_on, L, U, rep, nlink, trans
        )
        if c < 0:
            stopped = 2
            break
        if U[c] - L[b] < eps:
            stopped = 1
            break
        if t >= max_steps:
            break
        if bexp > 0.0 and (
            np.floor((t + 1.0) ** bexp) - np.floor((t + 0.0) ** bexp) == 1.0
        ):
            # addition rule: argmax T_s / (|C(s)|+1) / max(d(s),1) over
            # materialized nodes with missing domain children
            best_s = -1
            best_i = -np.inf
            for i in range(n_mat):
                s = mat_list[i]
                if cnt_matkids[s] < child_ptr[s + 1] - child_ptr[s]:
                    dval = depth[s]
                    if dval < 1:
                        dval = 1
                    idx_val = T[s] / (nlink[s] + 1.0) / dval
                    if idx_val > best_i or (idx_val == best_i and s < best_s):
                        best_s = s
                        best_i = idx_val
            if best_s >= 0:
                n_cand = 0
                for e in range(child_ptr[best_s], child_ptr[best_s + 1]):
                    if not mat[child_idx[e]]:
                        n_cand += 1
                pick = np.random.randint(n_cand)
                new_node = -1
                for e in range(child_ptr[best_s], child_ptr[best_s + 1]):
                    if not mat[child_idx[e]]:
                        if pick == 0:
                            new_node = child_idx[e]
                            break
                        pick -= 1
                n_mat, n_temp, n_explored, anc_used, stamp_val = _materialize(
                    new_node, mat, edge_on, nlink, cnt_matkids,
                    child_ptr, child_idx, par_ptr, par_idx, par_eid,
                    anc_buf, anc_start, anc_len, anc_used, depth,
                    stamp, stamp_val, mat_list, n_mat, n_temp, n_explored,
                )
                if anc_used < 0 or n_mat >= mat_cap:
                    return -2, t, upd_early, upd_naive, expansions, n_temp, n_explored, 0, violations
                expansions += 1
                _refresh_all(
                    mat_list, n_mat, depth, max_depth,
                    child_ptr, child_idx, child_eid, edge_on, nlink,
                    N, tot, L, U, rep, beta_mode, delta, n_temp,
                )
                b, c = _pair(
                    root, child_ptr, child_idx, child_eid, edge_on,
                    L, U, rep, nlink, trans,
                )
        if sample_mode == SAMPLE_BOTH and c >= 0:
            for r in (b, c):
                early, naive, need_val = _sample_and_update(
                    r, root, mu,
                    child_ptr, child_idx, child_eid, edge_on, nlink,
                    par_ptr, par_idx, par_eid,
                    N, tot, T, L, U, rep, beta_mode, delta, n_temp,
                    anc_buf, anc_start, anc_len, need, need_val,
                )
                upd_early += early
                upd_naive += naive
                t += 1
        else:
            if c < 0:
                r = b
            else:
                width_b = U[b] - L[b]
                width_c = U[c] - L[c]
                if width_b > width_c:
                    r = b
                elif width_c > width_b:
                    r = c
                elif b < c:
                    r = b
                else:
                    r = c
            early, naive, need_val = _sample_and_update(
                r, root, mu,
                child_ptr, child_idx, child_eid, edge_on, nlink,
                par_ptr, par_idx, par_eid,
                N, tot, T, L, U, rep, beta_mode, delta, n_temp,
                anc_buf, anc_start, anc_len, need, need_val,
            )
            upd_early += early
            upd_naive += naive
            t += 1
        # Proposition-1 form: newly explored leaves (one per expansion) never
        # exceed t^b, so |L*_t| <= |L0| + t^b.
        if check_prop1 and expansions > t ** bexp:
            violations += 1

    # recommendation: argmax-L root child
    reco = -1
    best_l = -np.inf
    for e in range(child_ptr[root], child_ptr[root + 1]):
        if not edge_on[child_eid[e]]:
            continue
        s = child_idx[e]
        if L[s] > best_l:
            reco = s
            best_l = L[s]
    return reco, t, upd_early, upd_naive, expansions, n_temp, n_explored, stopped, violations


def kernel_run_bai(
    ed: EnumeratedDomain,
    n_init: int,
    epsilon: float,
    delta: float,
    b: float,
    beta_mode: int = BETA_PRACTICAL,
    sample_mode: int = SAMPLE_WIDEST,
    max_steps: int = 100_000_000,
    seed: int = 0,
    check_prop1: bool = False,
) -> tuple[BaiReport, int]:
    """Run the accelerated LUCB loop; returns (report, prop1_violations)."""
    if sample_mode == SAMPLE_BOTH and b > 0.0:
        raise ValueError("both-per-round sampling is only supported for b = 0")
    exp_cap = int(max_steps ** b) + 16 if b > 0 else 0
    mat_cap = min(ed.n_nodes, n_init + exp_cap) + 4
    anc_cap = max(4096, 128 * mat_cap)
    start = time.perf_counter()
    out = _run_kernel(
        ed.child_ptr, ed.child_idx, ed.child_eid,
        ed.par_ptr, ed.par_idx, ed.par_eid,
        ed.depth, ed.trans, ed.mu,
        n_init, float(epsilon), float(delta), float(b),
        beta_mode, sample_mode, int(max_steps), int(seed),
        check_prop1, anc_cap, mat_cap,
    )
    reco, t, upd_early, upd_naive, expansions, n_temp, n_explored, stopped, violations = out
    if reco == -2:
        raise RuntimeError("kernel capacity exceeded; increase caps")
    report = BaiReport(
        recommended=ed.keys[reco],
        recommended_id=int(reco),
        samples=int(t),
        node_updates=int(upd_early),
        node_updates_naive=int(upd_naive),
        expansions=int(expansions),
        leaf_count_final=int(n_temp),
        explored_leaves=int(n_explored),
        stopped=stopped != 0,
        wall_time=time.perf_counter() - start,
        seed=int(seed),
        trivial_stop=stopped == 2,
    )
    return report, int(violations)


def kernel_run_many(
    ed: EnumeratedDomain,
    n_init: int,
    epsilon: float,
    delta: float,
    b: float,
    beta_mode: int,
    reps: int,
    base_seed: int,
    sample_mode: int = SAMPLE_WIDEST,
    max_steps: int = 100_000_000,
    check_prop1: bool = False,
) -> tuple[list[BaiReport], int]:
    """Independent seeded replications; returns (reports, total violations)."""
    reports = []
    violations = 0
    for i in range(reps):
        rep, v = kernel_run_bai(
            ed, n_init, epsilon, delta, b, beta_mode, sample_mode,
            max_steps, base_seed + i, check_prop1,
        )
        reports.append(rep)
        violations += v
    return reports, violations
