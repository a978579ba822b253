"""Exact evaluation of the complexity quantities behind the sample bounds.

Everything here works on a *finite, fully enumerable* domain: exact node
values from the max-recursion over leaf means, the value gaps that drive the
complexity term, the first-order sample-complexity bound, and the
Lambert-function machinery for the expanding-DAG bound.

A leaf's gap is the largest parent-child value drop along any root-to-leaf
path (the first step from the root included).  Equivalently: the maximum of
max_p (V(p) - V(s)) over every node s on any path to the leaf, the leaf
itself included, the root excluded.  Both forms are implemented; their
agreement is a tested invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .feature_space import enumerate_nodes

__all__ = [
    "GapsUndefinedError",
    "InapplicableBoundError",
    "chatzigeorgiou_bound",
    "chatzigeorgiou_lower",
    "delta_leaf_ancestor",
    "gaps",
    "h_eps",
    "lambert_wm1",
    "leaf_gaps",
    "second_term_thm1",
    "tau_max_thm2",
    "tau_ub_thm1",
    "value_map",
]

_BRANCH_POINT = -math.exp(-1.0)


class GapsUndefinedError(ValueError):
    """Every root child ties with the optimum; the best-vs-second gap is
    undefined."""


class InapplicableBoundError(ValueError):
    """The Lambert argument leaves [-1/e, 0); the bound does not apply."""


# ---------------------------------------------------------------------------
# values and gaps
# ---------------------------------------------------------------------------


def value_map(domain, leaf_mean) -> dict:
    """Exact V(s) for every node: leaf mean at leaves, max over children
    elsewhere."""
    keys = enumerate_nodes(domain)
    values: dict = {}
    for key in reversed(keys):
        kids = domain.children(key)
        if not kids:
            values[key] = float(leaf_mean(key))
        else:
            values[key] = max(values[c] for c in kids)
    return values


def leaf_gaps(domain, values: dict) -> dict:
    """Per-leaf gap by dynamic programming over paths.

    G(s) = max over parents p of max(G(p), V(p) - V(s)), G(root) = -inf;
    the leaf's gap is G(leaf).  Parent values never fall below child values,
    so the absolute differences of the written form are plain drops.
    """
    keys = enumerate_nodes(domain)
    g: dict = {keys[0]: -math.inf}
    out: dict = {}
    for key in keys[1:]:
        best = -math.inf
        v = values[key]
        for p in domain.parents(key):
            cand = max(g[p], values[p] - v)
            if cand > best:
                best = cand
        g[key] = best
        if not domain.children(key):
            out[key] = best
    return out


def delta_leaf_ancestor(domain, values: dict, leaf, include_self: bool = True) -> float:
    """Ancestor-form leaf gap: max over ancestors (root excluded) of the
    node's largest drop from any parent; ``include_self`` adds the leaf's own
    drop, which is what makes the form agree with the path form."""
    root = domain.root()
    seen = set()
    frontier = [leaf] if include_self else list(domain.parents(leaf))
    best = -math.inf
    while frontier:
        nxt = []
        for s in frontier:
            if s in seen or s == root:
                continue
            seen.add(s)
            v = values[s]
            for p in domain.parents(s):
                drop = values[p] - v
                if drop > best:
                    best = drop
                nxt.append(p)
        frontier = nxt
    return best


@dataclass(frozen=True)
class GapReport:
    delta_star: float
    best_child: object
    second_child: object
    leaf_deltas: dict


def gaps(domain, values: dict) -> GapReport:
    """Best-vs-second root gap and all per-leaf gaps.

    The second best excludes root children tying with the optimum (in a DAG
    the optimal arm need not be unique); if every child ties the gap is
    undefined and ``GapsUndefinedError`` is raised.
    """
    root = domain.root()
    kids = domain.children(root)
    v_star = values[root]
    best = None
    second = None
    second_v = -math.inf
    for c in kids:
        if values[c] == v_star:
            if best is None:
                best = c
        elif values[c] > second_v:
            second = c
            second_v = values[c]
    if second is None:
        raise GapsUndefinedError("all root children share the optimal value")
    return GapReport(
        delta_star=v_star - second_v,
        best_child=best,
        second_child=second,
        leaf_deltas=leaf_gaps(domain, values),
    )


def h_eps(domain, values: dict, eps: float, delta_star: float | None = None) -> float:
    """Complexity term: sum over leaves of 1 / max(gap^2, gap*^2, eps^2)."""
    if delta_star is None:
        try:
            delta_star = gaps(domain, values).delta_star
        except GapsUndefinedError:
            delta_star = 0.0
    total = 0.0
    for d in leaf_gaps(domain, values).values():
        denom = max(d * d, delta_star * delta_star, eps * eps)
        if denom == 0.0:
            raise ValueError("zero gap and zero eps: complexity term diverges")
        total += 1.0 / denom
    return total


def tau_ub_thm1(h: float, leaf_count: int, delta: float) -> float:
    """First-order sample bound 8 * H * ln(|L|/delta) (the dominant term;
    the double-log term is reported separately)."""
    if h <= 0 or leaf_count < 1 or not 0 < delta < 1:
        raise ValueError("need h > 0, leaf_count >= 1, delta in (0, 1)")
    return 8.0 * h * math.log(leaf_count / delta)


def second_term_thm1(
    domain, values: dict, eps: float, delta_star: float | None = None
) -> tuple[float, int]:
    """Double-log term: sum of (16/gap^2) ln ln(1/gap^2) over leaves.

    Leaves whose effective gap makes ln(1/gap^2) <= 1 have no defined term;
    they are skipped and counted, not folded in as NaN.
    """
    if delta_star is None:
        try:
            delta_star = gaps(domain, values).delta_star
        except GapsUndefinedError:
            delta_star = 0.0
    total = 0.0
    undefined = 0
    for d in leaf_gaps(domain, values).values():
        g = max(d, delta_star, eps)
        if g <= 0:
            undefined += 1
            continue
        inner = math.log(1.0 / (g * g))
        if inner <= 1.0:
            undefined += 1
            continue
        total += 16.0 / (g * g) * math.log(inner)
    return total, undefined


# ---------------------------------------------------------------------------
# Lambert W, branch -1
# ---------------------------------------------------------------------------


def chatzigeorgiou_bound(u: float) -> float:
    """Closed upper bound on W_-1(-e^(-u-1)) for u > 0:
    -1 - sqrt(2u) - (2/3)u."""
    if u <= 0:
        raise ValueError("bound stated for u > 0")
    return -1.0 - math.sqrt(2.0 * u) - (2.0 / 3.0) * u


def chatzigeorgiou_lower(u: float) -> float:
    """Companion lower bound from the same source: -1 - sqrt(2u) - u.

    Composing the sample bound with 1/(b-1) < 0 reverses inequalities, so a
    closed form that *dominates* the exact Lambert evaluation must plug in a
    lower bound on W_-1, not the upper one.
    """
    if u <= 0:
        raise ValueError("bound stated for u > 0")
    return -1.0 - math.sqrt(2.0 * u) - u


def lambert_wm1(y: float) -> float:
    """W_-1(y) for y in [-1/e, 0): the solution w <= -1 of w e^w = y.

    Substituting w = -1 - sigma turns the defining equation into
    sigma - ln(1 + sigma) = u with u = -1 - ln(-y) >= 0, a monotone convex
    problem solved by Newton from the Chatzigeorgiou-bound seed
    sigma0 = sqrt(2u) + 2u/3 (which starts below the root, so the iteration
    ascends monotonically).  Bisection is the fallback if Newton ever stalls.
    """
    if not _BRANCH_POINT <= y < 0.0:
        raise ValueError(f"y={y} outside [-1/e, 0)")
    u = -1.0 - math.log(-y)
    if u <= 0.0:
        return -1.0
    sigma = math.sqrt(2.0 * u) + (2.0 / 3.0) * u
    converged = False
    for _ in range(200):
        f = sigma - math.log1p(sigma) - u
        fp = sigma / (1.0 + sigma)
        step = f / fp
        sigma -= step
        if abs(step) <= 1e-16 * (1.0 + abs(sigma)):
            converged = True
            break
    w = -1.0 - sigma
    if not converged or abs(w * math.exp(w) - y) > 1e-12 * abs(y):
        lo, hi = 0.0, max(2.0 * u + 4.0, 8.0)
        while hi - math.log1p(hi) < u:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid - math.log1p(mid) < u:
                lo = mid
            else:
                hi = mid
        sigma = 0.5 * (lo + hi)
        w = -1.0 - sigma
    return w


def tau_max_thm2(delta: float, gap: float, b: float) -> tuple[float, float | None]:
    """Expanding-DAG sample bound: exact Lambert form and the closed-form
    relaxation.

    Returns (tau_exact, tau_closed); the closed form (valid for u > 0) is
    None when u <= 0 and always dominates the exact form where defined.
    Raises ``InapplicableBoundError`` when the Lambert argument leaves
    [-1/e, 0) -- the regime where the bound's derivation has no solution.
    """
    if not 0.0 < b < 1.0:
        raise InapplicableBoundError("bound requires b in (0, 1)")
    if not 0.0 < delta < 1.0 or gap <= 0.0:
        raise ValueError("need delta in (0, 1) and gap > 0")
    alpha = (b - 1.0) / b
    scale = delta**alpha
    y = gap * gap * (b - 1.0) / (8.0 * b * scale)
    if not _BRANCH_POINT <= y < 0.0:
        raise InapplicableBoundError(
            f"Lambert argument {y:.6g} outside [-1/e, 0)"
        )
    exact = (scale * math.exp(lambert_wm1(y))) ** (1.0 / (b - 1.0))
    u = math.log(8.0 * b * scale / (gap * gap * (1.0 - b))) - 1.0
    closed = None
    if u > 0.0:
        closed = (scale * math.exp(chatzigeorgiou_lower(u))) ** (1.0 / (b - 1.0))
    return exact, closed
