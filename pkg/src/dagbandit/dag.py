"""The explored single-rooted DAG with confidence-bound propagation.

``SearchDag`` holds the subgraph explored so far: per-node sample statistics,
stored confidence bounds, representative-child links and the temporary-leaf
set.  Nodes are integer ids in insertion order; state keys (transposition
identities) map to ids, so two move orders reaching the same state share one
node in DAG-mode domains.

Insertion wires the new node to every parent already present and never adds
edges from the new node to pre-existing children, so a node's ancestor set is
fixed at insertion time.  Each node therefore carries a precomputed ancestor
list in child-before-parent order, which makes the update-all backpropagation
a single pass.
"""

from __future__ import annotations

from dataclasses import dataclass

from .bounds import UNSAMPLED_LOWER, UNSAMPLED_UPPER, ExplorationFn, leaf_interval

__all__ = ["DuplicateStateError", "NodeStats", "SearchDag", "StructuralError"]


class DuplicateStateError(ValueError):
    """The state is already present in the DAG."""


class StructuralError(ValueError):
    """The insertion would break the single-rooted connected-DAG invariants."""


@dataclass(frozen=True)
class NodeStats:
    """Read-only snapshot of one node's statistics."""

    n_samples: int
    mean: float
    visits: int
    lower: float
    upper: float
    rep_child: int | None


class SearchDag:
    """Explored subgraph of a domain, with bound propagation.

    The per-node stored interval is the leaf confidence interval for
    temporary leaves (nodes without children here) and the running
    max-over-children for internal nodes.  ``record_sample`` keeps the
    stored bounds at their fixpoint with an early-cutoff sweep over the
    sampled leaf's ancestors; both the early-cutoff recompute count and the
    naive all-ancestors count are accumulated, since reported node-update
    totals depend on that convention.
    """

    def __init__(self, domain, beta: ExplorationFn):
        self.domain = domain
        self.beta = beta
        self._ids: dict = {}
        self._trans_ids: dict = {}
        self.keys: list = []
        self.trans: list[int] = []  # dense transposition-identity ids
        self.children: list[list[int]] = []
        self.parents: list[list[int]] = []
        self.ancestors: list[list[int]] = []  # child-before-parent order
        self.depth: list[int] = []
        self.terminal: list[bool] = []
        self.point_mass: list[bool] = []
        self.n: list[int] = []
        self.total: list[float] = []
        self.visits: list[int] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.rep: list[int] = []  # -1 for leaves
        self.temp_leaves: set[int] = set()
        self.explored_leaf_count = 0
        self.update_count_early = 0
        self.update_count_naive = 0
        self.t = 0
        self.root = self._add_node(domain.root(), [])

    # -- construction -----------------------------------------------------

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self._ids

    def node_id(self, key) -> int:
        return self._ids[key]

    def _add_node(self, key, parent_ids: list[int]) -> int:
        node = len(self.keys)
        self._ids[key] = node
        self.keys.append(key)
        tkey = self.domain.transposition_key(key)
        self.trans.append(self._trans_ids.setdefault(tkey, len(self._trans_ids)))
        self.children.append([])
        self.parents.append(list(parent_ids))
        self.depth.append(self.domain.depth(key))
        self.terminal.append(self.domain.is_terminal(key))
        self.point_mass.append(False)
        self.n.append(0)
        self.total.append(0.0)
        self.visits.append(0)
        self.lower.append(UNSAMPLED_LOWER)
        self.upper.append(UNSAMPLED_UPPER)
        self.rep.append(-1)
        # Ancestors: union of each parent's ancestors plus the parents,
        # ordered deepest-first so one pass is a valid reverse-topological
        # update order.
        seen: set[int] = set()
        anc: list[int] = []
        for p in parent_ids:
            if p not in seen:
                seen.add(p)
                anc.append(p)
            for a in self.ancestors[p]:
                if a not in seen:
                    seen.add(a)
                    anc.append(a)
        anc.sort(key=lambda i: -self.depth[i])
        self.ancestors.append(anc)
        self.temp_leaves.add(node)
        self.explored_leaf_count += 1
        return node

    def insert_node(self, key) -> int:
        """Insert a new state, wiring edges to every parent already present.

        Former temporary leaves among the parents leave the leaf set, and the
        newcomer's sentinel interval is propagated upwards immediately.
        Under the theory exploration function the caller must still
        ``refresh_bounds`` afterwards, since the leaf count changed.
        """
        if key in self._ids:
            raise DuplicateStateError(f"state already present: {key!r}")
        parent_ids = [
            self._ids[p] for p in self.domain.parents(key) if p in self._ids
        ]
        if not parent_ids:
            raise StructuralError(f"no parent of {key!r} is present")
        node = self._add_node(key, parent_ids)
        for p in parent_ids:
            if self.depth[p] >= self.depth[node]:
                raise StructuralError(
                    f"edge {p} -> {node} does not increase depth; "
                    "insertion would break acyclicity"
                )
            if not self.children[p]:
                self.temp_leaves.discard(p)
            self.children[p].append(node)
        self.propagate_insert(node)
        return node

    # -- bound bookkeeping --------------------------------------------------

    def n_leaves(self) -> int:
        return len(self.temp_leaves)

    def mean(self, node: int) -> float:
        return self.total[node] / self.n[node]

    def stats(self, node: int) -> NodeStats:
        cnt = self.n[node]
        return NodeStats(
            n_samples=cnt,
            mean=self.total[node] / cnt if cnt else float("nan"),
            visits=self.visits[node],
            lower=self.lower[node],
            upper=self.upper[node],
            rep_child=self.rep[node] if self.rep[node] >= 0 else None,
        )

    def _recompute(self, node: int) -> bool:
        """Recompute one node's stored (L, U, rep); return True if changed."""
        kids = self.children[node]
        if kids:
            lo = -float("inf")
            hi = -float("inf")
            rep = -1
            for c in kids:
                lc = self.lower[c]
                if lc > lo:
                    lo = lc
                uc = self.upper[c]
                if uc > hi:
                    hi = uc
                    rep = c
        else:
            rep = -1
            cnt = self.n[node]
            if cnt == 0:
                lo, hi = UNSAMPLED_LOWER, UNSAMPLED_UPPER
            elif self.point_mass[node]:
                lo = hi = self.total[node] / cnt
            else:
                b = self.beta.value(cnt, len(self.temp_leaves))
                lo, hi = leaf_interval(self.total[node] / cnt, cnt, b)
        if lo != self.lower[node] or hi != self.upper[node] or rep != self.rep[node]:
            self.lower[node] = lo
            self.upper[node] = hi
            self.rep[node] = rep
            return True
        return False

    def _propagate(self, start: int) -> int:
        """Early-cutoff ancestor sweep from a changed node; returns the
        number of recomputed nodes (the changed node excluded)."""
        need: set[int] = set(self.parents[start])
        recomputed = 0
        for a in self.ancestors[start]:
            if a not in need:
                continue
            recomputed += 1
            if self._recompute(a):
                need.update(self.parents[a])
        return recomputed

    def record_sample(self, leaf: int, x: float, point_mass: bool = False) -> int:
        """Fold one oracle sample into a temporary leaf and update ancestors.

        Returns the number of nodes whose stored bounds were recomputed
        (early-cutoff convention); the naive all-ancestors count accumulates
        in ``update_count_naive``.
        """
        if leaf not in self.temp_leaves:
            raise StructuralError(f"node {leaf} is not a temporary leaf")
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"sample must lie in [0, 1], got {x}")
        self.n[leaf] += 1
        self.total[leaf] += x
        if point_mass:
            self.point_mass[leaf] = True
        changed = self._recompute(leaf)
        recomputed = 1
        if changed:
            recomputed += self._propagate(leaf)
        self.update_count_early += recomputed
        self.update_count_naive += len(self.ancestors[leaf]) + 1
        return recomputed

    def propagate_insert(self, node: int) -> None:
        """Propagate a freshly inserted node's sentinel interval upwards."""
        self._recompute(node)
        self._propagate(node)

    def refresh_bounds(self) -> None:
        """Recompute every stored bound from scratch (full fixpoint).

        Needed after insertions under the theory exploration function, whose
        leaf intervals depend on the current leaf count.
        """
        for node in sorted(range(len(self.keys)), key=lambda i: -self.depth[i]):
            self._recompute(node)

    # -- traversal ----------------------------------------------------------

    def representative_leaf(self, node: int) -> int:
        """Follow representative-child links down to a temporary leaf."""
        while self.children[node]:
            node = self.rep[node]
        return node

    def descend(self, node: int) -> list[int]:
        """Path from ``node`` to its representative leaf (inclusive)."""
        path = [node]
        while self.children[node]:
            node = self.rep[node]
            path.append(node)
        return path

    def bump_visits(self, path: list[int]) -> None:
        for node in path:
            self.visits[node] += 1

    # -- debugging / golden-test surface -------------------------------------

    def dump(self) -> str:
        """Edge list (parent<TAB>child) plus a per-node statistics table."""
        ks = self.domain.key_str
        lines = []
        for p in range(len(self.keys)):
            for c in self.children[p]:
                lines.append(f"{ks(self.keys[p])}\t{ks(self.keys[c])}")
        lines.append("")
        lines.append("key\tN\tmean\tL\tU")
        for i in range(len(self.keys)):
            mean = f"{self.total[i] / self.n[i]:.6f}" if self.n[i] else "-"
            lines.append(
                f"{ks(self.keys[i])}\t{self.n[i]}\t{mean}"
                f"\t{self.lower[i]:.6f}\t{self.upper[i]:.6f}"
            )
        return "\n".join(lines)

    def check_bounds_fixpoint(self) -> None:
        """Assert stored bounds equal a full recomputation (test helper)."""
        expect_lower = list(self.lower)
        expect_upper = list(self.upper)
        expect_rep = list(self.rep)
        self.refresh_bounds()
        for i in range(len(self.keys)):
            if (
                expect_lower[i] != self.lower[i]
                or expect_upper[i] != self.upper[i]
                or expect_rep[i] != self.rep[i]
            ):
                raise AssertionError(
                    f"stored bounds out of fixpoint at node {i}: "
                    f"({expect_lower[i]}, {expect_upper[i]}, {expect_rep[i]}) vs "
                    f"({self.lower[i]}, {self.upper[i]}, {self.rep[i]})"
                )
