"""Exploration functions and per-leaf confidence intervals.

Two exploration functions scale the half-width of a leaf's confidence
interval.  ``beta_theory`` carries a union bound over the leaf set and backs
the correctness guarantees; ``beta_practical`` drops the leaf-count term and
is what one should actually run.  Intervals are never clamped to [0, 1]:
clamping would silently tighten them relative to what the guarantees assume.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

__all__ = [
    "UNSAMPLED_LOWER",
    "UNSAMPLED_UPPER",
    "ExplorationFn",
    "beta_practical",
    "beta_theory",
    "leaf_interval",
]

# Sentinel interval for a leaf with zero samples: half-width 1 beyond each end
# of the value range, so an unvisited leaf dominates every sampled one and the
# first traversal through its parent is forced to sample it.
UNSAMPLED_LOWER = -1.0
UNSAMPLED_UPPER = 2.0


def beta_theory(n: int, leaf_count: int, delta: float) -> float:
    """Theory-backed exploration function (union bound over the leaf set).

    beta(N, delta) = ln(|L|/delta) + 3 ln ln(|L|/delta) + (3/2) ln(ln N + 1)

    Strictly increasing in both ``n`` and ``leaf_count``.  Requires
    ``leaf_count / delta > e`` so the double logarithm is defined.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if leaf_count < 1:
        raise ValueError(f"leaf count must be >= 1, got {leaf_count}")
    ratio = leaf_count / delta
    if ratio <= math.e:
        raise ValueError(
            f"leaf_count/delta = {ratio:.6g} <= e: ln ln undefined; "
            "use the practical variant or a smaller delta"
        )
    log_ratio = math.log(ratio)
    return log_ratio + 3.0 * math.log(log_ratio) + 1.5 * math.log(math.log(n) + 1.0)


def beta_practical(n: int, delta: float) -> float:
    """Practical exploration function: ln(ln(e*N)/delta).

    Independent of the number of leaves, so intervals need no refresh when
    the DAG expands.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return math.log(math.log(math.e * n) / delta)


def leaf_interval(mean: float, n: int, beta: float) -> tuple[float, float]:
    """Confidence interval (L, U) = mean -/+ sqrt(beta / 2N), unclamped."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    half = math.sqrt(beta / (2.0 * n))
    return mean - half, mean + half


@dataclass(frozen=True)
class ExplorationFn:
    """A chosen exploration function with its risk level.

    variant: "theory" (needs the current leaf count) or "practical".
    """

    variant: str
    delta: float

    def __post_init__(self) -> None:
        if self.variant not in ("theory", "practical"):
            raise ValueError(f"unknown exploration variant {self.variant!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    @property
    def needs_leaf_count(self) -> bool:
        return self.variant == "theory"

    def value(self, n: int, leaf_count: int) -> float:
        if self.variant == "theory":
            return beta_theory(n, leaf_count, self.delta)
        return beta_practical(n, self.delta)

    def warn_if_delta_large(self, initial_leaf_count: int) -> None:
        """Warn when delta exceeds 0.1 * |L0| in theory mode.

        The guarantee behind the theory variant is stated for
        delta <= min(1, 0.1 |L|); the constraint is vacuous once |L| >= 10.
        """
        if self.variant == "theory" and self.delta > 0.1 * initial_leaf_count:
            warnings.warn(
                f"delta={self.delta} exceeds 0.1*|L0|={0.1 * initial_leaf_count:.3g}; "
                "the theory variant's guarantee is not stated for this regime",
                stacklevel=2,
            )
