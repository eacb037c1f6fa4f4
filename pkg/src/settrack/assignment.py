"""Optimal and ranked (k-best) linear assignment on square cost matrices.

Costs are ``-log`` probabilities; ``inf`` forbids a pair.  Mappings are
0-indexed tuples, ``mapping[row] = column``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InfeasibleAssignment  # noqa: F401  (re-export)

DEFAULT_CAP = 10_000


@dataclass(frozen=True)
class Assignment:
    mapping: tuple[int, ...]
    total_cost: float


def _check_square(costs) -> np.ndarray:
    a = np.asarray(costs, dtype=float)
    if a.size == 0:
        return np.zeros((0, 0))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {a.shape}")
    return a


def solve_best(costs, impl=None) -> Assignment:
    """Minimum-cost assignment.

    Ties are broken toward the lexicographically smallest mapping.  Raises
    ``InfeasibleAssignment`` when every perfect assignment uses an ``inf`` entry.
    """
    a = _check_square(costs)
    cols, total = kernels.hungarian(a, impl=impl)
    return Assignment(tuple(cols), float(total))


def ranked(costs, ratio_threshold: float, cap: int = DEFAULT_CAP, impl=None):
    """Like :func:`murty_k_best` but also returns the inner-loop operation count."""
    if not 0.0 <= ratio_threshold <= 1.0:
        raise ValueError("ratio_threshold must lie in [0, 1]")
    a = _check_square(costs)
    bound = -math.log(ratio_threshold) if ratio_threshold > 0 else math.inf
    sols, ops = kernels.murty(a, bound, cap, impl=impl)
    return [Assignment(tuple(c), float(t)) for t, c in sols], ops


def murty_k_best(costs, ratio_threshold: float, cap: int = DEFAULT_CAP, impl=None) -> list[Assignment]:
    """Assignments in nondecreasing cost order while ``exp(best - cost) >= ratio_threshold``.

    ``ratio_threshold = 0`` disables the cutoff (every assignment, subject to
    ``cap``).  More than ``cap`` qualifying assignments raises
    ``AssignmentCapExceeded``.
    """
    return ranked(costs, ratio_threshold, cap, impl)[0]
