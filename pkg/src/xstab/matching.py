"""Minimum-cost matching distance between two equal-size datasets.

The distance pairs every row of one dataset with a distinct row of the
other so that the summed L2 feature distance is minimal, and reports the
mean matched distance as the headline number (the total is exposed
alongside). Costs use features only by default; ``label_mode="must_match"``
restricts the matching to pairs with equal labels.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .datasets import Dataset
from .errors import DomainError, InfeasibleError, ShapeError

# Cost assigned to label-mismatched pairs under must_match: dominates any
# realistic distance without overflowing float64 summation.
LARGE_COST = 1e15

LABEL_MODES = ("ignore", "must_match")


@dataclass(frozen=True)
class MatchingResult:
    """Optimal assignment: ``permutation[i]`` is the d2 row matched to d1 row i."""

    permutation: np.ndarray
    total_cost: float
    mean_cost: float


def _cost_matrix(d1: Dataset, d2: Dataset, label_mode: str) -> np.ndarray:
    if label_mode not in LABEL_MODES:
        raise DomainError(f"label_mode must be one of {LABEL_MODES}, got {label_mode!r}")
    if d1.n != d2.n:
        raise ShapeError(f"dataset sizes differ: {d1.n} vs {d2.n}")
    if d1.d != d2.d:
        raise ShapeError(f"feature dimensions differ: {d1.d} vs {d2.d}")
    cost = cdist(d1.features, d2.features)
    if label_mode == "must_match":
        c1 = np.bincount(d1.labels, minlength=2)
        c2 = np.bincount(d2.labels, minlength=2)
        if not np.array_equal(c1, c2):
            raise InfeasibleError(
                f"label counts differ ({c1.tolist()} vs {c2.tolist()}); no label-preserving matching exists"
            )
        cost = np.where(d1.labels[:, None] == d2.labels[None, :], cost, LARGE_COST)
    return cost


def _result(d1: Dataset, d2: Dataset, perm: np.ndarray) -> MatchingResult:
    diffs = d1.features - d2.features[perm]
    matched = np.linalg.norm(diffs, axis=1)
    total = float(matched.sum())
    return MatchingResult(perm, total, total / d1.n)


def hungarian_distance(d1: Dataset, d2: Dataset, label_mode: str = "ignore") -> MatchingResult:
    """Exact optimal assignment on the n x n pairwise L2 cost matrix (O(n^3))."""
    cost = _cost_matrix(d1, d2, label_mode)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(d1.n, dtype=np.int64)
    perm[rows] = cols
    return _result(d1, d2, perm)


def brute_force_distance(d1: Dataset, d2: Dataset, label_mode: str = "ignore") -> MatchingResult:
    """Exhaustive minimum over all n! permutations; reference oracle for n <= 8."""
    if d1.n > 8:
        raise DomainError(f"brute force is limited to n <= 8, got n={d1.n}")
    cost = _cost_matrix(d1, d2, label_mode)
    best_perm = None
    best_total = np.inf
    for perm in itertools.permutations(range(d1.n)):
        total = cost[np.arange(d1.n), perm].sum()
        if total < best_total:
            best_total = total
            best_perm = perm
    if best_total >= LARGE_COST:
        raise InfeasibleError("every permutation violates the label constraint")
    return _result(d1, d2, np.array(best_perm, dtype=np.int64))
