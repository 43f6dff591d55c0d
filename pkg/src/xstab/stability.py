"""Stability metrics between two models' parameters and explanations.

Distances: L2 over flattened parameters, and the mean L2 gap between the
two models' input gradients over a test set. Top-K metrics compare the
signed top-K feature sets of two attributions:

* SA (sign agreement): fraction of top-K (index, sign) pairs shared.
* CDC (consistent direction of contribution): 1 iff every feature in
  the union of the two top-K sets keeps its sign in both attributions.
* SSA (signed-set agreement): 1 iff the signed top-K sets are equal as
  unordered sets. SSA = 1 implies SA = 1 and CDC = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ShapeError
from .explainers import Attribution, TopKSet, top_k
from .mlp import MlpParams, flatten_params, input_gradient_batch


def param_distance(p1: MlpParams, p2: MlpParams) -> float:
    """L2 norm of the flattened parameter difference (weights and biases)."""
    if p1.dims != p2.dims:
        raise ShapeError(f"architectures differ: {p1.dims} vs {p2.dims}")
    return float(np.linalg.norm(flatten_params(p1) - flatten_params(p2)))


def gradient_distance(p1: MlpParams, p2: MlpParams, test: Dataset | np.ndarray) -> float:
    """Mean over test rows of the L2 gap between the two input gradients."""
    X = test.features if isinstance(test, Dataset) else np.atleast_2d(test)
    g1 = input_gradient_batch(X, p1)
    g2 = input_gradient_batch(X, p2)
    return float(np.linalg.norm(g1 - g2, axis=1).mean())


def sa(top1: TopKSet, top2: TopKSet) -> float:
    """Fraction of signed top-K pairs present in both sets."""
    if len(top1.entries) != len(top2.entries):
        raise ShapeError("sign agreement needs equal k on both sides")
    k = len(top1.entries)
    return len(top1.as_set() & top2.as_set()) / k


def cdc(attr1: Attribution, attr2: Attribution, k: int) -> int:
    """1 iff every feature in either model's top-K has the same sign in both."""
    union = set(top_k(attr1, k).indices) | set(top_k(attr2, k).indices)
    signs1 = np.sign(attr1.values)
    signs2 = np.sign(attr2.values)
    return int(all(signs1[i] == signs2[i] for i in union))


def ssa(top1: TopKSet, top2: TopKSet) -> int:
    """1 iff the signed top-K sets are equal, ignoring magnitude order."""
    return int(top1.as_set() == top2.as_set())


@dataclass(frozen=True)
class Aggregate:
    """Mean with 25th/75th percentiles (linear interpolation between order stats)."""

    mean: float
    q25: float
    q75: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "q25": self.q25, "q75": self.q75}


def aggregate(values) -> Aggregate:
    """Mean and quartiles of a non-empty list of reals."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ShapeError("cannot aggregate an empty list")
    q25, q75 = np.percentile(arr, [25.0, 75.0])
    return Aggregate(float(arr.mean()), float(q25), float(q75))


@dataclass(frozen=True)
class StabilityReport:
    """Trial-aggregated stability numbers for one configuration cell.

    ``topk[k][metric]`` holds the aggregate over trials of the per-trial
    sample means, keyed by explainer-qualified metric names.
    """

    param_l2: Aggregate
    grad_l2_mean: Aggregate
    topk: dict[int, dict[str, Aggregate]]

    def to_json_dict(self) -> dict:
        return {
            "param_l2": self.param_l2.to_dict(),
            "grad_l2_mean": self.grad_l2_mean.to_dict(),
            "topk": {
                str(k): {name: agg.to_dict() for name, agg in metrics.items()}
                for k, metrics in self.topk.items()
            },
        }
