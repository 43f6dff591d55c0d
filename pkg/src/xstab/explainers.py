"""Feature-attribution explainers and top-K signed feature extraction.

Four explainers share one contract: given network parameters and an
input, produce a d-vector of importance scores for the raw logit.

* saliency: the input gradient itself.
* smoothgrad: mean input gradient over Gaussian-perturbed copies.
* lime: weighted ridge fit of the logit on local Gaussian perturbations,
  weighted by an exponential proximity kernel.
* kernel_shap: Shapley-value approximation via a weighted linear fit
  over feature coalitions against a background reference, with the
  efficiency identity sum(phi) = f(x) - f(background) enforced exactly.

All are deterministic functions of (params, x, hyperparameters, seed).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import DomainError, ShapeError
from .mlp import MlpParams, forward_batch, input_gradient, input_gradient_batch
from .rng import derive_seed, make_rng

SALIENCY = "saliency"
SMOOTHGRAD = "smoothgrad"
LIME = "lime"
KERNEL_SHAP = "kshap"

METHODS = (SALIENCY, SMOOTHGRAD, LIME, KERNEL_SHAP)


@dataclass(frozen=True)
class Attribution:
    """Per-feature importance scores for one input under one explainer."""

    values: np.ndarray
    method: str
    input_id: object = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise ShapeError(f"attribution must be a vector, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise DomainError("attribution contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class TopKSet:
    """The k largest-magnitude features as ``(index, sign)`` pairs.

    Entries are ordered by descending magnitude; ties break toward the
    lower index. Signs are -1, 0, or +1 (an exactly-zero attribution
    carries sign 0).
    """

    entries: tuple[tuple[int, int], ...]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    def as_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.entries)


def top_k(attr: Attribution, k: int) -> TopKSet:
    v = attr.values
    if not 1 <= k <= v.size:
        raise DomainError(f"k must be in [1, {v.size}], got {k}")
    order = sorted(range(v.size), key=lambda i: (-abs(v[i]), i))[:k]
    return TopKSet(tuple((i, int(np.sign(v[i]))) for i in order))


def saliency(params: MlpParams, x: np.ndarray, input_id=None) -> Attribution:
    """Input gradient of the logit."""
    return Attribution(input_gradient(x, params), SALIENCY, input_id)


def smoothgrad(
    params: MlpParams,
    x: np.ndarray,
    noise_sigma: float,
    n_samples: int,
    seed: int,
    input_id=None,
) -> Attribution:
    """Mean input gradient over ``n_samples`` draws of x + N(0, noise_sigma^2 I)."""
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    if noise_sigma < 0:
        raise DomainError(f"noise_sigma must be >= 0, got {noise_sigma}")
    x = np.asarray(x, dtype=np.float64)
    if noise_sigma == 0.0:
        # Averaging identical gradients must reproduce saliency bit-exactly.
        return Attribution(input_gradient(x, params), SMOOTHGRAD, input_id)
    eps = make_rng(seed).normal(0.0, noise_sigma, size=(n_samples, x.size))
    grads = input_gradient_batch(x[None, :] + eps, params)
    return Attribution(grads.mean(axis=0), SMOOTHGRAD, input_id)


def lime(
    params: MlpParams,
    x: np.ndarray,
    n_samples: int = 1000,
    kernel_width: float | None = None,
    ridge_lambda: float = 1e-6,
    perturb_sigma: float = 1.0,
    seed: int = 0,
    input_id=None,
) -> Attribution:
    """Local linear surrogate: weighted ridge of the logit on perturbations.

    Perturbations are z ~ N(x, perturb_sigma^2 I); each carries weight
    exp(-||z - x||^2 / kernel_width^2). The surrogate regresses f(z) on
    (z - x) with an unpenalized intercept; the slope vector is the
    attribution. ``kernel_width`` defaults to 0.75 * sqrt(d), the usual
    tabular heuristic on standardized features.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.size
    if n_samples < d + 2:
        raise DomainError(f"n_samples must be >= d + 2 = {d + 2}, got {n_samples}")
    if kernel_width is None:
        kernel_width = 0.75 * np.sqrt(d)
    rng = make_rng(seed)
    offsets = rng.normal(0.0, perturb_sigma, size=(n_samples, d))
    y = forward_batch(x[None, :] + offsets, params)
    w = np.exp(-np.sum(offsets**2, axis=1) / kernel_width**2)

    design = np.hstack([np.ones((n_samples, 1)), offsets])
    wd = design * w[:, None]
    normal = design.T @ wd
    penalty = np.full(d + 1, ridge_lambda)
    penalty[0] = 0.0  # intercept is not shrunk
    normal[np.diag_indices_from(normal)] += penalty
    try:
        coef = np.linalg.solve(normal, wd.T @ y)
    except np.linalg.LinAlgError as err:
        raise DomainError(f"singular weighted system in local fit: {err}") from None
    return Attribution(coef[1:], LIME, input_id)


def _shapley_kernel_weight(d: int, size: int) -> float:
    return (d - 1) / (comb(d, size) * size * (d - size))


def _sample_coalitions(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Distinct non-trivial coalition masks, shape (m, d) boolean.

    Enumerates everything when the budget covers all 2^d - 2 masks;
    otherwise samples without replacement with probability proportional
    to the Shapley kernel weight (uniform within each coalition size).
    """
    total = 2**d - 2
    if total <= n:
        masks = np.zeros((total, d), dtype=bool)
        for i, bits in enumerate(range(1, 2**d - 1)):
            masks[i] = [(bits >> j) & 1 for j in range(d)]
        return masks
    sizes = np.arange(1, d)
    per_mask_weight = (d - 1) / (sizes * (d - sizes))
    remaining = np.array([comb(d, int(s)) for s in sizes], dtype=np.float64)
    seen: set[tuple[int, ...]] = set()
    masks = np.zeros((n, d), dtype=bool)
    for row in range(n):
        level = per_mask_weight * remaining
        s = int(rng.choice(sizes, p=level / level.sum()))
        while True:
            subset = tuple(sorted(rng.choice(d, size=s, replace=False).tolist()))
            if subset not in seen:
                break
        seen.add(subset)
        remaining[s - 1] -= 1
        masks[row, list(subset)] = True
    return masks


def kernel_shap(
    params: MlpParams,
    x: np.ndarray,
    background: np.ndarray,
    n_coalitions: int = 512,
    ridge_lambda: float = 1e-6,
    seed: int = 0,
    input_id=None,
) -> Attribution:
    """Shapley values via the kernel-weighted linear fit on masked inputs.

    A coalition S evaluates the model at z(S) = x on S, background off S.
    The empty and full coalitions are always included; they pin the
    intercept f(background) and the efficiency constraint
    sum(phi) = f(x) - f(background), which is enforced exactly by
    eliminating the last feature's coefficient.
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    d = x.size
    if d < 2:
        raise DomainError(f"kernel SHAP needs d >= 2, got d={d}")
    if background.shape != x.shape:
        raise ShapeError(f"background shape {background.shape} != input shape {x.shape}")
    if n_coalitions < d + 2:
        raise DomainError(f"n_coalitions must be >= d + 2 = {d + 2}, got {n_coalitions}")

    masks = _sample_coalitions(d, n_coalitions - 2, make_rng(seed))
    inputs = np.where(masks, x[None, :], background[None, :])
    v = forward_batch(inputs, params)
    v0 = float(forward_batch(background[None, :], params)[0])
    v1 = float(forward_batch(x[None, :], params)[0])
    delta = v1 - v0

    sizes = masks.sum(axis=1)
    weights = np.array([_shapley_kernel_weight(d, int(s)) for s in sizes])
    # Eliminate phi_{d-1} via the efficiency constraint.
    m = masks.astype(np.float64)
    design = m[:, :-1] - m[:, -1:]
    target = (v - v0) - m[:, -1] * delta
    wd = design * weights[:, None]
    normal = design.T @ wd
    normal[np.diag_indices_from(normal)] += ridge_lambda
    try:
        phi_head = np.linalg.solve(normal, wd.T @ target)
    except np.linalg.LinAlgError as err:
        raise DomainError(f"singular weighted system in coalition fit: {err}") from None
    phi = np.append(phi_head, delta - phi_head.sum())
    return Attribution(phi, KERNEL_SHAP, input_id)


def explain_batch(
    params: MlpParams,
    X: np.ndarray,
    method: str,
    seed: int = 0,
    background: np.ndarray | None = None,
    **hyper,
) -> np.ndarray:
    """Attribution matrix ``(n, d)`` for every row of X under one explainer.

    Stochastic methods give row i its own stream derived from
    ``(seed, i)``, so per-sample results do not depend on batch order or
    size. Saliency is computed in one vectorized pass; smoothgrad batches
    all perturbed copies into a single gradient evaluation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    if method == SALIENCY:
        return input_gradient_batch(X, params)
    if method == SMOOTHGRAD:
        noise_sigma = hyper.get("noise_sigma", 0.5)
        n_samples = hyper.get("n_samples", 64)
        if noise_sigma == 0.0:
            return input_gradient_batch(X, params)
        eps = np.stack(
            [
                make_rng(derive_seed(seed, "sample", i)).normal(
                    0.0, noise_sigma, size=(n_samples, d)
                )
                for i in range(n)
            ]
        )
        pert = (X[:, None, :] + eps).reshape(n * n_samples, d)
        grads = input_gradient_batch(pert, params).reshape(n, n_samples, d)
        return grads.mean(axis=1)
    if method == LIME:
        return np.stack(
            [lime(params, X[i], seed=derive_seed(seed, "sample", i), **hyper).values for i in range(n)]
        )
    if method == KERNEL_SHAP:
        if background is None:
            raise DomainError("kernel SHAP needs a background reference vector")
        return np.stack(
            [
                kernel_shap(
                    params, X[i], background, seed=derive_seed(seed, "sample", i), **hyper
                ).values
                for i in range(n)
            ]
        )
    raise DomainError(f"unknown explainer method {method!r}; expected one of {METHODS}")
