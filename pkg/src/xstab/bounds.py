"""Stability bounds: computation and empirical validation hooks.

Three inequalities are computed and checked against observations:

* Parameter-shift bound: after refitting on shifted data under weight
  decay gamma, ||theta2 - theta1|| <= sqrt(L * dist / gamma) + C, where
  L is the loss-input Lipschitz constant of the base model, dist the
  mean matched dataset distance, and C an offset from the gap between
  the two optima's loss values.
* Gradient-shift bound: the mean input-gradient gap over a test
  distribution is at most the mean directional derivative of the
  gradient along the parameter segment times ||theta2 - theta1||.
* Mixed-norm bound (one hidden layer, smooth activation): the expected
  Frobenius norm of the parameter-input second derivative over
  x ~ N(0, I) is at most ||theta_w||_2 + beta * path_norm(theta), with
  beta the activation's curvature constant and theta_w the weights
  without biases, mirroring the bias-free derivation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .datasets import Dataset
from .errors import DegenerateError, DomainError, UnsupportedError
from .mlp import (
    MlpParams,
    flatten_params,
    forward_batch,
    input_gradient_batch,
    loss_batch,
    mixed_derivative_1hidden,
    unflatten_params,
)
from .rng import make_rng
from .stability import gradient_distance, param_distance


def loss_input_gradients(params: MlpParams, ds: Dataset) -> np.ndarray:
    """Per-sample gradients of the cross-entropy loss w.r.t. the input."""
    residual = expit(forward_batch(ds.features, params)) - ds.labels
    return residual[:, None] * input_gradient_batch(ds.features, params)


def lipschitz_estimate(params: MlpParams, datasets, safety_factor: float = 1.5) -> float:
    """Empirical loss-input Lipschitz constant of one model.

    Max over all points of all provided datasets of ||grad_x loss||_2,
    inflated by a safety factor (default 1.5) to cover the territory
    between observed points.
    """
    datasets = list(datasets)
    if not datasets:
        raise DomainError("need at least one dataset")
    worst = 0.0
    for ds in datasets:
        norms = np.linalg.norm(loss_input_gradients(params, ds), axis=1)
        worst = max(worst, float(norms.max()))
    return worst * safety_factor


def param_shift_bound(lipschitz: float, dataset_distance: float, gamma: float, offset: float) -> float:
    """Upper bound sqrt(L * dist / gamma) + offset on the parameter shift.

    Undefined without weight decay: the bound's curvature floor comes
    from the 2*gamma term of the regularized Hessian.
    """
    if not gamma > 0:
        raise DomainError(f"parameter-shift bound requires gamma > 0, got {gamma}")
    if lipschitz < 0 or dataset_distance < 0 or offset < 0:
        raise DomainError("bound inputs must be non-negative")
    return float(np.sqrt(lipschitz * dataset_distance / gamma) + offset)


def loss_gap_offset(loss_original: float, loss_shifted: float, gamma: float) -> float:
    """Offset sqrt(max(0, loss1 - loss2) / gamma) from unequal optimal losses.

    The losses are the regularized optima on their own datasets; a
    negative empirical gap contributes nothing (clamped at zero).
    """
    if not gamma > 0:
        raise DomainError(f"offset requires gamma > 0, got {gamma}")
    return float(np.sqrt(max(0.0, loss_original - loss_shifted) / gamma))


def regularized_loss(params: MlpParams, ds: Dataset, gamma: float) -> float:
    """Mean data loss plus gamma * ||theta||^2 (weights and biases)."""
    data = float(np.mean(loss_batch(ds.features, ds.labels, params)))
    return data + gamma * float(np.sum(flatten_params(params) ** 2))


def path_norm(params: MlpParams) -> float:
    """2-path-norm sqrt(sum_jk (W2_k * W1_kj)^2) of a 1-hidden-layer net."""
    if len(params.layers) != 2:
        raise UnsupportedError(
            f"path norm is defined for exactly one hidden layer, got {len(params.layers) - 1}"
        )
    (w1, _), (w2, _) = params.layers
    return float(np.linalg.norm(w2[0][:, None] * w1))


def weight_norm(params: MlpParams) -> float:
    """L2 norm over weight matrices only, excluding biases."""
    return float(np.sqrt(sum(float(np.sum(w**2)) for w, _ in params.layers)))


def mixed_norm_bound(params: MlpParams, beta: float) -> float:
    """Analytic bound ||theta_w||_2 + beta * path_norm on the expected mixed norm."""
    if beta < 0:
        raise DomainError(f"beta must be >= 0, got {beta}")
    return weight_norm(params) + beta * path_norm(params)


def mixed_norm_estimate(params: MlpParams, n_samples: int, seed: int) -> float:
    """Monte-Carlo mean over x ~ N(0, I) of ||d^2 f / dx dtheta||_F.

    The Frobenius norm upper-bounds the spectral norm, so this estimate
    is directly comparable with :func:`mixed_norm_bound`.
    """
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    d = params.input_dim
    xs = make_rng(seed).normal(size=(n_samples, d))
    norms = [np.linalg.norm(mixed_derivative_1hidden(x, params)) for x in xs]
    return float(np.mean(norms))


def directional_grad_lipschitz(
    p1: MlpParams,
    p2: MlpParams,
    data: Dataset | np.ndarray,
    n_lambda: int = 9,
    fd_step: float = 1e-4,
) -> float:
    """Mean directional derivative of the input gradient along the segment.

    With u the unit vector from theta1 to theta2, averages over a uniform
    lambda grid on [0, 1] (endpoints included) and over the data rows the
    central-difference estimate of ||d/du grad_x f(x; theta_lambda)||_2.
    This is the integrand of the gradient-shift bound evaluated along the
    one direction that matters, so it lower-bounds the full
    gradient-parameter Lipschitz constant while keeping the bound tight.
    """
    if n_lambda < 2:
        raise DomainError(f"n_lambda must be >= 2, got {n_lambda}")
    if not fd_step > 0:
        raise DomainError(f"fd_step must be positive, got {fd_step}")
    f1 = flatten_params(p1)
    f2 = flatten_params(p2)
    if f1.shape != f2.shape or p1.dims != p2.dims:
        raise DomainError(f"architectures differ: {p1.dims} vs {p2.dims}")
    gap = np.linalg.norm(f2 - f1)
    if gap == 0.0:
        raise DegenerateError("theta1 equals theta2; the segment direction is undefined")
    u = (f2 - f1) / gap
    X = data.features if isinstance(data, Dataset) else np.atleast_2d(data)
    means = []
    for lam in np.linspace(0.0, 1.0, n_lambda):
        mid = f1 + lam * (f2 - f1)
        g_hi = input_gradient_batch(X, unflatten_params(mid + fd_step * u, p1))
        g_lo = input_gradient_batch(X, unflatten_params(mid - fd_step * u, p1))
        deriv = (g_hi - g_lo) / (2.0 * fd_step)
        means.append(np.linalg.norm(deriv, axis=1).mean())
    return float(np.mean(means))


@dataclass
class BoundReport:
    """Computed bound values with the observations they are checked against.

    Fields are None where a bound is undefined for the given models
    (no weight decay for the parameter-shift bound; depth != 1 hidden
    layer or non-smooth activation for the mixed-norm bound).
    ``holds[name]`` records observed <= bound for each defined bound.
    """

    gamma: float
    beta: float | None
    lipschitz: float | None = None
    dataset_distance: float | None = None
    offset: float | None = None
    param_shift_bound: float | None = None
    observed_param_shift: float | None = None
    grad_shift_observed: float | None = None
    grad_shift_bound: float | None = None
    directional_lipschitz: float | None = None
    mixed_norm_estimate: float | None = None
    mixed_norm_bound: float | None = None
    path_norm: float | None = None
    n_lambda: int = 9
    fd_step: float = 1e-4
    holds: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "beta": self.beta,
            "lipschitz": self.lipschitz,
            "dataset_distance": self.dataset_distance,
            "offset": self.offset,
            "param_shift_bound": self.param_shift_bound,
            "observed_param_shift": self.observed_param_shift,
            "grad_shift_observed": self.grad_shift_observed,
            "grad_shift_bound": self.grad_shift_bound,
            "directional_lipschitz": self.directional_lipschitz,
            "mixed_norm_estimate": self.mixed_norm_estimate,
            "mixed_norm_bound": self.mixed_norm_bound,
            "path_norm": self.path_norm,
            "n_lambda": self.n_lambda,
            "fd_step": self.fd_step,
            "holds": dict(self.holds),
        }


def compute_bound_report(
    p1: MlpParams,
    p2: MlpParams,
    d1: Dataset,
    d2: Dataset,
    gamma: float,
    test: Dataset | None = None,
    beta: float | None = None,
    n_lambda: int = 9,
    fd_step: float = 1e-4,
    mc_samples: int = 2000,
    mc_seed: int = 0,
) -> BoundReport:
    """Full bound evaluation for a (base, shifted) model pair.

    ``d1``/``d2`` are the original and shifted training sets; ``test``
    (default ``d1``) supplies the distribution for gradient distances.
    ``beta`` defaults to the softplus sharpness when the activation is
    softplus, and the mixed-norm bound is skipped otherwise.
    """
    from .matching import hungarian_distance  # local import to avoid cycle at module load

    if test is None:
        test = d1
    if beta is None and p1.activation.kind == "softplus":
        beta = p1.activation.beta
    report = BoundReport(gamma=gamma, beta=beta, n_lambda=n_lambda, fd_step=fd_step)

    report.observed_param_shift = param_distance(p1, p2)
    report.lipschitz = lipschitz_estimate(p1, [d1, d2])
    report.dataset_distance = hungarian_distance(d1, d2).mean_cost
    if gamma > 0:
        report.offset = loss_gap_offset(
            regularized_loss(p1, d1, gamma), regularized_loss(p2, d2, gamma), gamma
        )
        report.param_shift_bound = param_shift_bound(
            report.lipschitz, report.dataset_distance, gamma, report.offset
        )
        report.holds["param_shift"] = report.observed_param_shift <= report.param_shift_bound

    report.grad_shift_observed = gradient_distance(p1, p2, test)
    if report.observed_param_shift > 0:
        report.directional_lipschitz = directional_grad_lipschitz(
            p1, p2, test, n_lambda=n_lambda, fd_step=fd_step
        )
        report.grad_shift_bound = report.directional_lipschitz * report.observed_param_shift
        report.holds["grad_shift"] = report.grad_shift_observed <= report.grad_shift_bound * 1.05

    if len(p1.layers) == 2 and p1.activation.kind == "softplus" and beta is not None:
        report.path_norm = path_norm(p1)
        report.mixed_norm_bound = mixed_norm_bound(p1, beta)
        report.mixed_norm_estimate = mixed_norm_estimate(p1, mc_samples, mc_seed)
        report.holds["mixed_norm"] = report.mixed_norm_estimate <= report.mixed_norm_bound
    return report
