"""SGD training with weight decay and stepped learning-rate decay.

Three entry points share one loop: ``train`` starts from a seeded
initialization, ``retrain`` does the same but with an explicitly chosen
init seed (so a shifted run can reuse the base model's initialization),
and ``fine_tune`` continues from converged parameters. Everything is
deterministic given the dataset bytes and the config: the per-epoch
shuffle stream is derived from ``(seed, epoch)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .datasets import Dataset
from .errors import DivergenceError, DomainError, ShapeError
from .mlp import ActivationSpec, MlpParams, forward_batch, loss_batch, param_gradient
from .rng import derive_seed, make_rng


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one SGD run.

    ``decay_value`` multiplies the learning rate every
    ``decay_step_size`` epochs; 1.0 means no decay. ``gamma`` is the
    weight-decay coefficient of the regularized objective
    mean_loss + gamma*||theta||^2, applied inside the gradient (coupled
    decay), so the pull toward zero scales with the learning rate.
    """

    epochs: int
    learning_rate: float
    decay_value: float = 1.0
    decay_step_size: int = 1
    batch_size: int = 32
    gamma: float = 0.0
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.decay_value <= 1:
            raise DomainError(f"decay_value must be in (0, 1], got {self.decay_value}")
        if self.decay_step_size < 1:
            raise DomainError(f"decay_step_size must be >= 1, got {self.decay_step_size}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.gamma < 0:
            raise DomainError(f"gamma must be >= 0, got {self.gamma}")

    def lr_at(self, epoch: int) -> float:
        """Effective learning rate at 0-based epoch: lr * decay^floor(e/step)."""
        return self.learning_rate * self.decay_value ** (epoch // self.decay_step_size)


@dataclass
class TrainTrace:
    """Per-epoch snapshots of one run. ``params`` is filled on request."""

    epoch: list[int] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    params: list[MlpParams] = field(default_factory=list)

    def to_csv(self, path) -> None:
        """Write epoch, lr, train_loss, train_acc, test_acc at 6 significant digits."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,lr,train_loss,train_acc,test_acc\n")
            for i in range(len(self.epoch)):
                fh.write(
                    f"{self.epoch[i]},{self.lr[i]:.6g},{self.train_loss[i]:.6g},"
                    f"{self.train_acc[i]:.6g},{self.test_acc[i]:.6g}\n"
                )


def init_params(dims, activation: ActivationSpec, seed: int) -> MlpParams:
    """Seeded initialization: weights uniform in +-sqrt(1/fan_in), biases zero.

    ``dims`` is the full width chain, e.g. ``(20, 50, 50, 1)``; the last
    entry must be 1.
    """
    dims = tuple(int(v) for v in dims)
    if len(dims) < 2:
        raise ShapeError(f"dims needs at least input and output widths, got {dims}")
    if dims[-1] != 1:
        raise ShapeError(f"output width must be 1, got {dims[-1]}")
    rng = make_rng(seed)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(1.0 / fan_in)
        layers.append((rng.uniform(-bound, bound, (fan_out, fan_in)), np.zeros(fan_out)))
    return MlpParams(tuple(layers), activation)


def sgd_step(params: MlpParams, X: np.ndarray, y: np.ndarray, lr: float, gamma: float) -> MlpParams:
    """One update theta <- theta - lr * (batch gradient + 2*gamma*theta)."""
    if not lr > 0:
        raise DomainError(f"lr must be positive, got {lr}")
    grad = param_gradient(X, y, params, gamma)
    new_layers = []
    for (w, b), (gw, gb) in zip(params.layers, grad.layers):
        nw = w - lr * gw
        nb = b - lr * gb
        if not (np.isfinite(nw).all() and np.isfinite(nb).all()):
            raise DivergenceError("non-finite parameter update (exploding loss)")
        new_layers.append((nw, nb))
    return MlpParams(tuple(new_layers), params.activation)


def accuracy(params: MlpParams, ds: Dataset) -> float:
    """Fraction of samples whose logit sign matches the label."""
    pred = forward_batch(ds.features, params) > 0.0
    return float(np.mean(pred == (ds.labels == 1)))


def _run_sgd(
    start: MlpParams,
    ds: Dataset,
    config: TrainConfig,
    test: Dataset | None,
    record_params: bool,
) -> tuple[MlpParams, TrainTrace]:
    if ds.d != start.input_dim:
        raise ShapeError(f"dataset has {ds.d} features, network expects {start.input_dim}")
    params = start
    trace = TrainTrace()
    n = ds.n
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        if config.shuffle:
            order = make_rng(derive_seed(config.seed, "shuffle", epoch)).permutation(n)
        else:
            order = np.arange(n)
        Xs, ys = ds.features[order], ds.labels[order]
        try:
            for lo in range(0, n, config.batch_size):
                hi = lo + config.batch_size
                params = sgd_step(params, Xs[lo:hi], ys[lo:hi], lr, config.gamma)
        except DivergenceError as err:
            raise DivergenceError(f"{err} at epoch {epoch}", epoch=epoch) from None
        ep_loss = float(np.mean(loss_batch(ds.features, ds.labels, params)))
        if not np.isfinite(ep_loss):
            raise DivergenceError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
        trace.epoch.append(epoch)
        trace.lr.append(lr)
        trace.train_loss.append(ep_loss)
        trace.train_acc.append(accuracy(params, ds))
        trace.test_acc.append(accuracy(params, test) if test is not None else float("nan"))
        if record_params:
            trace.params.append(params)
    return params, trace


def train(
    ds: Dataset,
    dims,
    activation: ActivationSpec,
    config: TrainConfig,
    test: Dataset | None = None,
    record_params: bool = False,
) -> tuple[MlpParams, TrainTrace]:
    """Train from the seeded initialization given by ``config.seed``."""
    if ds.n == 0:
        raise DomainError("dataset is empty")
    start = init_params(dims, activation, config.seed)
    return _run_sgd(start, ds, config, test, record_params)


def fine_tune(
    base: MlpParams,
    ds: Dataset,
    config: TrainConfig,
    test: Dataset | None = None,
    record_params: bool = False,
) -> tuple[MlpParams, TrainTrace]:
    """Continue training from ``base`` on (typically shifted) data."""
    return _run_sgd(base, ds, config, test, record_params)


def retrain(
    base_seed: int,
    ds: Dataset,
    dims,
    activation: ActivationSpec,
    config: TrainConfig,
    test: Dataset | None = None,
    record_params: bool = False,
) -> tuple[MlpParams, TrainTrace]:
    """Train from scratch on shifted data, reusing the base model's init seed."""
    return train(ds, dims, activation, replace(config, seed=base_seed), test, record_params)
