"""Scalar-output multilayer perceptron with hand-rolled differentiation.

Conventions used throughout:

* Weight matrices are ``(out, in)``; biases are ``(out,)``. A network is
  an ordered list of such layers, with the activation applied after
  every layer except the last, so the final layer emits a raw scalar
  logit. A single-layer network (no hidden widths) is plain affine.
* All arithmetic is float64. Finite-difference checks at 1e-5 steps are
  the main correctness oracle and are meaningless in float32.
* Input gradients differentiate the *logit*, not the sigmoid probability
  or the loss. Attribution signs then match the sign of the feature's
  push on the raw score.
* ReLU uses subgradient 0 at exactly 0, which is deterministic and a
  measure-zero event for continuous features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, ShapeError, UnsupportedError

RELU = "relu"
SOFTPLUS = "softplus"


@dataclass(frozen=True)
class ActivationSpec:
    """Pointwise nonlinearity: ReLU, or softplus with sharpness ``beta``.

    Softplus is the beta-parameterized form (1/beta)*ln(1 + e^(beta*x)),
    computed in a form that is exact in the asymptotes (|beta*x| > ~30
    collapses to the linear/zero branch without overflow). Its first
    derivative is sigmoid(beta*x) and its second derivative peaks at
    beta/4. ``beta`` is ignored for ReLU.
    """

    kind: str
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in (RELU, SOFTPLUS):
            raise DomainError(f"unknown activation kind: {self.kind!r}")
        if self.kind == SOFTPLUS and not self.beta > 0:
            raise DomainError(f"softplus beta must be positive, got {self.beta}")

    @classmethod
    def relu(cls) -> "ActivationSpec":
        return cls(RELU)

    @classmethod
    def softplus(cls, beta: float) -> "ActivationSpec":
        return cls(SOFTPLUS, float(beta))

    def value(self, z: np.ndarray) -> np.ndarray:
        if self.kind == RELU:
            return np.maximum(z, 0.0)
        t = self.beta * z
        return (np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))) / self.beta

    def deriv(self, z: np.ndarray) -> np.ndarray:
        if self.kind == RELU:
            return np.where(z > 0.0, 1.0, 0.0)
        return expit(self.beta * z)

    def second_deriv(self, z: np.ndarray) -> np.ndarray:
        if self.kind == RELU:
            return np.zeros_like(z)
        p = expit(self.beta * z)
        return self.beta * p * (1.0 - p)


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class MlpParams:
    """Immutable network parameters: ordered ``(weight, bias)`` layers.

    Layer dimensions must chain and the final output width must be 1.
    Instances are safe to share across concurrent evaluators; the
    underlying arrays are marked read-only.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    activation: ActivationSpec

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        frozen = []
        prev_out = None
        for i, (w, b) in enumerate(self.layers):
            w = _freeze(w)
            b = _freeze(b)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape} mismatch")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ShapeError(
                    f"layer {i}: expects {w.shape[1]} inputs, previous layer emits {prev_out}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise DomainError(f"layer {i}: non-finite parameter entries")
            prev_out = w.shape[0]
            frozen.append((w, b))
        if prev_out != 1:
            raise ShapeError(f"final layer must have width 1, got {prev_out}")
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(w.shape[0] for w, _ in self.layers)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.dims[1:-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def map(self, fn) -> "MlpParams":
        """New params with ``fn`` applied to every weight and bias array."""
        return MlpParams(
            tuple((fn(w), fn(b)) for w, b in self.layers), self.activation
        )


def flatten_params(params: MlpParams) -> np.ndarray:
    """Canonical 1-D view: per layer, row-major weights then bias."""
    parts = []
    for w, b in params.layers:
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def unflatten_params(flat: np.ndarray, template: MlpParams) -> MlpParams:
    """Inverse of :func:`flatten_params` against a shape template."""
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (template.n_params,):
        raise ShapeError(f"expected {template.n_params} entries, got {flat.shape}")
    layers = []
    pos = 0
    for w, b in template.layers:
        layers.append(
            (
                flat[pos : pos + w.size].reshape(w.shape),
                flat[pos + w.size : pos + w.size + b.size],
            )
        )
        pos += w.size + b.size
    return MlpParams(tuple(layers), template.activation)


def params_to_json(params: MlpParams) -> str:
    """Serialize to JSON. Floats use shortest-round-trip encoding, so the
    decode of the encode is bit-identical for finite doubles."""
    doc = {
        "activation": {"kind": params.activation.kind, "beta": params.activation.beta},
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in params.layers],
    }
    return json.dumps(doc)


def params_from_json(text: str) -> MlpParams:
    doc = json.loads(text)
    act = doc["activation"]
    activation = ActivationSpec(act["kind"], float(act.get("beta", 1.0)))
    layers = tuple(
        (np.asarray(layer["w"], dtype=np.float64), np.asarray(layer["b"], dtype=np.float64))
        for layer in doc["layers"]
    )
    return MlpParams(layers, activation)


def _check_input(x: np.ndarray, params: MlpParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ShapeError(f"input shape {x.shape}, network expects ({params.input_dim},)")
    return x


def _check_batch(X: np.ndarray, params: MlpParams) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.input_dim:
        raise ShapeError(f"batch has {X.shape[1]} features, network expects {params.input_dim}")
    return X


def forward_batch(X: np.ndarray, params: MlpParams) -> np.ndarray:
    """Logits for a batch of rows, shape ``(n,)``."""
    X = _check_batch(X, params)
    a = X
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        z = a @ w.T + b
        a = z if i == last else params.activation.value(z)
    return a[:, 0]


def forward(x: np.ndarray, params: MlpParams) -> float:
    """Scalar logit f(x, theta)."""
    return float(forward_batch(_check_input(x, params)[None, :], params)[0])


def bce_loss_from_logit(logit: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Binary cross-entropy of sigmoid(logit) against y in {0,1}.

    Uses the log-sum-exp form max(f,0) - f*y + log(1 + e^-|f|), which is
    exact and overflow-free for any logit.
    """
    logit = np.asarray(logit, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.maximum(logit, 0.0) - logit * y + np.log1p(np.exp(-np.abs(logit)))


def loss(x: np.ndarray, y: int, params: MlpParams) -> float:
    """Cross-entropy loss of one sample; ``y`` must be 0 or 1."""
    if y not in (0, 1):
        raise DomainError(f"label must be 0 or 1, got {y!r}")
    return float(bce_loss_from_logit(forward(x, params), float(y)))


def loss_batch(X: np.ndarray, y: np.ndarray, params: MlpParams) -> np.ndarray:
    y = np.asarray(y)
    if not np.isin(y, (0, 1)).all():
        raise DomainError("labels must be binary")
    return bce_loss_from_logit(forward_batch(X, params), y.astype(np.float64))


def _forward_trace(X: np.ndarray, params: MlpParams):
    """Forward pass retaining pre-activations and activations per layer."""
    pre, act = [], [X]
    a = X
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else params.activation.value(z)
        act.append(a)
    return pre, act


def input_gradient_batch(X: np.ndarray, params: MlpParams) -> np.ndarray:
    """Gradient of the logit w.r.t. each input row, shape ``(n, d)``."""
    X = _check_batch(X, params)
    pre, _ = _forward_trace(X, params)
    # Backpropagate d(logit)/d(activation) down to the input.
    delta = np.ones((X.shape[0], 1))
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        delta = delta @ w
        if i > 0:
            delta = delta * params.activation.deriv(pre[i - 1])
    return delta


def input_gradient(x: np.ndarray, params: MlpParams) -> np.ndarray:
    """Gradient of the logit w.r.t. the input, shape ``(d,)``."""
    return input_gradient_batch(_check_input(x, params)[None, :], params)[0]


def param_gradient(X: np.ndarray, y: np.ndarray, params: MlpParams, gamma: float = 0.0) -> MlpParams:
    """Gradient of mean batch loss plus gamma*||theta||^2 over all parameters.

    Returns an ``MlpParams``-shaped container holding the gradient. The
    regularizer covers weights and biases alike, contributing 2*gamma*theta.
    """
    X = _check_batch(X, params)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise DomainError("empty batch")
    if y.shape != (X.shape[0],):
        raise ShapeError(f"labels shape {y.shape} does not match batch of {X.shape[0]}")
    if gamma < 0:
        raise DomainError(f"gamma must be >= 0, got {gamma}")
    n = X.shape[0]
    pre, act = _forward_trace(X, params)
    # d(mean loss)/d(logit) per sample.
    delta = (expit(pre[-1][:, 0]) - y)[:, None] / n
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)  # type: ignore[list-item]
    for i in range(len(params.layers) - 1, -1, -1):
        w, b = params.layers[i]
        gw = delta.T @ act[i] + 2.0 * gamma * w
        gb = delta.sum(axis=0) + 2.0 * gamma * b
        grads[i] = (gw, gb)
        if i > 0:
            delta = (delta @ w) * params.activation.deriv(pre[i - 1])
    return MlpParams(tuple(grads), params.activation)


def mixed_derivative_1hidden(x: np.ndarray, params: MlpParams) -> np.ndarray:
    """Second derivatives d^2 f / dx_i dtheta_p for a 1-hidden-layer net.

    Returns a ``(n_params, d)`` matrix whose rows follow the canonical
    flatten order (W1 row-major, b1, W2, b2). With z = W1 x + b1 the
    analytic blocks are

    * W2 rows:  sigma'(z_j) * W1[j, i]
    * W1 rows:  W2_j * sigma''(z_j) * W1[j, i] * x_m, plus
                W2_j * sigma'(z_j) on the m == i diagonal
    * b1 rows:  W2_j * sigma''(z_j) * W1[j, i]  (bias shifts z exactly
                like a constant input, so only the curvature term survives)
    * b2 row:   zero

    ReLU is accepted but its second derivative is 0 almost everywhere, so
    the curvature terms vanish; softplus is the intended activation.
    """
    if len(params.layers) != 2:
        raise UnsupportedError(
            f"mixed derivative is defined for exactly one hidden layer, got {len(params.layers) - 1}"
        )
    x = _check_input(x, params)
    (w1, b1), (w2, _) = params.layers
    h, d = w1.shape
    z = w1 @ x + b1
    s1 = params.activation.deriv(z)            # (h,)
    s2 = params.activation.second_deriv(z)     # (h,)
    v = w2[0]                                  # (h,)

    curv = (v * s2)[:, None] * w1              # (h, d): W2_j sigma''_j W1[j, i]
    w1_block = np.einsum("ji,m->jmi", curv, x)
    w1_block[:, np.arange(d), np.arange(d)] += (v * s1)[:, None]
    w2_block = s1[:, None] * w1                # (h, d)

    return np.concatenate(
        [
            w1_block.reshape(h * d, d),
            curv,                              # b1 rows
            w2_block,
            np.zeros((1, d)),                  # b2 row
        ],
        axis=0,
    )
