"""Shared helpers: random network factories and finite-difference oracles.

The finite-difference functions are deliberately independent of the
package's backpropagation code paths: they only call ``forward`` /
``input_gradient`` at perturbed points, so they can serve as oracles for
the analytic gradients.
"""

import numpy as np

from xstab.mlp import (
    ActivationSpec,
    MlpParams,
    flatten_params,
    forward,
    input_gradient,
    loss_batch,
    unflatten_params,
)


def random_net(rng, dims, activation=None, weight_scale=1.0, bias_scale=0.3):
    if activation is None:
        activation = ActivationSpec.softplus(3.0)
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.uniform(-1.0, 1.0, (fan_out, fan_in)) * weight_scale / np.sqrt(fan_in)
        b = rng.uniform(-bias_scale, bias_scale, fan_out)
        layers.append((w, b))
    return MlpParams(tuple(layers), activation)


def fd_input_gradient(x, params, h=1e-5):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (forward(x + e, params) - forward(x - e, params)) / (2 * h)
    return out


def fd_param_gradient(X, y, params, gamma=0.0, h=1e-5):
    flat = flatten_params(params)

    def objective(fl):
        p = unflatten_params(fl, params)
        return float(np.mean(loss_batch(X, y, p)) + gamma * np.sum(fl**2))

    out = np.zeros_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        out[i] = (objective(flat + e) - objective(flat - e)) / (2 * h)
    return out


def fd_mixed_derivative(x, params, h=1e-5):
    flat = flatten_params(params)
    rows = np.zeros((flat.size, np.asarray(x).size))
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        g_hi = input_gradient(x, unflatten_params(flat + e, params))
        g_lo = input_gradient(x, unflatten_params(flat - e, params))
        rows[i] = (g_hi - g_lo) / (2 * h)
    return rows


def rel_err(got, want):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = max(float(np.linalg.norm(want)), 1e-300)
    return float(np.linalg.norm(got - want)) / denom
