import json
import math

import numpy as np
import pytest

from conftest import fd_input_gradient, fd_mixed_derivative, fd_param_gradient, random_net, rel_err
from xstab.errors import DomainError, ShapeError, UnsupportedError
from xstab.mlp import (
    ActivationSpec,
    MlpParams,
    flatten_params,
    forward,
    forward_batch,
    input_gradient,
    loss,
    loss_batch,
    mixed_derivative_1hidden,
    param_gradient,
    params_from_json,
    params_to_json,
    unflatten_params,
)

LN2 = 0.6931471805599453


def identity_net(activation):
    layers = ((np.array([[1.0]]), np.array([0.0])), (np.array([[1.0]]), np.array([0.0])))
    return MlpParams(layers, activation)


class TestForward:
    def test_identity_relu_composition(self):
        assert forward(np.array([2.0]), identity_net(ActivationSpec.relu())) == 2.0

    def test_softplus_at_zero_is_ln2(self):
        p = identity_net(ActivationSpec.softplus(1.0))
        assert forward(np.array([0.0]), p) == pytest.approx(LN2, abs=1e-15)

    def test_matches_straight_line_matrix_oracle(self):
        # Independent evaluator: explicit matrix products without any of the
        # package's layer plumbing.
        rng = np.random.default_rng(7)
        p = random_net(rng, (18, 50, 1), ActivationSpec.softplus(2.0))
        x = rng.normal(size=18)
        (w1, b1), (w2, b2) = p.layers
        z = w1 @ x + b1
        a = np.log1p(np.exp(2.0 * z)) / 2.0
        want = float(w2 @ a + b2)
        assert rel_err(forward(x, p), want) < 1e-12

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            forward(np.zeros(3), identity_net(ActivationSpec.relu()))

    def test_affine_single_layer_net(self):
        p = MlpParams(((np.array([[2.0, -1.0]]), np.array([0.5])),), ActivationSpec.relu())
        assert forward(np.array([1.0, 1.0]), p) == pytest.approx(1.5)

    def test_softplus_stable_at_extreme_preactivations(self):
        p = identity_net(ActivationSpec.softplus(5.0))
        assert forward(np.array([300.0]), p) == pytest.approx(300.0)
        assert forward(np.array([-300.0]), p) == pytest.approx(0.0, abs=1e-12)


class TestLoss:
    def test_logit_zero_both_labels(self):
        p = MlpParams(((np.zeros((1, 2)), np.zeros(1)),), ActivationSpec.relu())
        x = np.array([3.0, -4.0])
        assert loss(x, 1, p) == pytest.approx(LN2, abs=1e-15)
        assert loss(x, 0, p) == pytest.approx(LN2, abs=1e-15)

    def test_logit_three_label_one(self):
        # hand oracle: -ln sigmoid(3) = ln(1 + e^-3)
        want = math.log1p(math.exp(-3.0))
        p = MlpParams(((np.zeros((1, 1)), np.array([3.0])),), ActivationSpec.relu())
        assert loss(np.array([0.0]), 1, p) == pytest.approx(want, rel=1e-12)
        assert want == pytest.approx(0.048587, abs=1e-6)

    def test_non_binary_label_rejected(self):
        p = identity_net(ActivationSpec.relu())
        with pytest.raises(DomainError):
            loss(np.array([1.0]), 2, p)

    def test_loss_nonnegative_and_stable_for_huge_logits(self):
        p = MlpParams(((np.zeros((1, 1)), np.array([800.0])),), ActivationSpec.relu())
        assert loss(np.array([0.0]), 1, p) == 0.0
        assert loss(np.array([0.0]), 0, p) == 800.0


class TestInputGradient:
    def test_zero_weights_give_zero_vector(self):
        p = MlpParams(
            ((np.zeros((3, 4)), np.zeros(3)), (np.zeros((1, 3)), np.zeros(1))),
            ActivationSpec.relu(),
        )
        assert np.array_equal(input_gradient(np.ones(4), p), np.zeros(4))

    def test_identity_relu_locally_linear(self):
        g = input_gradient(np.array([2.0]), identity_net(ActivationSpec.relu()))
        assert np.array_equal(g, np.array([1.0]))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        p = random_net(rng, (5, 7, 4, 1), ActivationSpec.softplus(4.0))
        x = rng.normal(size=5)
        assert rel_err(input_gradient(x, p), fd_input_gradient(x, p)) < 1e-5

    def test_relu_subgradient_at_kink_is_zero(self):
        # One hidden unit exactly at its kink: its path contributes nothing.
        p = MlpParams(
            ((np.array([[1.0]]), np.array([0.0])), (np.array([[5.0]]), np.array([0.0]))),
            ActivationSpec.relu(),
        )
        assert input_gradient(np.array([0.0]), p)[0] == 0.0


class TestParamGradient:
    def test_weight_decay_contribution_is_2_gamma_theta(self):
        p = MlpParams(((np.array([[1.0]]), np.array([0.25])),), ActivationSpec.relu())
        X, y = np.array([[0.5]]), np.array([1])
        bare = flatten_params(param_gradient(X, y, p, gamma=0.0))
        reg = flatten_params(param_gradient(X, y, p, gamma=0.01))
        np.testing.assert_allclose(reg - bare, 2 * 0.01 * flatten_params(p), rtol=0, atol=1e-15)
        assert (reg - bare)[0] == pytest.approx(0.02, abs=1e-15)

    def test_matches_finite_differences_single_sample(self):
        rng = np.random.default_rng(3)
        p = random_net(rng, (4, 6, 1))
        X = rng.normal(size=(1, 4))
        y = np.array([1])
        got = flatten_params(param_gradient(X, y, p, gamma=0.0))
        assert rel_err(got, fd_param_gradient(X, y, p)) < 1e-5

    def test_batch_of_identical_samples_equals_single(self):
        rng = np.random.default_rng(4)
        p = random_net(rng, (3, 5, 1))
        x = rng.normal(size=3)
        single = flatten_params(param_gradient(x[None, :], np.array([0]), p))
        double = flatten_params(param_gradient(np.vstack([x, x]), np.array([0, 0]), p))
        np.testing.assert_array_equal(single, double)

    def test_empty_batch_rejected(self):
        p = identity_net(ActivationSpec.relu())
        with pytest.raises(DomainError):
            param_gradient(np.zeros((0, 1)), np.zeros(0), p)


class TestMixedDerivative:
    def test_zero_w2_kills_w1_blocks(self):
        rng = np.random.default_rng(5)
        w1 = rng.normal(size=(4, 3))
        b1 = rng.normal(size=4)
        p = MlpParams(((w1, b1), (np.zeros((1, 4)), np.zeros(1))), ActivationSpec.softplus(2.0))
        x = rng.normal(size=3)
        m = mixed_derivative_1hidden(x, p)
        w1_rows = m[: 4 * 3 + 4]  # W1 block plus b1 block
        assert np.array_equal(w1_rows, np.zeros_like(w1_rows))
        s1 = 1.0 / (1.0 + np.exp(-2.0 * (w1 @ x + b1)))
        np.testing.assert_allclose(m[4 * 3 + 4 : 4 * 3 + 4 + 4], s1[:, None] * w1, atol=1e-12)

    def test_all_zero_params_give_zero_matrix(self):
        p = MlpParams(
            ((np.zeros((4, 3)), np.zeros(4)), (np.zeros((1, 4)), np.zeros(1))),
            ActivationSpec.softplus(2.0),
        )
        m = mixed_derivative_1hidden(np.ones(3), p)
        assert np.array_equal(m, np.zeros_like(m))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        p = random_net(rng, (3, 4, 1), ActivationSpec.softplus(3.0))
        x = rng.normal(size=3)
        m = mixed_derivative_1hidden(x, p)
        m_fd = fd_mixed_derivative(x, p)
        assert np.isfinite(np.linalg.norm(m))
        assert rel_err(m, m_fd) < 1e-4

    def test_deeper_nets_rejected(self):
        rng = np.random.default_rng(7)
        p = random_net(rng, (3, 4, 4, 1))
        with pytest.raises(UnsupportedError):
            mixed_derivative_1hidden(np.zeros(3), p)


class TestGradientCorrectnessSweep:
    def test_input_and_param_gradients_on_100_seeded_nets(self):
        for seed in range(100):
            rng = np.random.default_rng(1000 + seed)
            dims = (rng.integers(2, 6), rng.integers(2, 7), 1)
            beta = float(rng.uniform(1.0, 8.0))
            p = random_net(rng, dims, ActivationSpec.softplus(beta))
            x = rng.normal(size=dims[0])
            assert rel_err(input_gradient(x, p), fd_input_gradient(x, p)) < 1e-5
            X = rng.normal(size=(3, dims[0]))
            y = rng.integers(0, 2, 3)
            got = flatten_params(param_gradient(X, y, p, gamma=0.01))
            assert rel_err(got, fd_param_gradient(X, y, p, gamma=0.01)) < 1e-5


class TestSoftplusReluLimit:
    def test_gap_shrinks_monotonically_in_beta(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            relu_p = random_net(rng, (4, 6, 1), ActivationSpec.relu())
            x = rng.normal(size=4)
            # keep the probe away from kinks so the limit is clean
            z = relu_p.layers[0][0] @ x + relu_p.layers[0][1]
            if np.abs(z).min() < 0.05:
                x = x + 0.2
            f_relu = forward(x, relu_p)
            gaps = []
            for beta in (2.0, 5.0, 10.0, 100.0):
                sp = MlpParams(relu_p.layers, ActivationSpec.softplus(beta))
                gaps.append(abs(forward(x, sp) - f_relu))
            assert all(a >= b for a, b in zip(gaps, gaps[1:]))
            assert gaps[-1] < 1e-2


def test_relu_one_hidden_homogeneity():
    rng = np.random.default_rng(9)
    p = random_net(rng, (3, 5, 1), ActivationSpec.relu(), bias_scale=0.0)
    x = rng.normal(size=3)
    for c in (0.5, 2.0, 7.3):
        assert forward(c * x, p) == pytest.approx(c * forward(x, p), rel=1e-12)


class TestSerialization:
    def test_json_round_trip_is_bit_stable(self):
        rng = np.random.default_rng(10)
        p = random_net(rng, (4, 3, 1), ActivationSpec.softplus(2.5))
        text = params_to_json(p)
        q = params_from_json(text)
        assert q.activation == p.activation
        for (w1, b1), (w2, b2) in zip(p.layers, q.layers):
            assert np.array_equal(w1, w2)
            assert np.array_equal(b1, b2)
        assert params_to_json(q) == text

    def test_json_schema_fields(self):
        p = identity_net(ActivationSpec.softplus(2.0))
        doc = json.loads(params_to_json(p))
        assert doc["activation"] == {"kind": "softplus", "beta": 2.0}
        assert doc["layers"][0]["w"] == [[1.0]]
        assert doc["layers"][0]["b"] == [0.0]


class TestValidation:
    def test_final_width_must_be_one(self):
        with pytest.raises(ShapeError):
            MlpParams(((np.zeros((2, 3)), np.zeros(2)),), ActivationSpec.relu())

    def test_chained_dims_enforced(self):
        with pytest.raises(ShapeError):
            MlpParams(
                ((np.zeros((2, 3)), np.zeros(2)), (np.zeros((1, 5)), np.zeros(1))),
                ActivationSpec.relu(),
            )

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            MlpParams(((np.array([[np.inf]]), np.zeros(1)),), ActivationSpec.relu())

    def test_bad_activation(self):
        with pytest.raises(DomainError):
            ActivationSpec("tanh")
        with pytest.raises(DomainError):
            ActivationSpec.softplus(0.0)

    def test_params_are_immutable(self):
        p = identity_net(ActivationSpec.relu())
        with pytest.raises(ValueError):
            p.layers[0][0][0, 0] = 5.0

    def test_flatten_round_trip(self):
        rng = np.random.default_rng(12)
        p = random_net(rng, (3, 4, 1))
        flat = flatten_params(p)
        q = unflatten_params(flat, p)
        np.testing.assert_array_equal(flatten_params(q), flat)

    def test_batch_forward_matches_scalar(self):
        rng = np.random.default_rng(13)
        p = random_net(rng, (4, 5, 1))
        X = rng.normal(size=(6, 4))
        batch = forward_batch(X, p)
        for i in range(6):
            assert batch[i] == forward(X[i], p)

    def test_loss_batch_matches_scalar(self):
        rng = np.random.default_rng(14)
        p = random_net(rng, (3, 4, 1))
        X = rng.normal(size=(4, 3))
        y = np.array([0, 1, 1, 0])
        lb = loss_batch(X, y, p)
        for i in range(4):
            assert lb[i] == pytest.approx(loss(X[i], int(y[i]), p), rel=1e-15)
