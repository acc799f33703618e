"""Tests for the perceptron and its closed-form derivatives."""

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from collonet.exceptions import InvalidArgumentError
from collonet.net_mlp import (
    MlpParams,
    mlp_eval,
    mlp_laplacian,
    mlp_laplacian_param_gradient,
    mlp_param_gradient,
    mlp_pure_derivative,
    parameter_bounds,
    sigmoid_k,
)

from conftest import central_gradient, random_params, relative_error


def test_sigmoid_values_at_zero():
    assert sigmoid_k(0.0, 0) == 0.5
    assert sigmoid_k(0.0, 1) == 0.25
    assert sigmoid_k(0.0, 2) == 0.0


def test_sigmoid_identities(rng):
    z = rng.uniform(-30, 30, 1000)
    s = sigmoid_k(z, 0)
    assert_allclose(sigmoid_k(z, 1), s * (1 - s), rtol=0, atol=1e-14)
    assert_allclose(sigmoid_k(-z, 0), 1 - s, rtol=0, atol=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_sigmoid_derivatives_match_finite_differences(order):
    z = np.linspace(-4, 4, 17)
    step = 1e-5
    fd = (sigmoid_k(z + step, order - 1) - sigmoid_k(z - step, order - 1)) / (2 * step)
    assert_allclose(sigmoid_k(z, order), fd, rtol=1e-6, atol=1e-10)


def test_sigmoid_large_arguments_do_not_overflow():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        values = sigmoid_k(np.array([-1000.0, 1000.0]), 0)
        slopes = sigmoid_k(np.array([-1000.0, 1000.0]), 3)
    assert_allclose(values, [0.0, 1.0])
    assert np.all(np.isfinite(slopes))


def test_sigmoid_rejects_unknown_order():
    with pytest.raises(InvalidArgumentError):
        sigmoid_k(0.0, 4)


def test_flat_layout_is_v_then_w_then_u():
    params = MlpParams(
        output_weights=[1.0, 2.0],
        input_weights=[[3.0, 4.0], [5.0, 6.0]],
        biases=[7.0, 8.0],
    )
    assert_allclose(params.flatten(), np.arange(1.0, 9.0))
    assert params.size == 8
    rebuilt = MlpParams.from_flat(np.arange(1.0, 9.0), 2, 2)
    assert_allclose(rebuilt.input_weights, [[3.0, 4.0], [5.0, 6.0]])


def test_params_are_read_only(rng):
    params = MlpParams.random(4, 2, rng)
    with pytest.raises(ValueError):
        params.biases[0] = 1.0


def test_params_reject_non_finite():
    with pytest.raises(InvalidArgumentError):
        MlpParams([1.0], [[np.nan]], [0.0])


def test_random_params_lie_in_unit_box(rng):
    p = MlpParams.random(20, 3, rng).flatten()
    assert p.shape == (100,)
    assert np.all(np.abs(p) <= 1.0)


def test_parameter_bounds_leave_output_weights_free():
    lower, upper = parameter_bounds(2, 3, -20.0, 20.0)
    assert np.all(np.isinf(lower[:2])) and np.all(np.isinf(upper[:2]))
    assert np.all(lower[2:] == -20.0) and np.all(upper[2:] == 20.0)


def test_zero_params_give_zero_network():
    params = MlpParams.zeros(5, 2)
    assert mlp_eval(params, [0.3, -0.2]) == 0.0


def test_eval_matches_direct_summation(rng):
    params = random_params(rng, 4, 2)
    x = rng.uniform(-1, 1, 2)
    expected = 0.0
    for i in range(4):
        z = sum(params.input_weights[i, j] * x[j] for j in range(2)) + params.biases[i]
        expected += params.output_weights[i] / (1.0 + np.exp(-z))
    assert abs(mlp_eval(params, x) - expected) <= 1e-14


def test_eval_single_point_and_batch_agree(rng):
    params = random_params(rng, 4, 3)
    points = rng.uniform(-1, 1, (5, 3))
    batch = mlp_eval(params, points)
    assert batch.shape == (5,)
    assert isinstance(mlp_eval(params, points[2]), float)
    assert mlp_eval(params, points[2]) == pytest.approx(batch[2], rel=1e-14, abs=1e-14)


def test_eval_is_linear_in_output_weights(rng):
    params = random_params(rng, 6, 2)
    doubled = MlpParams(2 * params.output_weights, params.input_weights, params.biases)
    x = rng.uniform(-1, 1, (10, 2))
    assert_allclose(mlp_eval(doubled, x), 2 * mlp_eval(params, x), rtol=1e-15)


def test_eval_rejects_wrong_dimension(rng):
    params = random_params(rng, 4, 2)
    with pytest.raises(InvalidArgumentError):
        mlp_eval(params, [0.1, 0.2, 0.3])


def test_input_derivatives_match_finite_differences(rng):
    for _ in range(100):
        params = random_params(rng, 5, 2)
        x = rng.uniform(-2, 2, 2)
        for axis in range(2):
            offset = np.zeros(2)
            offset[axis] = 1e-6
            fd1 = (mlp_eval(params, x + offset) - mlp_eval(params, x - offset)) / 2e-6
            assert mlp_pure_derivative(params, x, axis, 1) == pytest.approx(fd1, rel=1e-5, abs=1e-8)

            offset[axis] = 1e-4
            forward, center, backward = (
                mlp_eval(params, x + offset),
                mlp_eval(params, x),
                mlp_eval(params, x - offset),
            )
            fd2 = (forward - 2 * center + backward) / 1e-8
            assert mlp_pure_derivative(params, x, axis, 2) == pytest.approx(fd2, rel=1e-4, abs=1e-6)


def test_pure_derivative_rejects_bad_axis_and_order(rng):
    params = random_params(rng, 3, 2)
    with pytest.raises(InvalidArgumentError):
        mlp_pure_derivative(params, [0.0, 0.0], 2, 1)
    with pytest.raises(InvalidArgumentError):
        mlp_pure_derivative(params, [0.0, 0.0], 0, 3)


def test_laplacian_is_sum_of_second_derivatives(rng):
    params = random_params(rng, 6, 2)
    x = rng.uniform(-1, 1, (8, 2))
    total = mlp_pure_derivative(params, x, 0, 2) + mlp_pure_derivative(params, x, 1, 2)
    assert_allclose(mlp_laplacian(params, x), total, rtol=1e-13, atol=1e-14)


def test_laplacian_matches_five_point_stencil(rng):
    params = random_params(rng, 6, 2)
    h = 1e-3
    for x in rng.uniform(-1, 1, (20, 2)):
        stencil = (
            mlp_eval(params, x + [h, 0])
            + mlp_eval(params, x - [h, 0])
            + mlp_eval(params, x + [0, h])
            + mlp_eval(params, x - [0, h])
            - 4 * mlp_eval(params, x)
        ) / h ** 2
        assert mlp_laplacian(params, x) == pytest.approx(stencil, rel=1e-4, abs=1e-5)


def test_param_gradient_matches_finite_differences(rng):
    for _ in range(100):
        params = random_params(rng, 4, 3)
        x = rng.uniform(-2, 2, 3)

        def value(p):
            return mlp_eval(MlpParams.from_flat(p, 4, 3), x)

        fd = central_gradient(value, params.flatten())
        assert relative_error(mlp_param_gradient(params, x), fd) <= 1e-5


def test_laplacian_param_gradient_matches_finite_differences(rng):
    for _ in range(100):
        params = random_params(rng, 4, 2)
        x = rng.uniform(-2, 2, 2)

        def laplacian(p):
            return mlp_laplacian(MlpParams.from_flat(p, 4, 2), x)

        fd = central_gradient(laplacian, params.flatten())
        assert relative_error(mlp_laplacian_param_gradient(params, x), fd) <= 1e-4


def test_batch_gradients_have_one_row_per_point(rng):
    params = random_params(rng, 4, 2)
    points = rng.uniform(-1, 1, (7, 2))
    assert mlp_param_gradient(params, points).shape == (7, 16)
    assert mlp_laplacian_param_gradient(params, points).shape == (7, 16)
    assert_allclose(mlp_param_gradient(params, points)[3], mlp_param_gradient(params, points[3]))


def test_laplacian_param_gradient_single_unit_by_hand():
    v, w1, w2, u = 0.7, -1.3, 0.4, 0.2
    x = np.array([0.3, -0.8])
    params = MlpParams([v], [[w1, w2]], [u])
    z = w1 * x[0] + w2 * x[1] + u
    norm = w1 ** 2 + w2 ** 2
    s2, s3 = sigmoid_k(z, 2), sigmoid_k(z, 3)
    expected = [
        norm * s2,
        v * (2 * w1 * s2 + norm * x[0] * s3),
        v * (2 * w2 * s2 + norm * x[1] * s3),
        v * norm * s3,
    ]
    assert_allclose(mlp_laplacian_param_gradient(params, x), expected, rtol=0, atol=1e-13)
