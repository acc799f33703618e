"""Shared fixtures and finite-difference helpers."""

import numpy as np
import pytest

from collonet.geometry import circle_boundary, select_lambda, tensor_grid
from collonet.net_mlp import MlpParams
from collonet.net_rbf import BoundarySet
from collonet.pde_core import CollocationGrid, ProblemSpec

MINI_HIDDEN = 3


def mini_solution(points):
    points = np.atleast_2d(points)
    return points[:, 0] ** 2 + points[:, 1] ** 2 + points[:, 0] * points[:, 1]


def mini_source(points):
    return np.full(len(np.atleast_2d(points)), 4.0)


def central_gradient(func, x, step=1e-6):
    """Central differences of a scalar function over every coordinate of x."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        offset = np.zeros_like(x)
        offset[i] = step
        grad[i] = (func(x + offset) - func(x - offset)) / (2.0 * step)
    return grad


def relative_error(actual, expected):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(np.max(np.abs(expected)), 1e-12)
    return float(np.max(np.abs(actual - expected)) / scale)


def random_params(rng, hidden_count, input_dim, scale=2.0):
    size = hidden_count * (input_dim + 2)
    return MlpParams.from_flat(rng.uniform(-scale, scale, size), hidden_count, input_dim)


def build_problem(
    boundary_points, interior_points, solution=mini_solution, source=mini_source, lam=None
):
    boundary_points = np.asarray(boundary_points, dtype=float)
    lam = lam if lam is not None else select_lambda(boundary_points)
    return ProblemSpec(
        dimension=boundary_points.shape[1],
        source=source,
        boundary=BoundarySet(boundary_points, solution(boundary_points), lam),
        interior=CollocationGrid.from_source(interior_points, source),
        analytic_solution=solution,
        name="mini",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def mini_problem():
    """Poisson problem with M=6 boundary points on the unit circle and K=9 interior points."""
    interior = tensor_grid([[-0.4, 0.0, 0.4], [-0.4, 0.0, 0.4]])
    return build_problem(circle_boundary(6).points, interior)


@pytest.fixture
def zero_problem():
    """f = 0 and b = 0, solved exactly by the zero network."""
    interior = tensor_grid([[-0.4, 0.0, 0.4], [-0.4, 0.0, 0.4]])

    def zero(points):
        return np.zeros(len(np.atleast_2d(points)))

    return build_problem(circle_boundary(6).points, interior, solution=zero, source=zero)
