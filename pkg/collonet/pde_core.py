"""
Trial solutions, collocation residuals and error functionals.

The trial solution is Psi(x) = N(x, p) + sum_l q_l exp(-lambda |x - R_l|^2).
In penalty mode q is zero and the boundary conditions enter the error as a
weighted quadratic term. In synergy mode q is re-solved from A q = b - N(R, p)
whenever p changes, so the boundary values hold exactly and the error only
sums interior residuals.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .exceptions import InvalidArgumentError
from .net_mlp import (
    MlpParams,
    mlp_eval,
    mlp_laplacian,
    mlp_laplacian_param_gradient,
    mlp_param_gradient,
)
from .net_rbf import (
    BoundarySet,
    CholeskyFactor,
    coefficient_param_jacobian,
    factorize_boundary,
    gaussian_laplacian_matrix,
    rbf_eval,
    solve_coefficients,
)
from .utils import map_reduce_ordered

logger = logging.getLogger(__name__)

PENALTY = "penalty"
SYNERGY = "synergy"

SourceFunction = Callable[[np.ndarray], np.ndarray]


class LaplacianOperator:
    """L = sum_j d^2/dx_j^2 applied to each part of the trial solution."""

    name = "laplacian"

    def apply_mlp(self, params: MlpParams, points: np.ndarray) -> np.ndarray:
        return mlp_laplacian(params, points)

    def apply_mlp_param_gradient(self, params: MlpParams, points: np.ndarray) -> np.ndarray:
        return mlp_laplacian_param_gradient(params, points)

    def apply_gaussians(self, boundary: BoundarySet, points: np.ndarray) -> np.ndarray:
        return gaussian_laplacian_matrix(boundary, points)


OPERATORS = {
    LaplacianOperator.name: LaplacianOperator(),
}


def get_operator(tag: str):
    try:
        return OPERATORS[tag]
    except KeyError:
        raise InvalidArgumentError(f"unknown operator '{tag}' (known: {sorted(OPERATORS)})")


@dataclass(frozen=True, eq=False)
class CollocationGrid:
    """Interior points r_1..r_K with the cached source values f(r_i)."""

    points: np.ndarray
    source_values: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        values = np.array(self.source_values, dtype=float, copy=True)
        if points.ndim != 2 or len(points) < 1:
            raise InvalidArgumentError(
                f"interior points must have shape (K, n), got {points.shape}"
            )
        if values.shape != (len(points),):
            raise InvalidArgumentError("source values must match the interior points")
        points.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "source_values", values)

    @classmethod
    def from_source(cls, points, source: SourceFunction) -> "CollocationGrid":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(points, np.asarray(source(points), dtype=float))

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A Dirichlet problem L Psi = f on D with Psi = b at the boundary points."""

    dimension: int
    source: SourceFunction
    boundary: BoundarySet
    interior: CollocationGrid
    operator: str = LaplacianOperator.name
    analytic_solution: Optional[SourceFunction] = None
    name: str = "problem"

    def __post_init__(self):
        get_operator(self.operator)
        if self.boundary.dimension != self.dimension:
            raise InvalidArgumentError(
                f"boundary dimension {self.boundary.dimension} "
                f"!= problem dimension {self.dimension}"
            )
        if self.interior.points.shape[1] != self.dimension:
            raise InvalidArgumentError(
                f"interior dimension {self.interior.points.shape[1]} "
                f"!= problem dimension {self.dimension}"
            )


@dataclass(frozen=True, eq=False)
class TrialSolution:
    """MLP parameters plus RBF coefficients bound to one boundary set."""

    params: MlpParams
    boundary: BoundarySet
    coefficients: np.ndarray
    mode: str = SYNERGY

    def __post_init__(self):
        if self.mode not in (PENALTY, SYNERGY):
            raise InvalidArgumentError(f"mode must be '{PENALTY}' or '{SYNERGY}'")
        if self.params.input_dim != self.boundary.dimension:
            raise InvalidArgumentError("MLP input dimension does not match the boundary")
        q = np.array(self.coefficients, dtype=float, copy=True)
        if q.shape != (self.boundary.count,):
            raise InvalidArgumentError(
                f"coefficients must have length {self.boundary.count}, got {q.shape}"
            )
        if self.mode == PENALTY and np.any(q != 0.0):
            raise InvalidArgumentError("penalty-mode coefficients must be zero")
        q.setflags(write=False)
        object.__setattr__(self, "coefficients", q)

    @classmethod
    def penalty(cls, params: MlpParams, boundary: BoundarySet) -> "TrialSolution":
        return cls(params, boundary, np.zeros(boundary.count), PENALTY)

    @classmethod
    def synergy(
        cls,
        params: MlpParams,
        boundary: BoundarySet,
        factor: Optional[CholeskyFactor] = None,
    ) -> "TrialSolution":
        """Build a synergy-mode solution with freshly solved coefficients."""
        draft = cls(params, boundary, np.zeros(boundary.count), SYNERGY)
        return refresh_coefficients(draft, factor)

    @property
    def dimension(self) -> int:
        return self.params.input_dim

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "architecture": {
                "hidden_count": self.params.hidden_count,
                "input_dim": self.params.input_dim,
            },
            "parameters": self.params.flatten().tolist(),
            "coefficients": self.coefficients.tolist(),
            "boundary": self.boundary.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrialSolution":
        arch = data["architecture"]
        params = MlpParams.from_flat(data["parameters"], arch["hidden_count"], arch["input_dim"])
        boundary = BoundarySet.from_dict(data["boundary"])
        return cls(params, boundary, data["coefficients"], data.get("mode", SYNERGY))


def trial_eval(sol: TrialSolution, x):
    value = mlp_eval(sol.params, x)
    if sol.mode == SYNERGY:
        value = value + rbf_eval(sol.coefficients, sol.boundary, x)
    return value


def refresh_coefficients(
    sol: TrialSolution, factor: Optional[CholeskyFactor] = None
) -> TrialSolution:
    """Re-solve A q = b - N(R, p) for the current MLP parameters."""
    if sol.mode != SYNERGY:
        raise InvalidArgumentError("coefficients can only be refreshed in synergy mode")
    factor = factor if factor is not None else factorize_boundary(sol.boundary)
    c = sol.boundary.values - mlp_eval(sol.params, sol.boundary.points)
    q = solve_coefficients(factor, c)
    logger.debug("Refreshed %d RBF coefficients, max |q| = %.3g", len(q), np.max(np.abs(q)))
    return TrialSolution(sol.params, sol.boundary, q, SYNERGY)


def residual(sol: TrialSolution, problem: ProblemSpec, r):
    """L Psi(r) - f(r) at one interior point or a batch of them."""
    points = np.asarray(r, dtype=float)
    if points.shape[-1] != problem.dimension or points.ndim not in (1, 2):
        raise InvalidArgumentError(
            f"expected points of dimension {problem.dimension}, got shape {points.shape}"
        )
    batch = np.atleast_2d(points)
    operator = get_operator(problem.operator)
    values = operator.apply_mlp(sol.params, batch)
    if sol.mode == SYNERGY:
        values = values + operator.apply_gaussians(sol.boundary, batch) @ sol.coefficients
    values = values - np.asarray(problem.source(batch), dtype=float)
    return float(values[0]) if points.ndim == 1 else values


def interior_error(params: MlpParams, problem: ProblemSpec) -> float:
    """sum_i (L N(r_i) - f(r_i))^2, the interior term of the penalty error."""
    operator = get_operator(problem.operator)
    res = operator.apply_mlp(params, problem.interior.points) - problem.interior.source_values
    return float(np.sum(res * res))


def boundary_max_error(sol: TrialSolution) -> float:
    """max_i |Psi(R_i) - b_i|."""
    values = trial_eval(sol, sol.boundary.points)
    return float(np.max(np.abs(values - sol.boundary.values)))


def penalty_error(
    params: MlpParams, problem: ProblemSpec, eta: float, threads: int = 0
) -> Tuple[float, np.ndarray]:
    """
    E(p, eta) = sum_i (L N(r_i) - f(r_i))^2 + eta * sum_l (N(R_l) - b_l)^2.

    Returns the value and its gradient in canonical p order.
    """
    if eta <= 0:
        raise InvalidArgumentError(f"eta must be positive, got {eta}")
    operator = get_operator(problem.operator)
    interior = problem.interior

    def chunk_terms(rows: slice):
        points = interior.points[rows]
        res = operator.apply_mlp(params, points) - interior.source_values[rows]
        grad = 2.0 * res @ operator.apply_mlp_param_gradient(params, points)
        return float(res @ res), grad

    value, grad = map_reduce_ordered(chunk_terms, interior.count, threads)

    boundary = problem.boundary
    misfit = mlp_eval(params, boundary.points) - boundary.values
    value += eta * float(misfit @ misfit)
    grad = grad + 2.0 * eta * misfit @ mlp_param_gradient(params, boundary.points)
    return value, grad


def synergy_error(
    params: MlpParams,
    problem: ProblemSpec,
    factor: Optional[CholeskyFactor] = None,
    threads: int = 0,
) -> Tuple[float, np.ndarray]:
    """
    E(p) = sum_i (L Psi(r_i) - f(r_i))^2 with q re-solved for p.

    The gradient adds the chain term through dq/dp = -A^{-1} dN(R, p)/dp, with
    dL(Psi)/dq_l being the Laplacian of the l-th Gaussian.
    """
    boundary = problem.boundary
    factor = factor if factor is not None else factorize_boundary(boundary)
    operator = get_operator(problem.operator)
    interior = problem.interior

    q = solve_coefficients(factor, boundary.values - mlp_eval(params, boundary.points))

    def chunk_terms(rows: slice):
        points = interior.points[rows]
        gaussians = operator.apply_gaussians(boundary, points)
        res = (
            operator.apply_mlp(params, points)
            + gaussians @ q
            - interior.source_values[rows]
        )
        direct = 2.0 * res @ operator.apply_mlp_param_gradient(params, points)
        through_q = 2.0 * res @ gaussians
        return float(res @ res), direct, through_q

    value, direct, through_q = map_reduce_ordered(chunk_terms, interior.count, threads)
    dq_dp = coefficient_param_jacobian(factor, mlp_param_gradient(params, boundary.points))
    return value, direct + through_q @ dq_dp


def refit_output_weights(params: MlpParams, problem: ProblemSpec, eta: float) -> MlpParams:
    """
    Re-solve the output weights v by least squares with w and u fixed.

    N and L N are linear in v, so the penalty error restricted to v is the
    quadratic |L_v v - f|^2 + eta |N_v v - b|^2 and has a closed-form minimizer.
    """
    if eta <= 0:
        raise InvalidArgumentError(f"eta must be positive, got {eta}")
    operator = get_operator(problem.operator)
    hidden = params.hidden_count
    interior_rows = operator.apply_mlp_param_gradient(params, problem.interior.points)[:, :hidden]
    boundary_rows = mlp_param_gradient(params, problem.boundary.points)[:, :hidden]
    weight = np.sqrt(eta)
    design = np.vstack([interior_rows, weight * boundary_rows])
    target = np.concatenate([problem.interior.source_values, weight * problem.boundary.values])
    v, *_ = np.linalg.lstsq(design, target, rcond=None)
    flat = params.flatten()
    flat[:hidden] = v
    return MlpParams.from_flat(flat, hidden, params.input_dim)
