"""
Box-constrained BFGS and the two-phase training strategy.

Phase one fits the MLP alone with the penalty error. Phase two starts from
those parameters and minimizes the synergy error, where the RBF layer makes
the boundary values exact.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .exceptions import (
    InvalidArgumentError,
    InvalidStartError,
    LineSearchError,
    SingularMatrixError,
)
from .geometry import min_pairwise_distance
from .net_mlp import MlpParams, parameter_bounds
from .net_rbf import factorize_boundary
from .pde_core import (
    ProblemSpec,
    TrialSolution,
    boundary_max_error,
    interior_error,
    penalty_error,
    refit_output_weights,
    synergy_error,
)

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]
Bounds = Tuple[np.ndarray, np.ndarray]

CONVERGED = "converged"
BUDGET = "budget"
LINE_SEARCH_FAILURE = "line-search-failure"

ARMIJO_C1 = 1e-4
SHRINK_FACTOR = 0.5
MAX_BACKTRACKS = 40
CURVATURE_EPS = 1e-12


@dataclass
class TrainConfig:
    """Penalty factor, parameter box, iteration budgets and seed for training."""

    eta: float = 100.0
    box_lo: float = -20.0
    box_hi: float = 20.0
    max_iters_penalty: int = 2000
    max_iters_synergy: int = 200
    grad_tol: float = 1e-6
    seed: Optional[int] = 0
    threads: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidArgumentError(f"eta must be positive, got {self.eta}")
        if not self.box_lo < self.box_hi:
            raise InvalidArgumentError(
                f"box_lo must be below box_hi, got [{self.box_lo}, {self.box_hi}]"
            )
        if self.max_iters_penalty < 1 or self.max_iters_synergy < 1:
            raise InvalidArgumentError("iteration budgets must be at least 1")
        if not self.grad_tol > 0:
            raise InvalidArgumentError(f"grad_tol must be positive, got {self.grad_tol}")
        if self.threads < 0:
            raise InvalidArgumentError(f"threads must be non-negative, got {self.threads}")


@dataclass
class MinimizeReport:
    """Outcome of one bfgs_minimize run."""

    iterations: int
    initial_value: float
    final_value: float
    projected_grad_norm: float
    termination: str
    wall_time: float
    trajectory: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainReport:
    """Both training phases plus the problem sizes they ran on."""

    penalty: MinimizeReport
    synergy: MinimizeReport
    phase1_interior_error: float
    boundary_max_error: float
    output_refit: bool
    hidden_count: int
    boundary_count: int
    interior_count: int
    lam: float
    eta: float
    seed: Optional[int]
    wall_time: float

    @property
    def synergy_improved(self) -> bool:
        """Whether phase two ended below the phase-one interior error."""
        return self.synergy.final_value < self.phase1_interior_error

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hidden_count": self.hidden_count,
            "boundary_count": self.boundary_count,
            "interior_count": self.interior_count,
            "lambda": self.lam,
            "eta": self.eta,
            "seed": self.seed,
            "phase1_interior_error": self.phase1_interior_error,
            "boundary_max_error": self.boundary_max_error,
            "output_refit": self.output_refit,
            "synergy_improved": self.synergy_improved,
            "wall_time": self.wall_time,
            "phases": {
                "penalty": self.penalty.to_dict(),
                "synergy": self.synergy.to_dict(),
            },
        }


def projected_gradient(
    x: np.ndarray, g: np.ndarray, lower: np.ndarray, upper: np.ndarray
) -> np.ndarray:
    """Gradient with components zeroed where a bound blocks descent."""
    blocked = ((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0))
    return np.where(blocked, 0.0, g)


def _finite(value: float, grad: np.ndarray) -> bool:
    return bool(np.isfinite(value) and np.all(np.isfinite(grad)))


def bfgs_minimize(
    objective: Objective,
    x0,
    bounds: Optional[Bounds] = None,
    max_iters: int = 200,
    grad_tol: float = 1e-6,
) -> Tuple[np.ndarray, MinimizeReport]:
    """
    Minimize a value-and-gradient objective with projected BFGS.

    Each step is projected back onto the box; the Armijo backtracking search
    keeps the objective sequence non-increasing. The inverse Hessian estimate
    is reset to a scaled identity whenever the curvature condition fails.
    """
    start = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()
    if bounds is None:
        lower = np.full(x.shape, -np.inf)
        upper = np.full(x.shape, np.inf)
    else:
        lower = np.broadcast_to(np.asarray(bounds[0], dtype=float), x.shape)
        upper = np.broadcast_to(np.asarray(bounds[1], dtype=float), x.shape)
        if np.any(lower > upper):
            raise InvalidArgumentError("every lower bound must not exceed its upper bound")
    x = np.clip(x, lower, upper)

    f, g = objective(x)
    if not _finite(f, g):
        raise InvalidStartError(f"objective is not finite at the starting point (value {f})")
    trajectory = [float(f)]
    inverse_hessian = None
    termination = BUDGET
    iterations = 0

    while True:
        pg = projected_gradient(x, g, lower, upper)
        if np.max(np.abs(pg), initial=0.0) <= grad_tol:
            termination = CONVERGED
            break
        if iterations >= max_iters:
            break

        blocked = pg != g
        direction = -g if inverse_hessian is None else -(inverse_hessian @ g)
        # components pushing a coordinate through the bound it sits on
        outward = ((x <= lower) & (direction < 0)) | ((x >= upper) & (direction > 0))
        direction[blocked | outward] = 0.0
        if g @ direction >= 0:
            inverse_hessian = None
            direction = -pg

        step = 1.0
        accepted = None
        evaluated = 0
        saw_finite = False
        for _ in range(MAX_BACKTRACKS):
            x_new = np.clip(x + step * direction, lower, upper)
            s = x_new - x
            decrease = g @ s
            if decrease < 0:
                evaluated += 1
                f_new, g_new = objective(x_new)
                if _finite(f_new, g_new):
                    saw_finite = True
                    if f_new <= f + ARMIJO_C1 * decrease:
                        accepted = (x_new, s, f_new, g_new)
                        break
            step *= SHRINK_FACTOR

        if accepted is None:
            if evaluated and not saw_finite:
                raise LineSearchError(
                    f"line search found no finite objective value after {MAX_BACKTRACKS} steps"
                )
            termination = LINE_SEARCH_FAILURE
            break

        x_new, s, f_new, g_new = accepted
        y = g_new - g
        sy = s @ y
        if sy > CURVATURE_EPS * np.linalg.norm(s) * np.linalg.norm(y):
            if inverse_hessian is None:
                inverse_hessian = (sy / (y @ y)) * np.eye(len(x))
            rho = 1.0 / sy
            hy = inverse_hessian @ y
            inverse_hessian = (
                inverse_hessian
                - rho * (np.outer(s, hy) + np.outer(hy, s))
                + (rho * rho * (y @ hy) + rho) * np.outer(s, s)
            )
        else:
            inverse_hessian = None

        x, f, g = x_new, float(f_new), g_new
        trajectory.append(f)
        iterations += 1
        logger.debug("iter %d: f=%.6e |pg|=%.3e", iterations, f, np.max(np.abs(pg)))

    report = MinimizeReport(
        iterations=iterations,
        initial_value=trajectory[0],
        final_value=trajectory[-1],
        projected_grad_norm=float(
            np.max(np.abs(projected_gradient(x, g, lower, upper)), initial=0.0)
        ),
        termination=termination,
        wall_time=time.perf_counter() - start,
        trajectory=trajectory,
    )
    return x, report


def two_phase_train(
    problem: ProblemSpec, hidden_count: int, config: Optional[TrainConfig] = None
) -> Tuple[TrialSolution, TrainReport]:
    """
    Penalty phase, then synergy refinement from the penalty-phase parameters.

    Returns a synergy-mode solution whose RBF coefficients match its final MLP.
    """
    config = config or TrainConfig()
    start = time.perf_counter()
    dim = problem.dimension
    rng = np.random.default_rng(config.seed)
    params0 = MlpParams.random(hidden_count, dim, rng)
    bounds = parameter_bounds(hidden_count, dim, config.box_lo, config.box_hi)

    def unpack(p: np.ndarray) -> MlpParams:
        return MlpParams.from_flat(p, hidden_count, dim)

    logger.info(
        "Phase 1 (penalty, eta=%g): H=%d, M=%d, K=%d",
        config.eta, hidden_count, problem.boundary.count, problem.interior.count,
    )
    p1, penalty_report = bfgs_minimize(
        lambda p: penalty_error(unpack(p), problem, config.eta, config.threads),
        params0.flatten(),
        bounds,
        config.max_iters_penalty,
        config.grad_tol,
    )
    refit = refit_output_weights(unpack(p1), problem, config.eta)
    refit_value, _ = penalty_error(refit, problem, config.eta, config.threads)
    output_refit = bool(refit_value < penalty_report.final_value)
    if output_refit:
        logger.debug(
            "Output weight refit lowered E from %.6e to %.6e",
            penalty_report.final_value, refit_value,
        )
        p1 = refit.flatten()
        penalty_report.final_value = float(refit_value)
        penalty_report.trajectory.append(float(refit_value))
    phase1_interior = interior_error(unpack(p1), problem)
    logger.info(
        "Phase 1 finished (%s) after %d iterations: E=%.6e, interior=%.6e",
        penalty_report.termination, penalty_report.iterations,
        penalty_report.final_value, phase1_interior,
    )

    try:
        factor = factorize_boundary(problem.boundary)
    except SingularMatrixError as e:
        message = str(e)
        if problem.boundary.count > 1:
            a, _ = min_pairwise_distance(problem.boundary.points)
            message += f"; minimum boundary distance a={a:.6g} suggests lambda={1.0 / a ** 2:.6g}"
        raise SingularMatrixError(message, e.pivot_index, e.lam) from e

    logger.info("Phase 2 (synergy, lambda=%g)", problem.boundary.lam)
    p2, synergy_report = bfgs_minimize(
        lambda p: synergy_error(unpack(p), problem, factor, config.threads),
        p1,
        bounds,
        config.max_iters_synergy,
        config.grad_tol,
    )
    solution = TrialSolution.synergy(unpack(p2), problem.boundary, factor)
    bc_error = boundary_max_error(solution)
    logger.info(
        "Phase 2 finished (%s) after %d iterations: E=%.6e, max boundary error=%.3e",
        synergy_report.termination, synergy_report.iterations,
        synergy_report.final_value, bc_error,
    )

    report = TrainReport(
        penalty=penalty_report,
        synergy=synergy_report,
        phase1_interior_error=phase1_interior,
        boundary_max_error=bc_error,
        output_refit=output_refit,
        hidden_count=hidden_count,
        boundary_count=problem.boundary.count,
        interior_count=problem.interior.count,
        lam=problem.boundary.lam,
        eta=config.eta,
        seed=config.seed,
        wall_time=time.perf_counter() - start,
    )
    if not report.synergy_improved:
        logger.warning(
            "Synergy error %.6e did not drop below the penalty-phase interior error %.6e; "
            "consider a larger synergy iteration budget",
            synergy_report.final_value, phase1_interior,
        )
    return solution, report
