"""Main solve/evaluate/check functionality behind the command line."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from .exceptions import InvalidArgumentError, ProblemFileError, SingularMatrixError
from .geometry import PointCloud, min_pairwise_distance
from .net_rbf import build_interpolation_matrix, cholesky_factorize, condition_estimate
from .optim import TrainConfig, two_phase_train
from .pde_core import TrialSolution, trial_eval
from .problems import (
    DEFAULT_GRID_RESOLUTION,
    BenchmarkCase,
    accuracy_report,
    evaluation_grid,
    resolve_problem,
    verify_manufactured,
)
from .utils import write_csv

logger = logging.getLogger(__name__)

SOLUTION_SCHEMA = 1
SOLUTION_FILE = "solution.json"
ACCURACY_FILE = "accuracy.csv"
REPORT_FILE = "report.json"
ARTIFACT_KINDS = ("solution", "accuracy", "report")


def save_json_output(results: Dict[str, Any], output_file: Union[str, Path]):
    """Save results to a JSON file."""
    with open(output_file, "w") as f:
        json.dump(results, f, indent=2)


class CollocationSolver:
    """Main class for solving problems and working with saved solutions."""

    def solve(
        self,
        problem: str,
        hidden_count: Optional[int] = None,
        config: Optional[TrainConfig] = None,
        grid_resolution: int = DEFAULT_GRID_RESOLUTION,
    ) -> Dict[str, Any]:
        """
        Train a trial solution for a built-in case or problem file.

        Args:
            problem: Built-in identifier (p1..p5) or path to a problem file
            hidden_count: Hidden units; defaults to the case's reference size
            config: Training settings
            grid_resolution: Points per axis of the accuracy grid

        Returns:
            Dictionary with the case, solution, training report and accuracy report
            (None when the problem has no analytic solution)
        """
        case = resolve_problem(problem)
        hidden = hidden_count or case.hidden_count
        logger.info("Solving %s with %d hidden units", case.identifier, hidden)
        solution, report = two_phase_train(case.problem, hidden, config or TrainConfig())

        accuracy = None
        if case.problem.analytic_solution is not None:
            accuracy = accuracy_report(solution, case, evaluation_grid(case, grid_resolution))

        return {
            "case": case,
            "solution": solution,
            "report": report,
            "accuracy": accuracy,
        }

    def solution_payload(self, case: BenchmarkCase, solution: TrialSolution) -> Dict[str, Any]:
        return {
            "schema": SOLUTION_SCHEMA,
            "problem": case.identifier,
            "lambda": solution.boundary.lam,
            **solution.to_dict(),
        }

    def report_payload(self, results: Dict[str, Any]) -> Dict[str, Any]:
        case = results["case"]
        accuracy = results["accuracy"]
        return {
            "problem": case.identifier,
            "dimension": case.dimension,
            "notes": list(case.notes),
            "training": results["report"].to_dict(),
            "accuracy": accuracy.summary() if accuracy is not None else None,
        }

    def write_artifacts(
        self,
        results: Dict[str, Any],
        out_dir: Union[str, Path],
        exports: Sequence[str] = ARTIFACT_KINDS,
    ) -> Dict[str, Path]:
        """Write the requested solution.json, accuracy.csv and report.json under out_dir."""
        unknown = set(exports) - set(ARTIFACT_KINDS)
        if unknown:
            raise InvalidArgumentError(f"unknown export formats: {', '.join(sorted(unknown))}")
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {}
        if "solution" in exports:
            paths["solution"] = out_dir / SOLUTION_FILE
            solution = self.solution_payload(results["case"], results["solution"])
            save_json_output(solution, paths["solution"])
        if "accuracy" in exports and results["accuracy"] is not None:
            paths["accuracy"] = out_dir / ACCURACY_FILE
            results["accuracy"].to_csv(paths["accuracy"])
        if "report" in exports:
            paths["report"] = out_dir / REPORT_FILE
            save_json_output(self.report_payload(results), paths["report"])
        return paths

    def load_solution(self, path: Union[str, Path]) -> TrialSolution:
        path = Path(path)
        if not path.exists():
            raise ProblemFileError(f"Solution file '{path}' not found")
        try:
            with open(path, "r") as f:
                data = json.load(f)
            if data.get("schema") != SOLUTION_SCHEMA:
                raise ProblemFileError(
                    f"'{path}': unsupported solution schema {data.get('schema')!r}"
                )
            return TrialSolution.from_dict(data)
        except json.JSONDecodeError as e:
            raise ProblemFileError(f"Invalid JSON in '{path}': {e}")
        except (KeyError, TypeError) as e:
            raise ProblemFileError(f"'{path}' is not a solution file: {e}")

    def evaluate(
        self, solution_file: Union[str, Path], points_file: Union[str, Path]
    ) -> Dict[str, Any]:
        """Evaluate a saved solution at the points of a CSV file."""
        solution = self.load_solution(solution_file)
        cloud = PointCloud.from_csv(points_file)
        if len(cloud) == 0:
            return {"points": np.empty((0, solution.dimension)), "values": np.empty(0)}
        if cloud.dimension != solution.dimension:
            raise InvalidArgumentError(
                f"solution is {solution.dimension}-D but '{points_file}' holds "
                f"{cloud.dimension}-D points"
            )
        return {"points": cloud.points, "values": np.asarray(trial_eval(solution, cloud.points))}

    def write_values(self, results: Dict[str, Any], output_file: Union[str, Path]):
        points = results["points"]
        header = ",".join([f"x{i + 1}" for i in range(points.shape[1])] + ["psi_m"])
        table = np.column_stack([points, results["values"]])
        write_csv(output_file, table, header)

    def check(self, problem: str) -> Dict[str, Any]:
        """Point counts, lambda diagnostics and factorization status of a problem."""
        case = resolve_problem(problem)
        problem_spec = case.problem
        boundary = problem_spec.boundary

        results: Dict[str, Any] = {
            "problem": case.identifier,
            "dimension": case.dimension,
            "boundary_count": boundary.count,
            "interior_count": problem_spec.interior.count,
            "expected_boundary_count": case.expected_boundary_count,
            "expected_interior_count": case.expected_interior_count,
            "lambda": boundary.lam,
            "min_distance": None,
            "closest_pair": None,
            "condition_estimate": None,
            "cholesky": "ok",
            "failed_pivot": None,
            "manufactured_residual": None,
            "notes": list(case.notes),
        }
        if boundary.count > 1:
            a, pair = min_pairwise_distance(boundary.points)
            results["min_distance"] = a
            results["closest_pair"] = list(pair)
            results["lambda_heuristic"] = 1.0 / a ** 2

        matrix = build_interpolation_matrix(boundary)
        results["condition_estimate"] = condition_estimate(matrix)
        try:
            cholesky_factorize(matrix, boundary.lam)
        except SingularMatrixError as e:
            results["cholesky"] = "failed"
            results["failed_pivot"] = e.pivot_index

        if problem_spec.analytic_solution is not None:
            results["manufactured_residual"] = verify_manufactured(case)
        return results
