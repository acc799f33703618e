"""Command-line interface for collocation solves."""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .exceptions import CollonetError, InvalidArgumentError
from .optim import LINE_SEARCH_FAILURE, TrainConfig
from .problems import DEFAULT_GRID_RESOLUTION
from .solver import ARTIFACT_KINDS, CollocationSolver

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

EXPORT_FORMATS = ARTIFACT_KINDS


@dataclass
class RunConfig:
    """Everything a `solve` run needs, gathered from the command line."""

    problem: str
    hidden_count: Optional[int] = None
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: Path = Path("collonet-run")
    grid_resolution: int = DEFAULT_GRID_RESOLUTION
    exports: List[str] = field(default_factory=lambda: list(EXPORT_FORMATS))

    def __post_init__(self):
        if not self.problem:
            raise InvalidArgumentError("a problem selector is required")
        if self.hidden_count is not None and self.hidden_count < 1:
            raise InvalidArgumentError(f"--hidden must be positive, got {self.hidden_count}")
        if self.grid_resolution < 2:
            raise InvalidArgumentError(f"--grid-res must be at least 2, got {self.grid_resolution}")
        unknown = set(self.exports) - set(EXPORT_FORMATS)
        if unknown:
            raise InvalidArgumentError(f"unknown export formats: {', '.join(sorted(unknown))}")
        self.out_dir = Path(self.out_dir)


def format_solve_results(results: Dict[str, Any]) -> str:
    """Format a solve run for text display."""
    case = results["case"]
    report = results["report"]
    output = [
        f"Problem: {case.identifier} ({case.dimension}-D)",
        f"Network: H={report.hidden_count}, M={report.boundary_count}, "
        f"K={report.interior_count}, lambda={report.lam:.6g}",
    ]
    for name, phase in (("Penalty", report.penalty), ("Synergy", report.synergy)):
        output.append(
            f"{name} phase: {phase.iterations} iterations, "
            f"E {phase.initial_value:.6e} -> {phase.final_value:.6e} ({phase.termination})"
        )
    output.append(f"Max boundary error: {report.boundary_max_error:.3e}")
    verdict = "below" if report.synergy_improved else "NOT below"
    output.append(
        f"Synergy error {report.synergy.final_value:.6e} is {verdict} the penalty-phase "
        f"interior error {report.phase1_interior_error:.6e}"
    )

    accuracy = results["accuracy"]
    if accuracy is not None:
        output.append(
            f"Accuracy on {len(accuracy.points)} grid points: max={accuracy.max_error:.3e}, "
            f"mean={accuracy.mean_error:.3e}, rms={accuracy.rms_error:.3e}"
        )
    for note in case.notes:
        output.append(f"Note: {note}")
    return "\n".join(output)


def format_check_results(results: Dict[str, Any]) -> str:
    """Format a problem check for text display."""
    output = [f"Problem: {results['problem']} ({results['dimension']}-D)"]

    counts = f"M={results['boundary_count']}, K={results['interior_count']}"
    expected = (results["expected_boundary_count"], results["expected_interior_count"])
    if any(value is not None for value in expected):
        counts += f" (reference M={expected[0]}, K={expected[1]})"
    output.append(counts)

    if results["min_distance"] is not None:
        i, j = results["closest_pair"]
        output.append(f"a={results['min_distance']:.6g} (points {i} and {j})")
    output.append(f"lambda={results['lambda']:.6g}")
    output.append(f"condition estimate={results['condition_estimate']:.3e}")
    if results["cholesky"] == "ok":
        output.append("cholesky: ok")
    else:
        output.append(
            f"cholesky: FAILED at pivot {results['failed_pivot']} "
            f"(lambda={results['lambda']:.6g} is too small for this boundary)"
        )
    if results["manufactured_residual"] is not None:
        output.append(f"manufactured residual={results['manufactured_residual']:.3e}")
    for note in results["notes"]:
        output.append(f"Note: {note}")
    return "\n".join(output)


def _box_bounds(values: Optional[List[float]]) -> Dict[str, float]:
    if values is None:
        return {}
    if len(values) == 1:
        return {"box_lo": -abs(values[0]), "box_hi": abs(values[0])}
    if len(values) == 2:
        return {"box_lo": values[0], "box_hi": values[1]}
    raise InvalidArgumentError("--box takes one bound B (for [-B, B]) or two bounds LO HI")


def build_run_config(args) -> RunConfig:
    overrides = {
        "eta": args.eta,
        "seed": args.seed,
        "max_iters_penalty": args.iters_penalty,
        "max_iters_synergy": args.iters_synergy,
        "grad_tol": args.grad_tol,
    }
    overrides = {key: value for key, value in overrides.items() if value is not None}
    overrides.update(_box_bounds(args.box))
    return RunConfig(
        problem=args.problem,
        hidden_count=args.hidden,
        train=TrainConfig(**overrides),
        out_dir=args.out,
        grid_resolution=args.grid_res,
        exports=args.export or list(EXPORT_FORMATS),
    )


def cmd_solve(args) -> int:
    """Handle the solve command."""
    config = build_run_config(args)
    solver = CollocationSolver()
    results = solver.solve(
        problem=config.problem,
        hidden_count=config.hidden_count,
        config=config.train,
        grid_resolution=config.grid_resolution,
    )
    paths = solver.write_artifacts(results, config.out_dir, config.exports)
    for kind, path in paths.items():
        print(f"Saved {kind} to {path}", file=sys.stderr)

    print(format_solve_results(results))
    report = results["report"]
    failed = [
        name
        for name, phase in (("penalty", report.penalty), ("synergy", report.synergy))
        if phase.termination == LINE_SEARCH_FAILURE
    ]
    if failed:
        print(
            f"Error: line search failed in the {' and '.join(failed)} phase; "
            "the saved solution is the last accepted iterate",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_eval(args) -> int:
    """Handle the eval command."""
    solver = CollocationSolver()
    results = solver.evaluate(args.solution, args.points)
    if args.out:
        solver.write_values(results, args.out)
        print(f"Values saved to {args.out}", file=sys.stderr)
    else:
        solver.write_values(results, sys.stdout)
    return EXIT_OK


def cmd_check(args) -> int:
    """Handle the check command."""
    results = CollocationSolver().check(args.problem)
    print(format_check_results(results))
    return EXIT_OK if results["cholesky"] == "ok" else EXIT_NUMERICAL


def create_parser():
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        description=(
            "Solve Dirichlet problems on point-cloud boundaries with an MLP-RBF trial solution"
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Solve the unit-square benchmark and write run1/solution.json, accuracy.csv, report.json
  collonet solve --problem p1 --hidden 20 --out run1/

  # Solve a problem described in a JSON file with a fixed seed
  collonet solve --problem my_problem.json --seed 7

  # Evaluate a saved solution at the points of a CSV file
  collonet eval --solution run1/solution.json --points points.csv --out values.csv

  # Inspect point counts, lambda and the interpolation matrix of a problem
  collonet check --problem p4

Built-in problems:
  p1  unit square        p2  quarter disk       p3  unit disk
  p4  unit cube          p5  spherical sector

Environment:
  COLLONET_THREADS caps the worker threads used over collocation points
        """,
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log training progress")
    parser.add_argument("--debug", action="store_true", help="Log every optimizer iteration")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Solve command
    solve_parser = subparsers.add_parser("solve", help="Train a trial solution for a problem")
    solve_parser.add_argument("--problem", required=True,
                              help="Built-in problem id (p1..p5) or path to a problem file")
    solve_parser.add_argument("--hidden", type=int,
                              help="Hidden units (default: 20 in 2-D, 40 in 3-D)")
    solve_parser.add_argument("--eta", type=float, help="Penalty factor (default: 100)")
    solve_parser.add_argument("--seed", type=int, help="Initialization seed (default: 0)")
    solve_parser.add_argument("--iters-penalty", type=int, dest="iters_penalty",
                              help="Penalty-phase iteration budget (default: 2000)")
    solve_parser.add_argument("--iters-synergy", type=int, dest="iters_synergy",
                              help="Synergy-phase iteration budget (default: 200)")
    solve_parser.add_argument("--grad-tol", type=float, dest="grad_tol",
                              help="Projected-gradient stopping tolerance (default: 1e-6)")
    solve_parser.add_argument("--box", type=float, nargs="+", metavar="BOUND",
                              help="Box for hidden weights and biases: B for [-B, B] or LO HI "
                                   "(default: 20)")
    solve_parser.add_argument("--out", type=Path, default=Path("collonet-run"),
                              help="Output directory (default: collonet-run)")
    solve_parser.add_argument("--grid-res", type=int, default=DEFAULT_GRID_RESOLUTION,
                              dest="grid_res",
                              help="Accuracy grid points per axis "
                                   f"(default: {DEFAULT_GRID_RESOLUTION})")
    solve_parser.add_argument("--export", nargs="+", choices=EXPORT_FORMATS,
                              help="Artifacts to keep (default: all)")
    solve_parser.set_defaults(func=cmd_solve)

    # Eval command
    eval_parser = subparsers.add_parser("eval", help="Evaluate a saved solution at given points")
    eval_parser.add_argument("--solution", required=True, help="solution.json written by solve")
    eval_parser.add_argument("--points", required=True, help="CSV file with one point per line")
    eval_parser.add_argument("--out", help="Output CSV (default: standard output)")
    eval_parser.set_defaults(func=cmd_eval)

    # Check command
    check_parser = subparsers.add_parser(
        "check", help="Validate a problem and report lambda diagnostics"
    )
    check_parser.add_argument("--problem", required=True,
                              help="Built-in problem id (p1..p5) or path to a problem file")
    check_parser.set_defaults(func=cmd_check)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors; 2 is reserved for numerical failures
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_USAGE

    try:
        return args.func(args)
    except CollonetError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
