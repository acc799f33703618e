"""
Benchmark Poisson problems and accuracy reporting.

Five built-in cases pose the same two manufactured solutions on different
boundaries: a unit square, a quarter disk, a unit disk, a unit cube and a
spherical sector. Boundary values are always the analytic solution at the
boundary points. User problems are read from schema-1 JSON files.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import CollonetError, InvalidArgumentError, ProblemFileError
from .geometry import (
    UNIT_CUBE,
    UNIT_SQUARE,
    PointCloud,
    box_boundary_3d,
    circle_boundary,
    interior_grid_rectangle,
    polar_grid,
    polar_to_cartesian,
    quarter_disk_boundary,
    rectangle_boundary,
    select_lambda,
    spherical_grid,
    spherical_sector_boundary,
    spherical_to_cartesian,
    tensor_grid,
)
from .net_rbf import BoundarySet
from .pde_core import CollocationGrid, ProblemSpec, TrialSolution, trial_eval
from .utils import TermExpression, write_csv

logger = logging.getLogger(__name__)

PROBLEM_SCHEMA = 1
DEFAULT_GRID_RESOLUTION = 50

CARTESIAN = "cartesian"
POLAR = "polar"
SPHERICAL = "spherical"

Function = Callable[[np.ndarray], np.ndarray]
Bounds = Tuple[Tuple[float, float], ...]


def _to_cartesian(system: str, native: np.ndarray) -> np.ndarray:
    if system == POLAR:
        return polar_to_cartesian(native[:, 0], native[:, 1])
    if system == SPHERICAL:
        return spherical_to_cartesian(native[:, 0], native[:, 1], native[:, 2])
    return native


@dataclass(frozen=True)
class CoordinateBox:
    """
    A box in a native coordinate system (Cartesian, polar or spherical).

    An axis with equal ends is held fixed, which is how evaluation slices are
    described.
    """

    system: str
    bounds: Bounds

    def grid(self, resolution: int) -> np.ndarray:
        if resolution < 2:
            raise InvalidArgumentError(f"grid resolution must be at least 2, got {resolution}")
        axes = [
            np.array([lo]) if lo == hi else np.linspace(lo, hi, resolution)
            for lo, hi in self.bounds
        ]
        return _to_cartesian(self.system, tensor_grid(axes))

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lows = np.array([lo for lo, _ in self.bounds])
        highs = np.array([hi for _, hi in self.bounds])
        native = rng.uniform(lows, highs, size=(count, len(self.bounds)))
        return _to_cartesian(self.system, native)


@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    """A problem together with its reference network size and evaluation slice."""

    identifier: str
    problem: ProblemSpec
    hidden_count: int
    domain: CoordinateBox
    evaluation: CoordinateBox
    expected_boundary_count: Optional[int] = None
    expected_interior_count: Optional[int] = None
    printed_source: Optional[Function] = None
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dimension(self) -> int:
        return self.problem.dimension


def _psi_plane(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.exp(-x) * (x + y ** 3)


def _source_plane(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return np.exp(-x) * (x - 2.0 + y ** 3 + 6.0 * y)


def _psi_space(points: np.ndarray) -> np.ndarray:
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.exp(x) * y ** 2 + (z ** 2 - 2.0) * np.sin(y)


def _source_space(points: np.ndarray) -> np.ndarray:
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.exp(x) * (y ** 2 + 2.0) + (4.0 - z ** 2) * np.sin(y)


def _printed_source_space(points: np.ndarray) -> np.ndarray:
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    return np.exp(x) * y ** 2 + z ** 2 * np.sin(y)


SPACE_SOURCE_NOTE = (
    "source corrected to the Laplacian of the analytic solution: "
    "exp(x)(y^2 + 2) + (4 - z^2) sin(y) instead of exp(x) y^2 + z^2 sin(y)"
)


def _build_problem(
    name: str,
    boundary: PointCloud,
    interior: PointCloud,
    source: Function,
    solution: Optional[Function],
    values: Optional[np.ndarray] = None,
    lam: Optional[float] = None,
    operator: str = "laplacian",
) -> ProblemSpec:
    if values is None:
        if solution is None:
            raise ProblemFileError(f"{name}: boundary values need either values or a solution")
        values = solution(boundary.points)
    lam = lam if lam is not None else select_lambda(boundary)
    logger.debug("%s: M=%d K=%d lambda=%g", name, len(boundary), len(interior), lam)
    return ProblemSpec(
        dimension=boundary.dimension,
        source=source,
        boundary=BoundarySet(boundary.points, values, lam),
        interior=CollocationGrid.from_source(interior.points, source),
        operator=operator,
        analytic_solution=solution,
        name=name,
    )


def _unit_square_case() -> BenchmarkCase:
    problem = _build_problem(
        "p1",
        rectangle_boundary(10, 10),
        interior_grid_rectangle(10, UNIT_SQUARE),
        _source_plane,
        _psi_plane,
    )
    return BenchmarkCase(
        identifier="p1",
        problem=problem,
        hidden_count=20,
        domain=CoordinateBox(CARTESIAN, UNIT_SQUARE),
        evaluation=CoordinateBox(CARTESIAN, UNIT_SQUARE),
        expected_boundary_count=36,
        expected_interior_count=81,
    )


def _quarter_disk_case() -> BenchmarkCase:
    fractions = np.arange(1, 10) / 10
    problem = _build_problem(
        "p2",
        quarter_disk_boundary(10, 20),
        polar_grid(fractions, np.pi / 2 * fractions, "interior"),
        _source_plane,
        _psi_plane,
    )
    polar_box = CoordinateBox(POLAR, ((0.0, 1.0), (0.0, np.pi / 2)))
    return BenchmarkCase(
        identifier="p2",
        problem=problem,
        hidden_count=20,
        domain=polar_box,
        evaluation=polar_box,
        expected_boundary_count=37,
        expected_interior_count=81,
    )


def _unit_disk_case() -> BenchmarkCase:
    problem = _build_problem(
        "p3",
        circle_boundary(20),
        polar_grid(np.arange(1, 10) / 10, 2 * np.pi * np.arange(17) / 17, "interior"),
        _source_plane,
        _psi_plane,
    )
    polar_box = CoordinateBox(POLAR, ((0.0, 1.0), (0.0, 2 * np.pi)))
    return BenchmarkCase(
        identifier="p3",
        problem=problem,
        hidden_count=20,
        domain=polar_box,
        evaluation=polar_box,
        expected_boundary_count=20,
        expected_interior_count=153,
    )


def _unit_cube_case() -> BenchmarkCase:
    problem = _build_problem(
        "p4",
        box_boundary_3d(7),
        interior_grid_rectangle(10, UNIT_CUBE),
        _source_space,
        _psi_space,
    )
    return BenchmarkCase(
        identifier="p4",
        problem=problem,
        hidden_count=40,
        domain=CoordinateBox(CARTESIAN, UNIT_CUBE),
        evaluation=CoordinateBox(CARTESIAN, ((0.5, 0.5), (0.0, 1.0), (0.0, 1.0))),
        expected_boundary_count=218,
        expected_interior_count=729,
        printed_source=_printed_source_space,
        notes=(SPACE_SOURCE_NOTE,),
    )


def _spherical_sector_case() -> BenchmarkCase:
    fractions = np.arange(1, 10) / 10
    problem = _build_problem(
        "p5",
        spherical_sector_boundary(7),
        spherical_grid(
            0.5 + 0.5 * fractions, np.pi / 2 * fractions, np.pi / 2 * fractions, "interior"
        ),
        _source_space,
        _psi_space,
    )
    quarter = (0.0, np.pi / 2)
    return BenchmarkCase(
        identifier="p5",
        problem=problem,
        hidden_count=40,
        domain=CoordinateBox(SPHERICAL, ((0.5, 1.0), quarter, quarter)),
        evaluation=CoordinateBox(SPHERICAL, ((0.75, 0.75), quarter, quarter)),
        expected_boundary_count=176,
        expected_interior_count=729,
        printed_source=_printed_source_space,
        notes=(SPACE_SOURCE_NOTE,),
    )


CASE_BUILDERS = {
    "p1": _unit_square_case,
    "p2": _quarter_disk_case,
    "p3": _unit_disk_case,
    "p4": _unit_cube_case,
    "p5": _spherical_sector_case,
}


def catalog() -> List[BenchmarkCase]:
    """All five built-in cases, freshly built."""
    return [build() for build in CASE_BUILDERS.values()]


def get_case(identifier: str) -> BenchmarkCase:
    try:
        return CASE_BUILDERS[identifier]()
    except KeyError:
        raise InvalidArgumentError(
            f"unknown problem '{identifier}' (built-in: {', '.join(CASE_BUILDERS)})"
        )


def laplacian_fd(func: Function, points: np.ndarray, step: float = 1e-2) -> np.ndarray:
    """Fourth-order central-difference Laplacian of a vectorized function."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    center = func(points)
    total = np.zeros(len(points))
    for axis in range(points.shape[1]):
        offset = np.zeros(points.shape[1])
        offset[axis] = step
        total += (
            -func(points + 2 * offset)
            + 16.0 * func(points + offset)
            - 30.0 * center
            + 16.0 * func(points - offset)
            - func(points - 2 * offset)
        ) / (12.0 * step ** 2)
    return total


def verify_manufactured(
    case: BenchmarkCase,
    samples: int = 200,
    seed: int = 0,
    source: Optional[Function] = None,
) -> float:
    """
    max |L Psi_a - f| over random interior points, L by finite differences.

    `source` replaces the case's source function, e.g. to check the printed one.
    """
    problem = case.problem
    if problem.analytic_solution is None:
        raise InvalidArgumentError(f"{case.identifier} has no analytic solution")
    if problem.operator != "laplacian":
        raise InvalidArgumentError(f"no finite-difference check for operator '{problem.operator}'")
    points = case.domain.sample(np.random.default_rng(seed), samples)
    source = source or problem.source
    defect = laplacian_fd(problem.analytic_solution, points) - source(points)
    return float(np.max(np.abs(defect)))


@dataclass(frozen=True, eq=False)
class AccuracyReport:
    """Pointwise |Psi_M - Psi_a| over an evaluation grid."""

    points: np.ndarray
    psi_m: np.ndarray
    psi_a: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.psi_m - self.psi_a)

    @property
    def max_error(self) -> float:
        return float(np.max(self.abs_error))

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.abs_error))

    @property
    def rms_error(self) -> float:
        return float(np.sqrt(np.mean(self.abs_error ** 2)))

    def summary(self) -> Dict[str, float]:
        return {
            "points": len(self.points),
            "max": self.max_error,
            "mean": self.mean_error,
            "rms": self.rms_error,
        }

    def to_csv(self, path: Union[str, Path]):
        dim = self.points.shape[1]
        header = ",".join([f"x{i + 1}" for i in range(dim)] + ["psi_m", "psi_a", "abs_err"])
        table = np.column_stack([self.points, self.psi_m, self.psi_a, self.abs_error])
        write_csv(path, table, header)


def evaluation_grid(case: BenchmarkCase, resolution: int = DEFAULT_GRID_RESOLUTION) -> PointCloud:
    return PointCloud(case.evaluation.grid(resolution))


def accuracy_report(
    sol: TrialSolution, case: BenchmarkCase, grid: Union[PointCloud, np.ndarray]
) -> AccuracyReport:
    points = grid.points if isinstance(grid, PointCloud) else np.atleast_2d(grid)
    if points.shape[1] != case.dimension or sol.dimension != case.dimension:
        raise InvalidArgumentError(
            f"grid dimension {points.shape[1]} / solution dimension {sol.dimension} "
            f"do not match problem dimension {case.dimension}"
        )
    if case.problem.analytic_solution is None:
        raise InvalidArgumentError(f"{case.identifier} has no analytic solution")
    if len(points) == 0:
        raise InvalidArgumentError("evaluation grid is empty")
    return AccuracyReport(
        points=points,
        psi_m=np.asarray(trial_eval(sol, points)),
        psi_a=case.problem.analytic_solution(points),
    )


def _generated_boundary(generator: Dict[str, Any]) -> PointCloud:
    kind = generator.get("kind")
    if kind == "rectangle":
        bounds = generator.get("bounds", UNIT_SQUARE)
        return rectangle_boundary(int(generator["m_x"]), int(generator["m_y"]), bounds)
    if kind == "circle":
        return circle_boundary(int(generator["m"]), float(generator.get("radius", 1.0)))
    if kind == "quarter_disk":
        return quarter_disk_boundary(int(generator["m_r"]), int(generator["m_phi"]))
    if kind == "box3d":
        bounds = generator.get("bounds", UNIT_CUBE)
        return box_boundary_3d(int(generator["m"]), bool(generator.get("closed", True)), bounds)
    if kind == "spherical_sector":
        return spherical_sector_boundary(int(generator["m"]), bool(generator.get("closed", True)))
    raise ProblemFileError(f"unknown boundary generator '{kind}'")


def _generated_interior(generator: Dict[str, Any]) -> PointCloud:
    if generator.get("kind") != "grid":
        raise ProblemFileError(f"unknown interior generator '{generator.get('kind')}'")
    return interior_grid_rectangle(int(generator["subdivisions"]), generator["bounds"])


def _point_section(section: Any, name: str, tag: str, generate) -> PointCloud:
    if not isinstance(section, dict):
        raise ProblemFileError(f"'{name}' must be an object")
    if "points" in section:
        return PointCloud(np.atleast_2d(np.asarray(section["points"], dtype=float)), tag)
    if "generator" in section:
        return generate(section["generator"])
    raise ProblemFileError(f"'{name}' needs either 'points' or 'generator'")


def _bounding_box(points: np.ndarray) -> Bounds:
    return tuple((float(lo), float(hi)) for lo, hi in zip(points.min(axis=0), points.max(axis=0)))


def load_problem_file(path: Union[str, Path]) -> BenchmarkCase:
    """Build a case from a schema-1 problem file."""
    path = Path(path)
    if not path.exists():
        raise ProblemFileError(f"Problem file '{path}' not found")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"Invalid JSON in '{path}': {e}")
    if not isinstance(data, dict):
        raise ProblemFileError(f"'{path}' must contain a JSON object")
    if data.get("schema") != PROBLEM_SCHEMA:
        raise ProblemFileError(
            f"'{path}': unsupported schema {data.get('schema')!r} (expected {PROBLEM_SCHEMA})"
        )

    name = str(data.get("name", path.stem))
    try:
        dim = int(data["dimension"])
        source = TermExpression(data["source"], dim)
        solution = TermExpression(data["solution"], dim) if "solution" in data else None
        boundary = _point_section(data["boundary"], "boundary", "boundary", _generated_boundary)
        interior = _point_section(data["interior"], "interior", "interior", _generated_interior)

        values = data["boundary"].get("values")
        if values is not None:
            values = np.asarray(values, dtype=float)
        elif solution is None and "boundary_values" in data:
            values = TermExpression(data["boundary_values"], dim)(boundary.points)

        for cloud, label in ((boundary, "boundary"), (interior, "interior")):
            if cloud.dimension != dim:
                raise ProblemFileError(
                    f"{label} points have dimension {cloud.dimension}, expected {dim}"
                )
        lam = data.get("lambda")
        problem = _build_problem(
            name,
            boundary,
            interior,
            source,
            solution,
            values=values,
            lam=float(lam) if lam is not None else None,
            operator=data.get("operator", "laplacian"),
        )
        hidden_count = int(data.get("hidden_count", 20 if dim <= 2 else 40))
    except KeyError as e:
        raise ProblemFileError(f"'{path}' is missing required field {e}")
    except (TypeError, ValueError) as e:
        if isinstance(e, CollonetError):
            raise
        raise ProblemFileError(f"'{path}': {e}")

    box = _bounding_box(np.vstack([boundary.points, interior.points]))
    slice_bounds = box
    if dim > 2:
        # hold all but the last two axes at the middle of the box
        middles = tuple(((lo + hi) / 2,) * 2 for lo, hi in box[:-2])
        slice_bounds = middles + box[-2:]
    return BenchmarkCase(
        identifier=name,
        problem=problem,
        hidden_count=hidden_count,
        domain=CoordinateBox(CARTESIAN, box),
        evaluation=CoordinateBox(CARTESIAN, slice_bounds),
    )


def resolve_problem(selector: str) -> BenchmarkCase:
    """A built-in identifier (p1..p5) or the path of a problem file."""
    if selector in CASE_BUILDERS:
        return get_case(selector)
    return load_problem_file(selector)
