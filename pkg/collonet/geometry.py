"""
Boundary and interior point generation for arbitrarily shaped domains.

A boundary is just a set of points. Generators here build the lattices used by
the benchmark problems (rectangles, disks, cubes and spherical sectors) and
remove duplicates that appear where faces meet or where a coordinate map
collapses a face onto a line or a point.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import DegenerateGeometryError, InvalidArgumentError, ProblemFileError
from .utils import write_csv

logger = logging.getLogger(__name__)

DEDUP_TOLERANCE = 1e-9
CLOSE_POINT_FRACTION = 0.25
POINT_TAGS = ("boundary", "interior")

Bounds = Sequence[Tuple[float, float]]
UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))
UNIT_CUBE = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
SPHERICAL_SECTOR = ((0.5, 1.0), (0.0, np.pi / 2), (0.0, np.pi / 2))


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


@dataclass(frozen=True, eq=False)
class PointCloud:
    """An (N, n) array of points with an optional boundary/interior tag."""

    points: np.ndarray
    tag: Optional[str] = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        if points.ndim != 2:
            raise InvalidArgumentError(f"points must be a 2-D array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError("points must be finite")
        if self.tag is not None and self.tag not in POINT_TAGS:
            raise InvalidArgumentError(f"tag must be one of {POINT_TAGS}, got '{self.tag}'")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    def to_csv(self, path: Union[str, Path]):
        """Write one point per line under a `# dim=n tag=...` header."""
        header = f"dim={self.dimension}"
        if self.tag:
            header += f" tag={self.tag}"
        write_csv(path, self.points, f"# {header}")

    @classmethod
    def from_csv(cls, path: Union[str, Path], tag: Optional[str] = None) -> "PointCloud":
        path = Path(path)
        if not path.exists():
            raise ProblemFileError(f"Points file '{path}' not found")

        dim = None
        data_lines = []
        for line in path.read_text().splitlines():
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                for token in stripped.lstrip("#").split():
                    key, _, value = token.partition("=")
                    if key == "dim":
                        dim = int(value)
                    elif key == "tag" and tag is None and value in POINT_TAGS:
                        tag = value
                continue
            data_lines.append(stripped)

        # a leading row of column names such as "x1,x2"
        if data_lines and not _is_number(data_lines[0].split(",")[0]):
            data_lines = data_lines[1:]
        if not data_lines:
            return cls(np.empty((0, dim or 0)), tag)
        try:
            points = np.loadtxt(data_lines, delimiter=",", ndmin=2)
        except ValueError as e:
            raise ProblemFileError(f"Invalid points in '{path}': {e}")
        if dim is not None and points.shape[1] != dim:
            raise ProblemFileError(
                f"'{path}' declares dim={dim} but rows have {points.shape[1]} coordinates"
            )
        return cls(points, tag)


def _as_array(points: Union[PointCloud, np.ndarray]) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


def min_pairwise_distance(points: Union[PointCloud, np.ndarray]) -> Tuple[float, Tuple[int, int]]:
    """Smallest Euclidean distance between two points, with the index pair."""
    array = _as_array(points)
    if len(array) < 2:
        raise InvalidArgumentError("at least 2 points are needed for a pairwise distance")
    distances = squareform(pdist(array))
    np.fill_diagonal(distances, np.inf)
    i, j = np.unravel_index(np.argmin(distances), distances.shape)
    i, j = sorted((int(i), int(j)))
    return float(distances[i, j]), (i, j)


def select_lambda(points: Union[PointCloud, np.ndarray]) -> float:
    """Gaussian width 1/a^2, a being the minimum distance between two points."""
    a, pair = min_pairwise_distance(points)
    if a == 0.0:
        raise DegenerateGeometryError(
            f"points {pair[0]} and {pair[1]} coincide; cannot choose lambda", pair
        )
    return 1.0 / a ** 2


def deduplicate(points: Union[PointCloud, np.ndarray], tol: float = DEDUP_TOLERANCE) -> PointCloud:
    """Keep a point only if it lies farther than tol from every point kept before it."""
    if tol <= 0:
        raise InvalidArgumentError(f"tolerance must be positive, got {tol}")
    tag = points.tag if isinstance(points, PointCloud) else None
    array = _as_array(points)
    kept = []
    for point in array:
        if kept and np.min(np.linalg.norm(np.asarray(kept) - point, axis=1)) <= tol:
            continue
        kept.append(point)
    result = np.asarray(kept) if kept else np.empty((0, array.shape[1]))
    if len(result) < len(array):
        logger.debug("Removed %d duplicate points (tol=%g)", len(array) - len(result), tol)
    return PointCloud(result, tag)


def _check_count(name: str, value: int, minimum: int):
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise InvalidArgumentError(f"{name} must be an integer >= {minimum}, got {value}")


def tensor_grid(axes: Sequence[np.ndarray]) -> np.ndarray:
    """All combinations of the given axis values, first axis varying slowest."""
    mesh = np.meshgrid(*[np.asarray(a, dtype=float) for a in axes], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def rectangle_boundary(m_x: int, m_y: int, bounds: Bounds = UNIT_SQUARE) -> PointCloud:
    """
    Perimeter lattice of a rectangle with m_x points along x and m_y along y.

    The four sides are generated separately and the shared corners removed, so
    m_x = m_y = m gives 4(m - 1) points.
    """
    _check_count("m_x", m_x, 2)
    _check_count("m_y", m_y, 2)
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    xs = np.linspace(x_lo, x_hi, m_x)
    ys = np.linspace(y_lo, y_hi, m_y)
    sides = [
        np.column_stack([xs, np.full(m_x, y_lo)]),
        np.column_stack([xs, np.full(m_x, y_hi)]),
        np.column_stack([np.full(m_y, x_lo), ys]),
        np.column_stack([np.full(m_y, x_hi), ys]),
    ]
    return deduplicate(PointCloud(np.vstack(sides), "boundary"))


def interior_grid_rectangle(subdivisions: int, bounds: Bounds) -> PointCloud:
    """Strict-interior tensor grid: subdivisions - 1 points per axis."""
    _check_count("subdivisions", subdivisions, 2)
    if len(bounds) < 1:
        raise InvalidArgumentError("bounds must name at least one axis")
    fractions = np.arange(1, subdivisions) / subdivisions
    axes = [lo + (hi - lo) * fractions for lo, hi in bounds]
    return PointCloud(tensor_grid(axes), "interior")


def polar_to_cartesian(r, phi) -> np.ndarray:
    """(r cos phi, r sin phi); broadcasts over arrays, last axis is the coordinate."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidArgumentError("radius must be non-negative")
    return np.stack(np.broadcast_arrays(r * np.cos(phi), r * np.sin(phi)), axis=-1)


def spherical_to_cartesian(r, phi, theta) -> np.ndarray:
    """Physics convention, theta is the polar angle measured from +z."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidArgumentError("radius must be non-negative")
    sin_theta = np.sin(theta)
    return np.stack(
        np.broadcast_arrays(
            r * sin_theta * np.cos(phi),
            r * sin_theta * np.sin(phi),
            r * np.cos(theta),
        ),
        axis=-1,
    )


def polar_grid(
    radii: Sequence[float], angles: Sequence[float], tag: Optional[str] = None
) -> PointCloud:
    grid = tensor_grid([radii, angles])
    return PointCloud(polar_to_cartesian(grid[:, 0], grid[:, 1]), tag)


def spherical_grid(
    radii: Sequence[float],
    phis: Sequence[float],
    thetas: Sequence[float],
    tag: Optional[str] = None,
) -> PointCloud:
    grid = tensor_grid([radii, phis, thetas])
    return PointCloud(spherical_to_cartesian(grid[:, 0], grid[:, 1], grid[:, 2]), tag)


def circle_boundary(m: int, radius: float = 1.0) -> PointCloud:
    """m points at angles 2*pi*i/m, i = 1..m."""
    _check_count("m", m, 3)
    if radius <= 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius}")
    angles = 2.0 * np.pi * np.arange(1, m + 1) / m
    return PointCloud(polar_to_cartesian(radius, angles), "boundary")


def quarter_disk_boundary(m_r: int, m_phi: int) -> PointCloud:
    """
    Rectangle lattice over (r, phi) in [0, 1] x [0, pi/2], mapped to the plane.

    The r = 0 side collapses onto the origin, leaving 2*m_r + m_phi - 3 points.
    """
    polar = rectangle_boundary(m_r, m_phi, bounds=((0.0, 1.0), (0.0, np.pi / 2)))
    mapped = polar_to_cartesian(polar.points[:, 0], polar.points[:, 1])
    return deduplicate(PointCloud(mapped, "boundary"))


def _box_faces(m: int, bounds: Bounds, closed: bool) -> np.ndarray:
    faces = []
    axis_values = []
    for lo, hi in bounds:
        if closed:
            axis_values.append(np.linspace(lo, hi, m))
        else:
            axis_values.append(lo + (hi - lo) * np.arange(m - 1) / (m - 1))
    # z faces, then y faces, then x faces
    for fixed in (2, 1, 0):
        free = [axis for axis in range(3) if axis != fixed]
        grid = tensor_grid([axis_values[free[0]], axis_values[free[1]]])
        for side in bounds[fixed]:
            face = np.empty((len(grid), 3))
            face[:, free[0]] = grid[:, 0]
            face[:, free[1]] = grid[:, 1]
            face[:, fixed] = side
            faces.append(face)
    return np.vstack(faces)


def box_boundary_3d(m: int, closed: bool = True, bounds: Bounds = UNIT_CUBE) -> PointCloud:
    """
    Face lattices of a box with m points per edge.

    closed=True lays an m x m lattice on every face; closed=False lays the
    (m - 1) x (m - 1) grid starting at the lower corner of each face.
    Points closer than a quarter of the lattice spacing are merged.
    """
    _check_count("m", m, 2)
    raw = _box_faces(m, bounds, closed)
    spacing = min(hi - lo for lo, hi in bounds) / (m - 1)
    logger.debug("Box boundary: %d raw face points", len(raw))
    return deduplicate(PointCloud(raw, "boundary"), CLOSE_POINT_FRACTION * spacing)


def spherical_sector_boundary(m: int, closed: bool = True) -> PointCloud:
    """
    Face lattices of the (r, phi, theta) box [0.5, 1] x [0, pi/2] x [0, pi/2].

    The lattice is built in spherical coordinates and mapped to Cartesian
    points; the theta = 0 face collapses onto the pole line.
    """
    _check_count("m", m, 2)
    raw = _box_faces(m, SPHERICAL_SECTOR, closed)
    mapped = spherical_to_cartesian(raw[:, 0], raw[:, 1], raw[:, 2])
    r_lo, r_hi = SPHERICAL_SECTOR[0]
    spacing = (r_hi - r_lo) / (m - 1)
    return deduplicate(PointCloud(mapped, "boundary"), CLOSE_POINT_FRACTION * spacing)
