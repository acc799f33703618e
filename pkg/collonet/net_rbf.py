"""
Gaussian RBF boundary-correction layer.

The correction is sum_l q_l exp(-lambda |x - R_l|^2) with one center per
boundary point and a shared width lambda. Its coefficients solve A q = c with
A_ij = exp(-lambda |R_i - R_j|^2), which is symmetric positive definite for
distinct centers and is factorized once by Cholesky.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf
from scipy.spatial.distance import cdist, pdist, squareform

from .exceptions import DegenerateGeometryError, InvalidArgumentError, SingularMatrixError
from .geometry import DEDUP_TOLERANCE, min_pairwise_distance

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BoundarySet:
    """Boundary points R_i, Dirichlet values b_i and the shared Gaussian width."""

    points: np.ndarray
    values: np.ndarray
    lam: float

    def __post_init__(self):
        points = np.array(self.points, dtype=float, copy=True)
        values = np.array(self.values, dtype=float, copy=True)
        if points.ndim != 2 or len(points) < 1 or points.shape[1] < 1:
            raise InvalidArgumentError(
                f"boundary points must have shape (M, n), got {points.shape}"
            )
        if values.shape != (len(points),):
            raise InvalidArgumentError(
                f"boundary values must have length {len(points)}, got shape {values.shape}"
            )
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(values))):
            raise InvalidArgumentError("boundary points and values must be finite")
        lam = float(self.lam)
        if not np.isfinite(lam) or lam <= 0:
            raise InvalidArgumentError(f"lambda must be positive and finite, got {self.lam}")
        if len(points) > 1:
            a, pair = min_pairwise_distance(points)
            if a <= DEDUP_TOLERANCE:
                raise DegenerateGeometryError(
                    f"boundary points {pair[0]} and {pair[1]} are {a:.3g} apart "
                    f"(minimum separation {DEDUP_TOLERANCE:g})",
                    pair,
                )
        points.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lam", lam)

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam,
            "points": self.points.tolist(),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BoundarySet":
        return cls(points=data["points"], values=data["values"], lam=data["lambda"])


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower-triangular L with L L^T = A, tied to the lambda it was built with."""

    lower: np.ndarray
    lam: Optional[float] = None

    @property
    def size(self) -> int:
        return self.lower.shape[0]


def build_interpolation_matrix(boundary: BoundarySet) -> np.ndarray:
    """A_ij = exp(-lambda |R_i - R_j|^2); each pair is computed once."""
    squared = squareform(pdist(boundary.points, "sqeuclidean"))
    return np.exp(-boundary.lam * squared)


def condition_estimate(matrix: np.ndarray) -> float:
    return float(np.linalg.cond(matrix))


def cholesky_factorize(matrix: np.ndarray, lam: Optional[float] = None) -> CholeskyFactor:
    """
    Dense Cholesky factorization.

    Raises SingularMatrixError with the zero-based index of the first
    non-positive pivot; no jitter is added.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgumentError(f"matrix must be square, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=1e-12, atol=0.0):
        raise InvalidArgumentError("matrix must be symmetric")

    lower, info = dpotrf(matrix, lower=1, clean=1)
    if info > 0:
        pivot = int(info) - 1
        logger.warning("Cholesky failed at pivot %d (lambda=%s)", pivot, lam)
        raise SingularMatrixError(
            f"interpolation matrix is not positive definite (pivot {pivot}"
            + (f", lambda={lam:g}" if lam is not None else "")
            + "); lambda is probably too small",
            pivot,
            lam,
        )
    if info < 0:
        raise InvalidArgumentError(f"LAPACK dpotrf rejected argument {-info}")
    lower.setflags(write=False)
    return CholeskyFactor(lower=lower, lam=lam)


def factorize_boundary(boundary: BoundarySet) -> CholeskyFactor:
    return cholesky_factorize(build_interpolation_matrix(boundary), boundary.lam)


def solve_coefficients(factor: CholeskyFactor, c) -> np.ndarray:
    """Solve A q = c using the stored factor."""
    c = np.asarray(c, dtype=float)
    if c.shape != (factor.size,):
        raise InvalidArgumentError(f"right-hand side must have length {factor.size}, got {c.shape}")
    return cho_solve((factor.lower, True), c)


def coefficient_param_jacobian(factor: CholeskyFactor, boundary_mlp_grads) -> np.ndarray:
    """
    dq/dp = -A^{-1} dN(R, p)/dp.

    boundary_mlp_grads has shape (M, P); all P right-hand sides reuse the same
    factor.
    """
    grads = np.asarray(boundary_mlp_grads, dtype=float)
    if grads.ndim != 2 or grads.shape[0] != factor.size:
        raise InvalidArgumentError(
            f"gradient matrix must have shape ({factor.size}, P), got {grads.shape}"
        )
    return -cho_solve((factor.lower, True), grads)


def _squared_distances(boundary: BoundarySet, x) -> np.ndarray:
    points = np.asarray(x, dtype=float)
    if points.ndim not in (1, 2) or points.shape[-1] != boundary.dimension:
        raise InvalidArgumentError(
            f"expected points of dimension {boundary.dimension}, got shape {points.shape}"
        )
    return cdist(np.atleast_2d(points), boundary.points, "sqeuclidean")


def gaussian_matrix(boundary: BoundarySet, x) -> np.ndarray:
    """exp(-lambda |x_k - R_l|^2), shape (N, M)."""
    return np.exp(-boundary.lam * _squared_distances(boundary, x))


def gaussian_laplacian_matrix(boundary: BoundarySet, x) -> np.ndarray:
    """Laplacian of each Gaussian at each point, shape (N, M)."""
    squared = _squared_distances(boundary, x)
    lam, n = boundary.lam, boundary.dimension
    return (4.0 * lam ** 2 * squared - 2.0 * n * lam) * np.exp(-lam * squared)


def _check_coefficients(q, boundary: BoundarySet) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (boundary.count,):
        raise InvalidArgumentError(f"coefficients must have length {boundary.count}, got {q.shape}")
    return q


def rbf_eval(q, boundary: BoundarySet, x):
    q = _check_coefficients(q, boundary)
    values = gaussian_matrix(boundary, x) @ q
    return float(values[0]) if np.ndim(x) == 1 else values


def rbf_laplacian(q, boundary: BoundarySet, x):
    q = _check_coefficients(q, boundary)
    values = gaussian_laplacian_matrix(boundary, x) @ q
    return float(values[0]) if np.ndim(x) == 1 else values
