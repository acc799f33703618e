"""
One-hidden-layer sigmoidal perceptron with closed-form derivatives.

The network is N(x, p) = sum_i v_i * sigma(sum_j w_ij x_j + u_i). The flattened
parameter vector p is ordered v (length H), then w row-major (H x n), then u
(length H). Every gradient in this package uses that order.

Evaluation functions accept a single point of shape (n,) and return a float,
or a batch of shape (N, n) and return an array of shape (N,). Parameter
gradients return shape (P,) or (N, P) accordingly.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from .exceptions import InvalidArgumentError

ArrayOrFloat = Union[float, np.ndarray]


def _frozen(values, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.shape != shape:
        raise InvalidArgumentError(f"{name} must have shape {shape}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights and biases of the perceptron. Arrays are read-only once built."""

    output_weights: np.ndarray
    input_weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.output_weights)
        if v.ndim != 1 or v.size == 0:
            raise InvalidArgumentError("output_weights must be a non-empty vector")
        w = np.asarray(self.input_weights)
        if w.ndim != 2 or w.shape[0] != v.size or w.shape[1] == 0:
            raise InvalidArgumentError(
                f"input_weights must have shape ({v.size}, n), got {w.shape}"
            )
        hidden, dim = w.shape
        object.__setattr__(self, "output_weights", _frozen(v, (hidden,), "output_weights"))
        object.__setattr__(self, "input_weights", _frozen(w, (hidden, dim), "input_weights"))
        object.__setattr__(self, "biases", _frozen(self.biases, (hidden,), "biases"))

    @property
    def hidden_count(self) -> int:
        return self.input_weights.shape[0]

    @property
    def input_dim(self) -> int:
        return self.input_weights.shape[1]

    @property
    def size(self) -> int:
        """Length of the flattened parameter vector p."""
        return self.hidden_count * (self.input_dim + 2)

    def flatten(self) -> np.ndarray:
        return np.concatenate(
            [self.output_weights, self.input_weights.ravel(), self.biases]
        )

    @classmethod
    def from_flat(cls, p, hidden_count: int, input_dim: int) -> "MlpParams":
        p = np.asarray(p, dtype=float)
        expected = hidden_count * (input_dim + 2)
        if p.shape != (expected,):
            raise InvalidArgumentError(
                f"flat parameter vector must have length {expected}, got shape {p.shape}"
            )
        h, hn = hidden_count, hidden_count * input_dim
        return cls(
            output_weights=p[:h],
            input_weights=p[h:h + hn].reshape(hidden_count, input_dim),
            biases=p[h + hn:],
        )

    @classmethod
    def random(
        cls,
        hidden_count: int,
        input_dim: int,
        rng: Optional[np.random.Generator] = None,
    ) -> "MlpParams":
        """Draw every entry uniformly from [-1, 1]."""
        if hidden_count < 1 or input_dim < 1:
            raise InvalidArgumentError("hidden_count and input_dim must be positive")
        rng = rng if rng is not None else np.random.default_rng()
        p = rng.uniform(-1.0, 1.0, size=hidden_count * (input_dim + 2))
        return cls.from_flat(p, hidden_count, input_dim)

    @classmethod
    def zeros(cls, hidden_count: int, input_dim: int) -> "MlpParams":
        return cls.from_flat(np.zeros(hidden_count * (input_dim + 2)), hidden_count, input_dim)


def parameter_bounds(
    hidden_count: int, input_dim: int, lo: float, hi: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Box vectors in p order: v is unbounded, w and u lie in [lo, hi]."""
    size = hidden_count * (input_dim + 2)
    lower = np.full(size, lo, dtype=float)
    upper = np.full(size, hi, dtype=float)
    lower[:hidden_count] = -np.inf
    upper[:hidden_count] = np.inf
    return lower, upper


def sigmoid_k(z: ArrayOrFloat, k: int = 0) -> ArrayOrFloat:
    """
    k-th derivative of the logistic sigmoid, k in 0..3.

    expit evaluates exp of a non-positive argument on both branches, so very
    large |z| neither overflows nor loses the symmetry sigma(-z) = 1 - sigma(z).
    """
    if k not in (0, 1, 2, 3):
        raise InvalidArgumentError(f"derivative order must be 0..3, got {k}")
    s = expit(z)
    if k == 0:
        return s
    d1 = s * (1.0 - s)
    if k == 1:
        return d1
    d2 = d1 * (1.0 - 2.0 * s)
    if k == 2:
        return d2
    return d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1


def _as_points(params: MlpParams, x) -> Tuple[np.ndarray, bool]:
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.ndim != 2 or points.shape[1] != params.input_dim:
        raise InvalidArgumentError(
            f"expected points of dimension {params.input_dim}, got shape {np.shape(x)}"
        )
    return points, single


def _unwrap(values: np.ndarray, single: bool) -> ArrayOrFloat:
    return float(values[0]) if single else values


def _activations(params: MlpParams, points: np.ndarray) -> np.ndarray:
    return points @ params.input_weights.T + params.biases


def mlp_eval(params: MlpParams, x) -> ArrayOrFloat:
    points, single = _as_points(params, x)
    values = sigmoid_k(_activations(params, points), 0) @ params.output_weights
    return _unwrap(values, single)


def mlp_pure_derivative(params: MlpParams, x, axis: int, order: int) -> ArrayOrFloat:
    """d^k N / dx_axis^k for k in {1, 2}."""
    if not 0 <= axis < params.input_dim:
        raise InvalidArgumentError(f"axis must be in 0..{params.input_dim - 1}, got {axis}")
    if order not in (1, 2):
        raise InvalidArgumentError(f"input derivative order must be 1 or 2, got {order}")
    points, single = _as_points(params, x)
    weights = params.output_weights * params.input_weights[:, axis] ** order
    values = sigmoid_k(_activations(params, points), order) @ weights
    return _unwrap(values, single)


def mlp_laplacian(params: MlpParams, x) -> ArrayOrFloat:
    points, single = _as_points(params, x)
    weights = params.output_weights * np.sum(params.input_weights ** 2, axis=1)
    values = sigmoid_k(_activations(params, points), 2) @ weights
    return _unwrap(values, single)


def mlp_param_gradient(params: MlpParams, x) -> np.ndarray:
    """dN/dp in canonical p order, shape (P,) or (N, P)."""
    points, single = _as_points(params, x)
    z = _activations(params, points)
    s0 = sigmoid_k(z, 0)
    scaled = params.output_weights * sigmoid_k(z, 1)
    grad_w = scaled[:, :, None] * points[:, None, :]
    grad = np.concatenate([s0, grad_w.reshape(len(points), -1), scaled], axis=1)
    return grad[0] if single else grad


def mlp_laplacian_param_gradient(params: MlpParams, x) -> np.ndarray:
    """d(laplacian N)/dp in canonical p order, shape (P,) or (N, P)."""
    points, single = _as_points(params, x)
    v, w = params.output_weights, params.input_weights
    z = _activations(params, points)
    s2 = sigmoid_k(z, 2)
    s3 = sigmoid_k(z, 3)
    norms = np.sum(w ** 2, axis=1)

    grad_v = s2 * norms
    grad_w = v[None, :, None] * (
        2.0 * w[None, :, :] * s2[:, :, None]
        + (norms * s3)[:, :, None] * points[:, None, :]
    )
    grad_u = v * norms * s3
    grad = np.concatenate([grad_v, grad_w.reshape(len(points), -1), grad_u], axis=1)
    return grad[0] if single else grad
