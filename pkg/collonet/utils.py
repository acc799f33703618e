"""Utility functions for configuration, chunked reductions and term tables."""

import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import IO, Any, Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError, ProblemFileError

THREADS_ENV_VAR = "COLLONET_THREADS"
CHUNK_SIZE = 256

_FACTOR_FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
}


def write_csv(target: Union[str, Path, IO[str]], table, header: str):
    """
    Write rows of floats as comma-separated shortest round-trip decimals.

    target is a path or an open text stream; header is written as the first line.
    """
    rows = np.asarray(table, dtype=float).tolist()
    lines = [header] + [",".join(repr(value) for value in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if isinstance(target, (str, Path)):
        Path(target).write_text(text)
    else:
        target.write(text)


def resolve_thread_count() -> int:
    """
    Worker count for collocation map-reduce.

    Reads COLLONET_THREADS; unset means every available CPU.
    """
    raw = os.environ.get(THREADS_ENV_VAR, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"{THREADS_ENV_VAR} must be an integer, got '{raw}'")
    if threads < 1:
        raise InvalidArgumentError(f"{THREADS_ENV_VAR} must be positive, got {threads}")
    return threads


def chunk_slices(count: int, chunk_size: int = CHUNK_SIZE) -> List[slice]:
    """Fixed-size slices covering range(count); independent of the worker count."""
    return [slice(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def map_reduce_ordered(
    func: Callable[[slice], Tuple[Any, ...]],
    count: int,
    threads: int = 0,
) -> Tuple[Any, ...]:
    """
    Apply func to every chunk of range(count) and sum the returned tuples.

    Partial results are summed in chunk order whatever the worker count, so the
    reduction is reproducible bit for bit.
    """
    slices = chunk_slices(count)
    if not slices:
        raise InvalidArgumentError("map_reduce_ordered needs at least one point")
    threads = threads or resolve_thread_count()
    if threads == 1 or len(slices) == 1:
        parts = [func(s) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(slices))) as pool:
            parts = list(pool.map(func, slices))

    total = list(parts[0])
    for part in parts[1:]:
        for i, value in enumerate(part):
            total[i] = total[i] + value
    return tuple(total)


class TermExpression:
    """
    Sum of terms c * prod_j x_j^a_j * prod(factors), parsed from a problem file.

    Each term is a mapping {"coef": c, "powers": [...], "factors": [...]}, where
    a factor is {"fn": "exp" | "sin" | "cos", "axis": j, "sign": +1 | -1}. The
    sign multiplies the factor's argument.
    """

    def __init__(self, terms: Sequence[Dict[str, Any]], dimension: int):
        if dimension < 1:
            raise ProblemFileError(f"dimension must be positive, got {dimension}")
        if not isinstance(terms, (list, tuple)):
            raise ProblemFileError("an expression must be a list of terms")
        self.dimension = dimension
        self.terms = [self._parse_term(term, index) for index, term in enumerate(terms)]

    def _parse_term(self, term: Any, index: int):
        if not isinstance(term, dict):
            raise ProblemFileError(f"term {index} must be an object")
        try:
            coef = float(term.get("coef", 1.0))
        except (TypeError, ValueError):
            raise ProblemFileError(f"term {index}: coef must be a number")

        powers = term.get("powers", [0] * self.dimension)
        if (
            not isinstance(powers, list)
            or len(powers) != self.dimension
            or not all(isinstance(a, int) and a >= 0 for a in powers)
        ):
            raise ProblemFileError(
                f"term {index}: powers must be {self.dimension} non-negative integers"
            )

        factors = []
        for factor in term.get("factors", []):
            if not isinstance(factor, dict) or factor.get("fn") not in _FACTOR_FUNCTIONS:
                raise ProblemFileError(
                    f"term {index}: factor fn must be one of {sorted(_FACTOR_FUNCTIONS)}"
                )
            axis = factor.get("axis")
            if not isinstance(axis, int) or not 0 <= axis < self.dimension:
                raise ProblemFileError(
                    f"term {index}: factor axis must be in 0..{self.dimension - 1}"
                )
            sign = factor.get("sign", 1)
            if sign not in (1, -1):
                raise ProblemFileError(f"term {index}: factor sign must be +1 or -1")
            factors.append((factor["fn"], axis, float(sign)))

        return coef, tuple(powers), tuple(factors)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(len(points))
        for coef, powers, factors in self.terms:
            value = np.full(len(points), coef)
            for axis, power in enumerate(powers):
                if power:
                    value = value * points[:, axis] ** power
            for fn, axis, sign in factors:
                value = value * _FACTOR_FUNCTIONS[fn](sign * points[:, axis])
            total += value
        return total
