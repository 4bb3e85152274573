"""
Time-indexed nonlinear fields ``A: [0,T1] x [0,T2] x R^d -> R^d``.

The sewing engine and the Picard solver only ever need rectangular
increments of ``A`` over the cells of a rectangular partition, each cell
evaluated at its own spatial point.  That access pattern is the
:class:`TimeIndexedField` protocol:

    partition_increments(t1_nodes, t2_nodes, x) -> box_{cell} A(x_cell)

with ``x`` of shape ``(P1, P2, d)`` for ``P1 = len(t1_nodes) - 1`` cells along
the first axis and ``P2`` along the second.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .grid_field import Grid2D


class TimeIndexedField:
    """Base class; subclasses implement :meth:`partition_increments`."""

    d: int = 1
    grid: Grid2D | None = None
    exponents: dict | None = None

    def partition_increments(self, t1_nodes, t2_nodes, x) -> np.ndarray:
        raise NotImplementedError

    def increment(self, s: Sequence[float], t: Sequence[float], x) -> np.ndarray:
        """``box_{s,t} A(x)`` for a single rectangle and point."""
        x = np.asarray(x, dtype=float).reshape(1, 1, self.d)
        if s[0] == t[0] or s[1] == t[1]:
            return np.zeros(self.d)
        return self.partition_increments(np.array([s[0], t[0]]), np.array([s[1], t[1]]), x)[0, 0]

    def values(self, x, grid: Grid2D | None = None, stride: int = 1) -> np.ndarray:
        """``A(t, x) - A(t1, 0, x) - A(0, t2, x) + A(0, 0, x)`` at the nodes of ``grid``.

        For the fields used here ``A`` vanishes on both axes, so this is ``A(t, x)``.
        """
        grid = grid or self.grid
        if grid is None:
            raise DomainError("a time grid is required to tabulate this field")
        t1, t2 = grid.t1[::stride], grid.t2[::stride]
        x = np.asarray(x, dtype=float).reshape(self.d)
        cells = self.partition_increments(t1, t2, np.broadcast_to(x, (t1.size - 1, t2.size - 1, self.d)))
        out = np.zeros((t1.size, t2.size, self.d))
        out[1:, 1:] = cells.cumsum(axis=0).cumsum(axis=1)
        return out

    def scaled(self, c: float) -> "TimeIndexedField":
        return LinearCombination([self], [c])

    def __add__(self, other: "TimeIndexedField") -> "TimeIndexedField":
        return LinearCombination([self, other], [1.0, 1.0])


def _check_partition(t1_nodes, t2_nodes, x, d):
    t1 = np.asarray(t1_nodes, dtype=float)
    t2 = np.asarray(t2_nodes, dtype=float)
    if t1.ndim != 1 or t2.ndim != 1 or t1.size < 2 or t2.size < 2:
        raise DomainError("partitions need at least two nodes per axis")
    if np.any(np.diff(t1) < 0) or np.any(np.diff(t2) < 0):
        raise DomainError("partition nodes must be nondecreasing")
    x = np.asarray(x, dtype=float)
    if x.shape != (t1.size - 1, t2.size - 1, d):
        raise DomainError(f"x must have shape {(t1.size - 1, t2.size - 1, d)}, got {x.shape}")
    return t1, t2, x


class FunctionField(TimeIndexedField):
    """
    Closed-form field.

    Give either ``func(t1, t2, x)`` (broadcasting arrays; ``x`` has a trailing
    axis of length ``d``) or ``box(s1, s2, t1, t2, x)`` returning the
    rectangular increment directly, which avoids cancellation for small cells.
    """

    def __init__(self, func: Callable | None = None, *, box: Callable | None = None, d: int = 1,
                 grid: Grid2D | None = None, exponents: dict | None = None, name: str = "function"):
        if func is None and box is None:
            raise DomainError("FunctionField needs func or box")
        self.func, self.box, self.d, self.grid = func, box, int(d), grid
        self.exponents, self.name = exponents, name

    def partition_increments(self, t1_nodes, t2_nodes, x):
        t1, t2, x = _check_partition(t1_nodes, t2_nodes, x, self.d)
        s1, e1 = t1[:-1, None, None], t1[1:, None, None]
        s2, e2 = t2[None, :-1, None], t2[None, 1:, None]
        if self.box is not None:
            out = np.asarray(self.box(s1, s2, e1, e2, x), dtype=float)
        else:
            f = self.func
            out = f(e1, e2, x) - f(e1, s2, x) - f(s1, e2, x) + f(s1, s2, x)
        out = np.broadcast_to(out, x.shape).copy()
        degenerate = (e1 == s1) | (e2 == s2)
        return np.where(degenerate, 0.0, out)


class LinearCombination(TimeIndexedField):
    def __init__(self, fields: Sequence[TimeIndexedField], coefficients: Sequence[float]):
        if not fields:
            raise DomainError("empty combination")
        d = {f.d for f in fields}
        if len(d) != 1:
            raise DomainError(f"fields have different dimensions {sorted(d)}")
        self.fields, self.coefficients = list(fields), [float(c) for c in coefficients]
        self.d = fields[0].d
        self.grid = next((f.grid for f in fields if f.grid is not None), None)
        self.exponents = fields[0].exponents

    def partition_increments(self, t1_nodes, t2_nodes, x):
        out = None
        for f, c in zip(self.fields, self.coefficients):
            v = c * f.partition_increments(t1_nodes, t2_nodes, x)
            out = v if out is None else out + v
        return out


def product_field(c: float = 1.0, d: int = 1) -> FunctionField:
    """``A(t, x) = c * t1 * t2`` (independent of ``x``)."""
    return FunctionField(box=lambda s1, s2, t1, t2, x: c * (t1 - s1) * (t2 - s2) * np.ones_like(x),
                         d=d, name=f"{c}*t1*t2")


def linear_goursat_field(lam: float, d: int = 1) -> FunctionField:
    """``box_{s,t} A(x) = lam * x * (t1 - s1) * (t2 - s2)``."""
    return FunctionField(box=lambda s1, s2, t1, t2, x: lam * x * (t1 - s1) * (t2 - s2),
                         d=d, name=f"linear({lam})")


def separable_field(g: Callable, c: float = 1.0, d: int = 1, name: str = "separable") -> FunctionField:
    """``A(t, x) = c * t1 * t2 * g(x)``; its integral against ``y`` is ``c * int g(y_s) ds``."""
    return FunctionField(box=lambda s1, s2, t1, t2, x: c * (t1 - s1) * (t2 - s2) * g(x), d=d, name=name)
