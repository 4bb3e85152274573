"""
Dyadic grids on rectangles, sampled two-parameter fields and their increments.

A two-parameter field ``f: [0,T1] x [0,T2] -> R^d`` is stored on the nodes of a
:class:`Grid2D` as an array of shape ``(2**n1 + 1, 2**n2 + 1, d)``.  The basic
object of the whole package is the rectangular increment

    box_{s,t} f = f(t1, t2) - f(t1, s2) - f(s1, t2) + f(s1, s2),

together with the two directional increments and the mixed Hölder seminorms
built from them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

# exact pairwise suprema up to this many cells per axis (O(N^4) work)
EXACT_SUP_LEVEL = 8
N_RANDOM_PAIRS = 10_000


@dataclass(frozen=True)
class Grid2D:
    """Uniform dyadic grid on ``[0, T1] x [0, T2]`` with ``2**n1`` by ``2**n2`` cells."""

    T1: float
    T2: float
    n1: int
    n2: int

    def __post_init__(self):
        if not (self.T1 > 0 and self.T2 > 0):
            raise DomainError(f"horizons must be positive, got T1={self.T1}, T2={self.T2}")
        if int(self.n1) != self.n1 or int(self.n2) != self.n2 or self.n1 < 1 or self.n2 < 1:
            raise DomainError(f"resolution levels must be integers >= 1, got n1={self.n1}, n2={self.n2}")
        object.__setattr__(self, "T1", float(self.T1))
        object.__setattr__(self, "T2", float(self.T2))
        object.__setattr__(self, "n1", int(self.n1))
        object.__setattr__(self, "n2", int(self.n2))

    @classmethod
    def square(cls, T: float, n: int) -> "Grid2D":
        return cls(T, T, n, n)

    @property
    def N1(self) -> int:
        return 2 ** self.n1

    @property
    def N2(self) -> int:
        return 2 ** self.n2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N1 + 1, self.N2 + 1)

    @property
    def node_count(self) -> int:
        return (self.N1 + 1) * (self.N2 + 1)

    @property
    def h1(self) -> float:
        return self.T1 / self.N1

    @property
    def h2(self) -> float:
        return self.T2 / self.N2

    @property
    def t1(self) -> np.ndarray:
        return np.arange(self.N1 + 1) * self.h1

    @property
    def t2(self) -> np.ndarray:
        return np.arange(self.N2 + 1) * self.h2

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (i * self.h1, j * self.h2)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.t1, self.t2, indexing="ij")

    def index(self, point: Sequence[float], tol: float = 1e-9) -> tuple[int, int]:
        """Node indices of ``point``; raises :class:`DomainError` if it is not a node."""
        out = []
        for x, h, N, name in ((point[0], self.h1, self.N1, "t1"), (point[1], self.h2, self.N2, "t2")):
            k = int(round(x / h))
            if abs(k * h - x) > tol * max(1.0, abs(x)) or k < 0 or k > N:
                raise DomainError(f"{name}={x!r} is not a node of the grid (step {h!r}, {N} cells)")
            out.append(k)
        return out[0], out[1]

    def coarsen(self, k: int = 1) -> "Grid2D":
        return Grid2D(self.T1, self.T2, self.n1 - k, self.n2 - k)

    def refine(self, k: int = 1) -> "Grid2D":
        return Grid2D(self.T1, self.T2, self.n1 + k, self.n2 + k)


def _as_vector_values(values: np.ndarray, lead: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == lead:
        v = v[..., None]
    return v


@dataclass(frozen=True, eq=False)
class Field2D:
    """Node values of an ``R^d``-valued field on a :class:`Grid2D`."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = _as_vector_values(self.values, 2)
        if v.ndim != 3 or v.shape[:2] != self.grid.shape:
            raise DomainError(f"values of shape {np.shape(self.values)} do not match grid nodes {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v = np.array(v, dtype=float, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[2]

    @classmethod
    def from_function(cls, grid: Grid2D, func: Callable) -> "Field2D":
        """Sample ``func(t1, t2)`` (vectorized over meshgrid arrays) at every node."""
        T1, T2 = grid.mesh()
        v = np.asarray(func(T1, T2), dtype=float)
        if v.ndim == 0:
            v = np.full(grid.shape, float(v))
        return cls(grid, v)

    @classmethod
    def zeros(cls, grid: Grid2D, d: int = 1) -> "Field2D":
        return cls(grid, np.zeros(grid.shape + (d,)))

    def __add__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.values + other.values)

    def __sub__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.values - other.values)

    def sup_distance(self, other: "Field2D") -> float:
        _check_same_grid(self, other)
        return float(np.max(np.linalg.norm(self.values - other.values, axis=-1)))

    def restrict(self, k: int) -> "Field2D":
        """Values on the grid coarsened ``k`` times (every ``2**k``-th node)."""
        s = 2 ** k
        return Field2D(self.grid.coarsen(k), self.values[::s, ::s])

    def at(self, point: Sequence[float], interpolate: bool = False) -> np.ndarray:
        """Value at a point; off-node points need ``interpolate=True`` (bilinear)."""
        g = self.grid
        if not interpolate:
            i, j = g.index(point)
            return self.values[i, j].copy()
        x1, x2 = float(point[0]), float(point[1])
        if not (0 <= x1 <= g.T1 and 0 <= x2 <= g.T2):
            raise DomainError(f"point {point!r} outside [0,{g.T1}]x[0,{g.T2}]")
        u1, u2 = x1 / g.h1, x2 / g.h2
        i, j = min(int(u1), g.N1 - 1), min(int(u2), g.N2 - 1)
        a, b = u1 - i, u2 - j
        v = self.values
        return ((1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j]
                + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1])


def _check_same_grid(f: Field2D, g: Field2D):
    if f.grid != g.grid:
        raise DomainError(f"fields live on different grids: {f.grid} vs {g.grid}")
    if f.d != g.d:
        raise DomainError(f"dimension mismatch: {f.d} vs {g.d}")


@dataclass(frozen=True, eq=False)
class Path1D:
    """Node values of an ``R^d``-valued path on ``[0, T]`` with ``2**n`` cells."""

    T: float
    n: int
    values: np.ndarray

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon must be positive, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"level must be an integer >= 1, got {self.n}")
        v = _as_vector_values(self.values, 1)
        if v.ndim != 2 or v.shape[0] != 2 ** int(self.n) + 1:
            raise DomainError(f"path needs {2 ** int(self.n) + 1} nodes, got values of shape {np.shape(self.values)}")
        if not np.all(np.isfinite(v)):
            raise DomainError("path values must be finite")
        v = np.array(v, dtype=float, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return 2 ** self.n

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.h

    @classmethod
    def from_function(cls, T: float, n: int, func: Callable) -> "Path1D":
        t = np.arange(2 ** n + 1) * (T / 2 ** n)
        v = np.asarray(func(t), dtype=float)
        if v.ndim == 0:
            v = np.full(t.shape, float(v))
        return cls(T, n, v)

    def as_field(self, axis: int = 1, T_other: float = 1.0, n_other: int = 1) -> Field2D:
        """Lift to a field constant along the other axis."""
        if axis == 1:
            grid = Grid2D(self.T, T_other, self.n, n_other)
            v = np.broadcast_to(self.values[:, None, :], grid.shape + (self.d,))
        else:
            grid = Grid2D(T_other, self.T, n_other, self.n)
            v = np.broadcast_to(self.values[None, :, :], grid.shape + (self.d,))
        return Field2D(grid, v)


# ---------------------------------------------------------------------------
# increments

def box_increment(values: np.ndarray, i0, j0, i1, j1) -> np.ndarray:
    """Vectorized rectangular increment over index rectangles of a node array."""
    return values[i1, j1] - values[i1, j0] - values[i0, j1] + values[i0, j0]


def rectangular_increment(f, s: Sequence[float], t: Sequence[float], interpolate: bool = False) -> np.ndarray:
    """
    Rectangular increment of ``f`` over ``[s, t]``.

    ``f`` is either a :class:`Field2D` (``s`` and ``t`` must be grid nodes unless
    ``interpolate`` is set) or a callable ``f(t1, t2)``.  Degenerate rectangles
    give exactly zero.
    """
    if s[0] > t[0] or s[1] > t[1]:
        raise DomainError(f"rectangle corners must satisfy s <= t, got s={tuple(s)}, t={tuple(t)}")
    if isinstance(f, Field2D):
        if interpolate:
            vals = [f.at(p, interpolate=True) for p in ((t[0], t[1]), (t[0], s[1]), (s[0], t[1]), (s[0], s[1]))]
        else:
            i0, j0 = f.grid.index(s)
            i1, j1 = f.grid.index(t)
            return box_increment(f.values, i0, j0, i1, j1).copy()
    else:
        vals = [np.atleast_1d(np.asarray(f(a, b), dtype=float))
                for a, b in ((t[0], t[1]), (t[0], s[1]), (s[0], t[1]), (s[0], s[1]))]
    if s[0] == t[0] or s[1] == t[1]:
        return np.zeros_like(vals[0])
    return vals[0] - vals[1] - vals[2] + vals[3]


def boundary_decompose(f: Field2D) -> tuple[Field2D, Field2D]:
    """
    Split ``f = z + y`` with ``z`` additive (zero rectangular increments) and
    ``y`` vanishing on both axes.

    ``z(t) = f(t1, 0) + f(0, t2) - f(0, 0)`` and ``y(t) = box_{0,t} f``.  The axis
    traces are written exactly: ``y`` is set to zero and ``z`` to ``f`` there.
    """
    v = f.values
    z = v[:, :1, :] + (v[:1, :, :] - v[:1, :1, :])
    y = v - v[:, :1, :] - v[:1, :, :] + v[:1, :1, :]
    z = np.array(z, copy=True)
    z[0, :, :] = v[0, :, :]
    z[:, 0, :] = v[:, 0, :]
    y[0, :, :] = 0.0
    y[:, 0, :] = 0.0
    return Field2D(f.grid, z), Field2D(f.grid, y)


# ---------------------------------------------------------------------------
# Hölder seminorms

@dataclass(frozen=True)
class HolderExponents:
    """Log-log fit of increment magnitudes against scale.

    ``gamma1``/``gamma2`` are the directional exponents and ``mixed`` the pair
    fitted to the rectangular increments.  Degenerate (identically zero)
    increments are reported as ``inf`` with the matching flag set.
    """

    gamma1: float
    gamma2: float
    mixed: tuple[float, float]
    r2_1: float
    r2_2: float
    r2_mixed: float
    scales1: tuple[int, ...]
    scales2: tuple[int, ...]
    degenerate1: bool = False
    degenerate2: bool = False
    degenerate_mixed: bool = False
    noise_floor: bool = False


@dataclass(frozen=True)
class HolderReport:
    alpha: tuple[float, float]
    seminorm_10: float
    seminorm_01: float
    seminorm_11: float
    exact: bool
    fitted_exponents: HolderExponents | None = field(default=None)

    @property
    def total(self) -> float:
        return self.seminorm_10 + self.seminorm_01 + self.seminorm_11


def _window_indices(f: Field2D, window) -> tuple[int, int, int, int]:
    g = f.grid
    if window is None:
        return 0, 0, g.N1, g.N2
    (s1, s2), (t1, t2) = window
    i0, j0 = g.index((s1, s2))
    i1, j1 = g.index((t1, t2))
    if i1 <= i0 or j1 <= j0:
        raise DomainError(f"empty window {window!r}")
    return i0, j0, i1, j1


def _lags(n_cells: int, exact: bool) -> np.ndarray:
    if exact:
        return np.arange(1, n_cells + 1)
    k = 2 ** np.arange(int(np.log2(n_cells)) + 1)
    return k[k <= n_cells]


def holder_seminorms(f: Field2D, alpha: Sequence[float], window=None, *,
                     fit: bool = False, seed: int = 0) -> HolderReport:
    """
    The three 2D Hölder seminorms of ``f`` over node pairs in ``window``.

    Parameters
    ----------
    f : Field2D
    alpha : (alpha1, alpha2) in (0, 1)^2
    window : ((s1, s2), (t1, t2)), optional
        Sub-rectangle given by two grid nodes; default is the whole grid.
    fit : bool
        Also attach :func:`estimate_holder_exponents` output.

    Notes
    -----
    Suprema are exact over all node pairs when the window has at most
    ``2**EXACT_SUP_LEVEL`` cells per axis.  Larger windows use every
    power-of-two lag at every position, plus ``N_RANDOM_PAIRS`` random node
    pairs drawn with ``seed``; the result is then a lower bound.
    """
    a1, a2 = float(alpha[0]), float(alpha[1])
    if not (0 < a1 < 1 and 0 < a2 < 1):
        raise DomainError(f"alpha must lie in (0,1)^2, got {alpha!r}")
    i0, j0, i1, j1 = _window_indices(f, window)
    v = f.values[i0:i1 + 1, j0:j1 + 1]
    h1, h2 = f.grid.h1, f.grid.h2
    M1, M2 = i1 - i0, j1 - j0
    exact = max(M1, M2) <= 2 ** EXACT_SUP_LEVEL
    lags1, lags2 = _lags(M1, exact), _lags(M2, exact)

    s10 = 0.0
    for k in lags1:
        m = np.max(np.linalg.norm(v[k:] - v[:-k], axis=-1))
        s10 = max(s10, m / (k * h1) ** a1)
    s01 = 0.0
    for k in lags2:
        m = np.max(np.linalg.norm(v[:, k:] - v[:, :-k], axis=-1))
        s01 = max(s01, m / (k * h2) ** a2)
    s11 = 0.0
    for k1 in lags1:
        r = v[k1:] - v[:-k1]
        w1 = (k1 * h1) ** a1
        for k2 in lags2:
            dv = r[:, k2:] - r[:, :-k2]
            m = np.sqrt(np.max(np.einsum("ijk,ijk->ij", dv, dv)))
            s11 = max(s11, m / (w1 * (k2 * h2) ** a2))

    if not exact:
        rng = np.random.default_rng(seed)
        p = rng.integers(0, [M1 + 1, M2 + 1, M1 + 1, M2 + 1], size=(N_RANDOM_PAIRS, 4))
        s_i, t_i = np.minimum(p[:, 0], p[:, 2]), np.maximum(p[:, 0], p[:, 2])
        s_j, t_j = np.minimum(p[:, 1], p[:, 3]), np.maximum(p[:, 1], p[:, 3])
        ok1, ok2 = t_i > s_i, t_j > s_j
        d1 = np.linalg.norm(v[t_i, s_j] - v[s_i, s_j], axis=-1)
        d2 = np.linalg.norm(v[s_i, t_j] - v[s_i, s_j], axis=-1)
        if ok1.any():
            s10 = max(s10, float(np.max(d1[ok1] / ((t_i - s_i)[ok1] * h1) ** a1)))
        if ok2.any():
            s01 = max(s01, float(np.max(d2[ok2] / ((t_j - s_j)[ok2] * h2) ** a2)))
        ok = ok1 & ok2
        if ok.any():
            b = np.linalg.norm(box_increment(v, s_i, s_j, t_i, t_j), axis=-1)
            den = ((t_i - s_i) * h1) ** a1 * ((t_j - s_j) * h2) ** a2
            s11 = max(s11, float(np.max(b[ok] / den[ok])))

    fitted = estimate_holder_exponents(f) if fit else None
    return HolderReport((a1, a2), float(s10), float(s01), float(s11), exact, fitted)


def _fit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2) / ss) if ss > 0 else 1.0
    return float(coef[0]), r2


def _drop_noise_floor(scales: list[int], mags: list[float]) -> tuple[list[int], list[float], bool]:
    if len(scales) >= 5 and mags[-2] > 0:
        ratio = mags[-1] / mags[-2]
        if abs(ratio - 1.0) <= 0.01:
            return scales[:-2], mags[:-2], True
    return scales, mags, False


def estimate_holder_exponents(f, scales: Sequence[int] | None = None,
                              scales2: Sequence[int] | None = None) -> HolderExponents:
    """
    Fit Hölder exponents from dyadic increments.

    At level ``l`` the increment length is ``T * 2**-l``.  For every level the
    largest increment magnitude is taken over a fixed set of anchor nodes, the
    nodes of the coarsest level in ``scales``; using the same anchors at every
    scale keeps the fit free of the ``sqrt(log)`` growth a sup over all
    positions picks up for rough paths.  Directional exponents come from a
    least-squares line through ``(log delta, log max|increment|)``; the mixed
    pair from a plane fit of the rectangular increments over both scale lists.

    When the two finest levels sit on a noise floor (consecutive magnitudes
    within 1 %) they are dropped, provided three levels remain.
    """
    if isinstance(f, Path1D):
        # constant along the second axis, which is then reported as degenerate
        f = f.as_field(axis=1, T_other=1.0, n_other=3)
    g = f.grid
    if scales is None:
        scales = list(range(max(1, g.n1 - 5), g.n1 + 1))
    if scales2 is None:
        scales2 = list(range(max(1, g.n2 - 5), g.n2 + 1)) if g.n2 >= 3 else list(scales)
    scales, scales2 = sorted(int(s) for s in scales), sorted(int(s) for s in scales2)
    if len(scales) < 3 or len(scales2) < 3:
        raise DomainError("at least three dyadic scales are required per axis")
    if scales[-1] > g.n1 or scales2[-1] > g.n2 or scales[0] < 0 or scales2[0] < 0:
        raise DomainError(f"scales exceed grid resolution (n1={g.n1}, n2={g.n2})")
    v = f.values
    a1 = np.arange(0, g.N1, 2 ** (g.n1 - scales[0]))
    a2 = np.arange(0, g.N2, 2 ** (g.n2 - scales2[0]))

    def directional(axis, levels, anchors, other):
        mags = []
        for lvl in levels:
            k = 2 ** ((g.n1 if axis == 1 else g.n2) - lvl)
            if axis == 1:
                dv = v[anchors + k][:, other] - v[anchors][:, other]
            else:
                dv = v[other][:, anchors + k] - v[other][:, anchors]
            mags.append(float(np.max(np.linalg.norm(dv, axis=-1))))
        return mags

    all1, all2 = np.arange(g.N1 + 1), np.arange(g.N2 + 1)
    m1 = directional(1, scales, a1, all2)
    m2 = directional(2, scales2, a2, all1)

    def fit_dir(levels, mags, T):
        if min(mags) <= 0.0:
            return float("inf"), float("nan"), True, False
        lv, mg, floor = _drop_noise_floor(list(levels), list(mags))
        x = np.log(T * 2.0 ** -np.asarray(lv, dtype=float))
        slope, r2 = _fit_line(x, np.log(mg))
        return slope, r2, False, floor

    g1, r1, deg1, fl1 = fit_dir(scales, m1, g.T1)
    g2, r2, deg2, fl2 = fit_dir(scales2, m2, g.T2)

    rows = []
    for l1 in scales:
        k1 = 2 ** (g.n1 - l1)
        for l2 in scales2:
            k2 = 2 ** (g.n2 - l2)
            I, J = np.meshgrid(a1, a2, indexing="ij")
            b = box_increment(v, I, J, I + k1, J + k2)
            rows.append((np.log(g.T1 * 2.0 ** -l1), np.log(g.T2 * 2.0 ** -l2),
                         float(np.max(np.linalg.norm(b, axis=-1)))))
    rows = np.asarray(rows)
    if np.min(rows[:, 2]) <= 0.0:
        mixed, r2m, degm = (float("inf"), float("inf")), float("nan"), True
    else:
        A = np.column_stack([rows[:, 0], rows[:, 1], np.ones(len(rows))])
        y = np.log(rows[:, 2])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss = np.sum((y - y.mean()) ** 2)
        r2m = 1.0 - float(np.sum(resid ** 2) / ss) if ss > 0 else 1.0
        mixed, degm = (float(coef[0]), float(coef[1])), False
    return HolderExponents(g1, g2, mixed, r1, r2, r2m, tuple(scales), tuple(scales2),
                           deg1, deg2, degm, fl1 or fl2)
