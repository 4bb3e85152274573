"""
Two-dimensional sewing: germs, the defect operators delta1/delta2, dyadic
partition sums with convergence-order certification, and the nonlinear
Young integral ``int A(ds, y_s)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import ConfigurationError, DomainError, NumericalError
from .grid_field import Field2D, Grid2D, holder_seminorms
from .timefield import TimeIndexedField

DEFAULT_TOL = 1e-9
DEFAULT_MAX_LEVEL = 12
CHUNK_CELLS = 2 ** 21


class Germ:
    """
    A rectangle-indexed map ``(s, t) -> Xi_{s,t}`` in ``R^d``.

    ``func(s1, s2, t1, t2)`` receives broadcastable arrays and returns values
    with a trailing axis of length ``d``.  Degenerate rectangles must give 0 up to rounding;
    this is probed at construction.
    """

    def __init__(self, func: Callable, d: int = 1, *, domain=((0.0, 0.0), (1.0, 1.0)),
                 exponents: tuple | None = None, name: str = "germ", check: bool = True):
        self.func, self.d, self.domain, self.exponents, self.name = func, int(d), domain, exponents, name
        if check:
            (a1, a2), (b1, b2) = domain
            p1 = np.array([a1, 0.3 * a1 + 0.7 * b1, b1])
            p2 = np.array([a2, 0.6 * a2 + 0.4 * b2, b2])
            v1 = self.evaluate_raw(p1[:, None], p2[None, :], p1[:, None], np.full((1, 3), b2))
            v2 = self.evaluate_raw(p1[:, None], p2[None, :], np.full((3, 1), b1), p2[None, :])
            full = self.evaluate_raw(np.float64(a1), np.float64(a2), np.float64(b1), np.float64(b2))
            # cancellation in differenced germs leaves rounding residue only
            tol = 64 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(full))))
            if np.max(np.abs(v1)) > tol or np.max(np.abs(v2)) > tol:
                raise ConfigurationError(f"germ {name!r} does not vanish on degenerate rectangles")

    def evaluate_raw(self, s1, s2, t1, t2) -> np.ndarray:
        v = np.asarray(self.func(s1, s2, t1, t2), dtype=float)
        if v.ndim == 0 or v.shape[-1] != self.d:
            v = v[..., None]
        return v

    def __call__(self, s: Sequence[float], t: Sequence[float]) -> np.ndarray:
        if s[0] == t[0] or s[1] == t[1]:
            return np.zeros(self.d)
        return self.evaluate_raw(np.float64(s[0]), np.float64(s[1]), np.float64(t[0]), np.float64(t[1])).reshape(self.d)

    @classmethod
    def additive(cls, F: Callable, d: int = 1, **kw) -> "Germ":
        """``Xi_{s,t} = box_{s,t} F`` for a function ``F(t1, t2)``."""
        return cls(lambda s1, s2, t1, t2: F(t1, t2) - F(t1, s2) - F(s1, t2) + F(s1, s2), d, **kw)

    @classmethod
    def planted(cls, beta: tuple[float, float], F: Callable | None = None, weight=(1.0, 1.0), **kw) -> "Germ":
        """
        ``box F + w1 (t1-s1)^b1 (t2-s2) + w2 (t1-s1) (t2-s2)^b2``.

        The two defect terms are coherent (positive on every cell), so the
        dyadic sums converge at exactly the rate ``2^{-n (min b - 1)}``.
        """
        b1, b2 = float(beta[0]), float(beta[1])
        F = F or (lambda a, b: np.sin(a) * np.cos(b))

        def func(s1, s2, t1, t2):
            d1, d2 = t1 - s1, t2 - s2
            return (F(t1, t2) - F(t1, s2) - F(s1, t2) + F(s1, s2)
                    + weight[0] * d1 ** b1 * d2 + weight[1] * d1 * d2 ** b2)
        return cls(func, 1, exponents=(b1, b2), name=f"planted{(b1, b2)}", **kw)


def _pt(p) -> tuple[float, float]:
    return float(p[0]), float(p[1])


def delta1(germ: Germ, s, u, t) -> np.ndarray:
    """``Xi_{s,t} - Xi_{s,(u1,t2)} - Xi_{(u1,s2),t}``."""
    s, u, t = _pt(s), _pt(u), _pt(t)
    if not s[0] <= u[0] <= t[0] or s[1] > t[1]:
        raise DomainError(f"delta1 needs s1 <= u1 <= t1 and s2 <= t2, got s={s}, u={u}, t={t}")
    return germ(s, t) - germ(s, (u[0], t[1])) - germ((u[0], s[1]), t)


def delta2(germ: Germ, s, u, t) -> np.ndarray:
    """``Xi_{s,t} - Xi_{s,(t1,u2)} - Xi_{(s1,u2),t}``."""
    s, u, t = _pt(s), _pt(u), _pt(t)
    if not s[1] <= u[1] <= t[1] or s[0] > t[0]:
        raise DomainError(f"delta2 needs s2 <= u2 <= t2 and s1 <= t1, got s={s}, u={u}, t={t}")
    return germ(s, t) - germ(s, (t[0], u[1])) - germ((s[0], u[1]), t)


def delta12(germ: Germ, s, u, t, *, check: bool = True) -> np.ndarray:
    """
    ``delta1`` applied to ``delta2 Xi``; with ``check`` the other order is
    evaluated too and a mismatch beyond rounding raises :class:`NumericalError`.
    """
    s, u, t = _pt(s), _pt(u), _pt(t)
    if not (s[0] <= u[0] <= t[0] and s[1] <= u[1] <= t[1]):
        raise DomainError(f"delta12 needs s <= u <= t, got s={s}, u={u}, t={t}")

    def d2(a, b):
        return delta2(germ, a, u, b)

    out = d2(s, t) - d2(s, (u[0], t[1])) - d2((u[0], s[1]), t)
    if check:
        def d1(a, b):
            return delta1(germ, a, u, b)

        other = d1(s, t) - d1(s, (t[0], u[1])) - d1((s[0], u[1]), t)
        scale = max(1.0, float(np.max(np.abs(germ(s, t)))))
        if np.max(np.abs(out - other)) > 64 * np.finfo(float).eps * scale:
            raise NumericalError("delta1 and delta2 do not commute on this germ",
                                 {"delta1_delta2": out.tolist(), "delta2_delta1": other.tolist()})
    return out


@dataclass
class SewingResult:
    """
    Dyadic partial sums ``I_n`` of a germ over a rectangle and the sewn value.

    ``value`` is the extrapolated limit when ``extrapolation != "none"``,
    otherwise the last partial sum ``raw_value``.  ``value_field`` holds the sewn
    object at the nodes of the finest partition (cumulative cell sums), so
    its rectangular increments are the partial integrals.
    """

    value: np.ndarray
    raw_value: np.ndarray
    levels: list
    partial_sums: np.ndarray
    diff_norms: np.ndarray
    local_orders: np.ndarray
    observed_order: float
    converged: bool
    residual: float
    fitted_constant: float | None
    extrapolation: str
    value_field: Field2D | None = None
    notes: list = field(default_factory=list)

    def table(self) -> list[dict]:
        rows = []
        for k, lvl in enumerate(self.levels):
            row = {"level": lvl}
            for c, v in enumerate(np.atleast_1d(self.partial_sums[k])):
                row[f"value_{c + 1}"] = float(v)
            row["diff_norm"] = float(self.diff_norms[k - 1]) if k >= 1 else float("nan")
            row["observed_order"] = float(self.local_orders[k - 2]) if k >= 2 else float("nan")
            rows.append(row)
        return rows


def _observed_order(diffs: np.ndarray, floor: float) -> float:
    ok = np.nonzero(diffs > floor)[0]
    if ok.size < 2:
        return float("inf")
    idx = ok[-min(5, ok.size):]
    slope = np.polyfit(idx.astype(float), np.log2(diffs[idx]), 1)[0]
    return float(-slope)


def _romberg(sums: np.ndarray, p: int, columns: int) -> tuple[np.ndarray, float]:
    R = [np.asarray(sums, dtype=float)]
    for k in range(columns):
        q = p + k
        prev = R[-1]
        R.append((2.0 ** q * prev[1:] - prev[:-1]) / (2.0 ** q - 1.0))
    best = R[-1][-1]
    resid = float(np.max(np.abs(R[-1][-1] - R[-2][-1])))
    return best, resid


def _finish(levels, sums, tol, extrapolate, converged_at, exponents, notes, fld) -> SewingResult:
    sums = np.asarray(sums)
    diffs = np.max(np.abs(np.diff(sums, axis=0)), axis=-1) if len(sums) > 1 else np.zeros(0)
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.log2(diffs[:-1] / diffs[1:]) if diffs.size > 1 else np.zeros(0)
    scale = 1.0 + float(np.max(np.abs(sums[-1])))
    floor = tol * scale
    p_hat = _observed_order(diffs, floor)
    raw = sums[-1].copy()
    value, resid, method = raw, float(diffs[-1]) if diffs.size else 0.0, "none"
    if converged_at is not None:
        resid = float(np.max(diffs[-3:])) if diffs.size else 0.0
    elif extrapolate and math.isfinite(p_hat) and p_hat > 0 and len(sums) >= 3:
        p_int = round(p_hat)
        if p_int >= 1 and abs(p_hat - p_int) < 0.15:
            cols = min(4, len(sums) - 1)
            value, resid = _romberg(sums, p_int, cols)
            method = f"romberg(p={p_int},columns={cols})"
        else:
            r = 2.0 ** p_hat
            value = (r * sums[-1] - sums[-2]) / (r - 1.0)
            resid = float(np.max(np.abs(value - sums[-1])))
            method = f"aitken(p={p_hat:.3f})"
    elif math.isfinite(p_hat) and p_hat > 0 and diffs.size:
        r = 2.0 ** -p_hat
        resid = float(diffs[-1] * r / (1 - r))
    C = None
    if diffs.size:
        beta_min = min(exponents) if exponents else None
        rate = (beta_min - 1.0) if beta_min else (p_hat if math.isfinite(p_hat) else None)
        if rate is not None and rate > 0:
            err = np.max(np.abs(np.asarray(sums) - value), axis=-1)
            C = float(np.max(err * 2.0 ** (rate * np.asarray(levels, dtype=float))))
    return SewingResult(np.asarray(value, dtype=float), raw, list(levels), sums, diffs, local, p_hat,
                        converged_at is not None, resid, C, method, fld, notes)


def _run_levels(level_sum: Callable[[int, bool], tuple], min_level: int, max_level: int, tol: float,
                extrapolate: bool, exponents, want_field: bool) -> SewingResult:
    levels, sums, notes = [], [], []
    small = 0
    converged_at = None
    nonpositive = 0
    fld = None
    for n in range(min_level, max_level + 1):
        last = want_field and n == max_level
        total, cells = level_sum(n, last)
        levels.append(n)
        sums.append(total)
        if last:
            fld = cells
        if len(sums) >= 2:
            dn = float(np.max(np.abs(sums[-1] - sums[-2])))
            thresh = tol * (1.0 + float(np.max(np.abs(sums[-1]))))
            small = small + 1 if dn < thresh else 0
            if len(sums) >= 3:
                dp = float(np.max(np.abs(sums[-2] - sums[-3])))
                if dn >= thresh and dp > 0 and dn >= dp:
                    nonpositive += 1
                else:
                    nonpositive = 0
                if nonpositive >= 3:
                    raise NumericalError("dyadic sums do not converge (observed order <= 0 on 3 consecutive levels)",
                                         {"levels": levels, "partial_sums": np.asarray(sums).tolist()})
            if small >= 3:
                converged_at = n
                if want_field and fld is None:
                    _, fld = level_sum(n, True)
                break
    return _finish(levels, sums, tol, extrapolate, converged_at, exponents, notes, fld)


def _chunked_germ_sum(germ: Germ, a, b, n: int, keep: bool):
    P = 2 ** n
    t1 = a[0] + (b[0] - a[0]) * np.arange(P + 1) / P
    t2 = a[1] + (b[1] - a[1]) * np.arange(P + 1) / P
    t1[-1], t2[-1] = b[0], b[1]
    rows = max(1, CHUNK_CELLS // P)
    total = np.zeros(germ.d)
    cells = np.empty((P, P, germ.d)) if keep else None
    for r0 in range(0, P, rows):
        r1 = min(P, r0 + rows)
        v = germ.evaluate_raw(t1[r0:r1, None], t2[None, :-1], t1[r0 + 1:r1 + 1, None], t2[None, 1:])
        v = np.broadcast_to(v, (r1 - r0, P, germ.d))
        total = total + v.reshape(-1, germ.d).sum(axis=0)
        if keep:
            cells[r0:r1] = v
    return total, cells


def sew(germ: Germ, rectangle=None, max_level: int = DEFAULT_MAX_LEVEL, *, min_level: int = 0,
        tol: float = DEFAULT_TOL, extrapolate: bool = True, keep_field: bool = False) -> SewingResult:
    """
    Sew ``germ`` over ``rectangle = ((s1, s2), (t1, t2))`` (default: its domain).

    Level ``n`` sums the germ over the uniform ``2^n x 2^n`` partition.  The
    iteration stops once three consecutive level differences fall below
    ``tol * (1 + |I_n|)``; otherwise at ``max_level``, where the limit is
    extrapolated from the partial sums (Romberg when the observed order is
    close to an integer, a single Richardson step otherwise).  Observed orders
    that are <= 0 on three consecutive levels while the differences exceed the
    tolerance raise :class:`NumericalError`.
    """
    (a, b) = rectangle if rectangle is not None else germ.domain
    a, b = _pt(a), _pt(b)
    if a[0] > b[0] or a[1] > b[1]:
        raise DomainError(f"rectangle corners must satisfy s <= t, got {a}, {b}")
    if a[0] == b[0] or a[1] == b[1]:
        z = np.zeros((1, germ.d))
        return _finish([0], z, tol, False, 0, None, ["degenerate rectangle"], None)

    def level_sum(n, keep):
        total, cells = _chunked_germ_sum(germ, a, b, n, keep)
        fld = None
        if keep:
            g = Grid2D(b[0] - a[0], b[1] - a[1], max(n, 1), max(n, 1)) if n >= 1 else None
            if g is not None:
                vals = np.zeros(g.shape + (germ.d,))
                vals[1:, 1:] = cells.cumsum(axis=0).cumsum(axis=1)
                fld = Field2D(g, vals)
        return total, fld

    return _run_levels(level_sum, min_level, max_level, tol, extrapolate, germ.exponents, keep_field)


def _rect_indices(grid: Grid2D, rectangle):
    if rectangle is None:
        return 0, 0, grid.N1, grid.N2
    (s, t) = rectangle
    i0, j0 = grid.index(s)
    i1, j1 = grid.index(t)
    if i1 < i0 or j1 < j0:
        raise DomainError(f"rectangle corners must satisfy s <= t, got {s}, {t}")
    return i0, j0, i1, j1


def _dyadic(k: int, what: str) -> int:
    if k < 1 or k & (k - 1):
        raise DomainError(f"{what} spans {k} grid cells; a power of two is required for dyadic sewing")
    return int(math.log2(k))


def nly_integral(A: TimeIndexedField, y: Field2D, rectangle=None, *, max_level: int | None = None,
                 min_level: int = 0, tol: float = DEFAULT_TOL, extrapolate: bool = True,
                 y_exponent: Sequence[float] | None = None, keep_field: bool = False) -> SewingResult:
    """
    ``int_{[s,t]} A(dr, y_r)`` as the sewing of ``Xi_{u,v} = box_{u,v} A(y_u)``.

    The rectangle (default: all of ``y``'s grid) must be spanned by a power of
    two of grid cells per axis.  Level ``n`` uses ``2^n`` cells per axis; levels
    finer than ``y``'s grid hold ``y`` at the last node below (left point).
    When ``A.exponents`` carries ``gamma`` and ``eta`` and ``y_exponent`` is
    given, the condition ``alpha_i eta + gamma_i > 1`` is checked and a
    warning issued when it fails.
    """
    g = y.grid
    if y.d != A.d:
        raise DomainError(f"dimension mismatch: y has d={y.d}, A has d={A.d}")
    i0, j0, i1, j1 = _rect_indices(g, rectangle)
    s = (i0 * g.h1, j0 * g.h2)
    t = (i1 * g.h1, j1 * g.h2)
    if i0 == i1 or j0 == j1:
        return _finish([0], np.zeros((1, A.d)), tol, False, 0, None, ["degenerate rectangle"], None)
    k1, k2 = _dyadic(i1 - i0, "rectangle side 1"), _dyadic(j1 - j0, "rectangle side 2")
    if max_level is None:
        max_level = max(k1, k2)
    if A.exponents and y_exponent is not None:
        gam = A.exponents.get("gamma")
        eta = A.exponents.get("eta")
        if gam is not None and eta is not None:
            for ai, gi in zip(y_exponent, np.broadcast_to(gam, (2,))):
                if not ai * eta + gi > 1:
                    warnings.warn(f"regularity condition alpha*eta + gamma > 1 fails "
                                  f"({ai}*{eta} + {gi} <= 1); the integral may not exist", stacklevel=2)

    def level_sum(n, keep):
        P = 2 ** n
        t1 = s[0] + (t[0] - s[0]) * np.arange(P + 1) / P
        t2 = s[1] + (t[1] - s[1]) * np.arange(P + 1) / P
        if A.grid is not None and A.grid == g:
            # exact node times avoid round-off in the node lookup
            t1 = g.t1[i0 + (np.arange(P + 1) * (i1 - i0)) // P] if n <= k1 else t1
            t2 = g.t2[j0 + (np.arange(P + 1) * (j1 - j0)) // P] if n <= k2 else t2
        ii = i0 + np.floor(np.arange(P) * (i1 - i0) / P).astype(np.int64)
        jj = j0 + np.floor(np.arange(P) * (j1 - j0) / P).astype(np.int64)
        x = y.values[ii[:, None], jj[None, :]]
        cells = A.partition_increments(t1, t2, x)
        total = cells.reshape(-1, A.d).sum(axis=0)
        fld = None
        if keep:
            gg = Grid2D(t[0] - s[0], t[1] - s[1], max(n, 1), max(n, 1)) if n >= 1 else None
            if gg is not None:
                vals = np.zeros(gg.shape + (A.d,))
                vals[1:, 1:] = cells.cumsum(axis=0).cumsum(axis=1)
                fld = Field2D(gg, vals)
        return total, fld

    return _run_levels(level_sum, min_level, max_level, tol, extrapolate, None, keep_field)


@dataclass
class GapReport:
    rectangles: list
    gaps: np.ndarray
    field_distance: np.ndarray
    path_distance: np.ndarray
    c1: float
    c2: float
    c1_lsq: float
    c2_lsq: float
    dominated: bool
    full_gap: float


def _dyadic_rectangles(grid: Grid2D, depth: int):
    rects = []
    for lvl in range(depth + 1):
        P = 2 ** lvl
        if P > min(grid.N1, grid.N2):
            break
        for a in range(P):
            for b in range(P):
                rects.append(((a * grid.T1 / P, b * grid.T2 / P), ((a + 1) * grid.T1 / P, (b + 1) * grid.T2 / P)))
    return rects


def stability_gap(A: TimeIndexedField, A2: TimeIndexedField, y: Field2D, y2: Field2D, rectangles=None, *,
                  alpha: Sequence[float] = (0.5, 0.5), gamma: Sequence[float] = (1.0, 1.0),
                  depth: int = 2, n_x: int = 33, **kw) -> GapReport:
    """
    Compare ``int A(dr, y_r)`` with ``int A2(dr, y2_r)`` over a family of
    rectangles (default: dyadic squares up to ``depth``).

    Per rectangle ``[s,t]`` the gap is set against two features,
    ``f1 = max_x |box_{s,t}(A - A2)(x)|`` over ``n_x`` points spanning the
    values of both paths, and
    ``f2 = (|y_s - y2_s| + [y - y2]_{(1,1),alpha}) * m(t - s)^gamma``.
    ``c1, c2 >= 0`` are the smallest envelope constants (linear program
    minimizing ``sum c1 f1 + c2 f2`` subject to domination of every gap);
    ``c1_lsq, c2_lsq`` a nonnegative least-squares fit.  The constants are
    diagnostics, not certified values.
    """
    if y.grid != y2.grid:
        raise DomainError("paths must share the grid")
    g = y.grid
    rects = rectangles if rectangles is not None else _dyadic_rectangles(g, depth)
    vals = np.concatenate([y.values.reshape(-1, y.d), y2.values.reshape(-1, y.d)])
    xs = np.linspace(vals.min(axis=0), vals.max(axis=0), n_x)
    diff = Field2D(g, y.values - y2.values)
    gaps, f1, f2 = [], [], []
    full = None
    for (s, t) in rects:
        I = nly_integral(A, y, (s, t), **kw).value
        J = nly_integral(A2, y2, (s, t), **kw).value
        gap = float(np.max(np.abs(I - J)))
        gaps.append(gap)
        dA = 0.0
        for x in xs:
            dA = max(dA, float(np.max(np.abs(A.increment(s, t, x) - A2.increment(s, t, x)))))
        f1.append(dA)
        i0, j0 = g.index(s)
        i1, j1 = g.index(t)
        hold = float(np.max(np.abs(diff.values[i0, j0])))
        if i1 - i0 >= 1 and j1 - j0 >= 1:
            hold += holder_seminorms(diff, alpha, (s, t)).seminorm_11
        f2.append(hold * (t[0] - s[0]) ** gamma[0] * (t[1] - s[1]) ** gamma[1])
        if s == (0.0, 0.0) and t == (g.T1, g.T2):
            full = gap
    gaps, f1, f2 = np.array(gaps), np.array(f1), np.array(f2)
    X = np.column_stack([f1, f2])
    c = np.array([0.0, 0.0])
    if np.any(gaps > 0):
        res = linprog(c=X.sum(axis=0) + 1e-300, A_ub=-X, b_ub=-gaps, bounds=[(0, None), (0, None)], method="highs")
        if res.status == 0:
            c = res.x
        else:
            c = np.array([np.inf, np.inf])
    lsq, _ = nnls(X, gaps) if np.any(X) else (np.zeros(2), 0.0)
    slack = 1e-12 * (1.0 + gaps.max(initial=0.0))
    dominated = bool(np.all(gaps <= X @ c + slack)) if np.all(np.isfinite(c)) else False
    return GapReport(rects, gaps, f1, f2, float(c[0]), float(c[1]), float(lsq[0]), float(lsq[1]),
                     dominated, float(full if full is not None else gaps.max(initial=0.0)))
