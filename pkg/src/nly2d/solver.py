"""
Picard solver for ``theta_t = xi_t + int_0^t A(ds, theta_s)`` on a dyadic grid,
the regularized equation ``x = w + theta`` with ``A = b * L^{-w}``, condition
checking for the existence theorems and the mollification harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .drift import DriftSpec
from .errors import ConfigurationError, DomainError, Nly2dError, NumericalError
from .grid_field import Field2D, Grid2D, HolderReport, Path1D, holder_seminorms
from .noise import resample_path
from .occupation import DEFAULT_SCHEME, SpatialGrid, averaged_field_convolved, occupation_density
from .timefield import TimeIndexedField

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 50
DEFAULT_MAX_HALVINGS = 10


# ---------------------------------------------------------------------------
# boundary data

@dataclass(frozen=True, eq=False)
class BoundaryData:
    """
    Axis data ``xi1`` on ``[0,T1] x {0}`` and ``xi2`` on ``{0} x [0,T2]``.

    The induced field is ``xi_t = xi1(t1) + xi2(t2) - xi1(0)``; its rectangular
    increments vanish and its axis traces are the two paths exactly.
    """

    xi1: Path1D
    xi2: Path1D

    def __post_init__(self):
        if self.xi1.d != self.xi2.d:
            raise ConfigurationError(f"boundary paths have dimensions {self.xi1.d} and {self.xi2.d}")
        if not np.array_equal(self.xi1.values[0], self.xi2.values[0]):
            raise ConfigurationError(f"corner values differ: xi1(0)={self.xi1.values[0]}, xi2(0)={self.xi2.values[0]}")

    @property
    def d(self) -> int:
        return self.xi1.d

    @classmethod
    def constant(cls, grid: Grid2D, c=0.0, d: int = 1) -> "BoundaryData":
        v = np.broadcast_to(np.asarray(c, dtype=float), (d,))
        return cls(Path1D(grid.T1, grid.n1, np.broadcast_to(v, (grid.N1 + 1, d))),
                   Path1D(grid.T2, grid.n2, np.broadcast_to(v, (grid.N2 + 1, d))))

    @classmethod
    def from_functions(cls, grid: Grid2D, f1, f2) -> "BoundaryData":
        return cls(Path1D.from_function(grid.T1, grid.n1, f1), Path1D.from_function(grid.T2, grid.n2, f2))

    def _on(self, path: Path1D, T: float, n: int) -> np.ndarray:
        if path.n == n and math.isclose(path.T, T, rel_tol=1e-12):
            return path.values
        if path.T < T * (1 - 1e-12):
            raise DomainError(f"boundary path covers [0, {path.T}] but the grid needs [0, {T}]")
        return resample_path(path, T, n).values

    def field(self, grid: Grid2D) -> Field2D:
        v1 = self._on(self.xi1, grid.T1, grid.n1)
        v2 = self._on(self.xi2, grid.T2, grid.n2)
        vals = v1[:, None, :] + (v2[None, :, :] - v1[0])
        vals[:, 0, :] = v1
        vals[0, :, :] = v2
        return Field2D(grid, vals)


# ---------------------------------------------------------------------------
# conditions

@dataclass(frozen=True)
class RegularityParams:
    """Exponents entering the existence theorems; unset entries are ``None``."""

    zeta: float | None = None
    alpha: float | None = None
    gamma: tuple | None = None
    eta: float | None = None
    p: float | None = None
    q: float | None = None
    H1: float | None = None
    H2: float | None = None
    d: int = 1
    lam: float | None = None


@dataclass(frozen=True)
class Verdict:
    which: str
    passed: bool
    slacks: dict
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"which": self.which, "passed": self.passed, "slacks": dict(self.slacks),
                "details": dict(self.details)}


SELECTORS = ("general", "fbm_sum", "fbm_plus_deterministic", "sheet")


def _F(x) -> Fraction:
    return Fraction(str(x))


def _need(params, names, which):
    missing = [n for n in names if getattr(params, n) is None]
    if missing:
        exc = ConfigurationError(f"selector {which!r} needs parameters {missing}")
        exc.missing = missing
        raise exc


def _check_ranges(params: RegularityParams):
    if int(params.d) != params.d or params.d < 1:
        raise ConfigurationError(f"dimension must be a positive integer, got {params.d}")
    for name in ("H1", "H2"):
        v = getattr(params, name)
        if v is not None and not 0 < v < 1:
            raise ConfigurationError(f"{name} must lie in (0,1), got {v}")
    if params.gamma is not None:
        g = tuple(params.gamma) if np.ndim(params.gamma) else (params.gamma, params.gamma)
        if len(g) != 2 or not all(0.5 < gi <= 1 for gi in g):
            raise ConfigurationError(f"gamma must lie in (1/2, 1]^2, got {params.gamma}")
    if params.eta is not None and not 0 < params.eta < 1:
        raise ConfigurationError(f"eta must lie in (0,1), got {params.eta}")
    for name in ("p", "q"):
        v = getattr(params, name)
        if v is not None and not 1 <= v <= math.inf:
            raise ConfigurationError(f"{name} must lie in [1, inf], got {v}")
    if params.p is not None and params.q is not None:
        # decimal inputs such as q = 1.3333333333333333 cannot be exactly conjugate
        ip = 0.0 if math.isinf(params.p) else 1 / params.p
        iq = 0.0 if math.isinf(params.q) else 1 / params.q
        if abs(ip + iq - 1) > 1e-12:
            raise ConfigurationError(f"p and q must be conjugate (1/p + 1/q = 1), got p={params.p}, q={params.q}")


def check_conditions(params: RegularityParams, which: str) -> Verdict:
    """
    Evaluate the hypotheses of an existence theorem with exact decimal arithmetic.

    ``general``: ``gamma_i (1 + eta) > 1`` and ``zeta + alpha > 2 + eta``; when
    ``eta`` is not given, the feasible interval
    ``(max(0, 1/min(gamma) - 1), min(1, zeta + alpha - 2))`` is reported and
    the verdict is its non-emptiness.
    ``fbm_sum``: ``zeta > d + 3 - 1/(2 H1) - 1/(2 H2)``.
    ``fbm_plus_deterministic``: ``zeta > d + 3 - 1/(2 H1)``.
    ``sheet``: ``zeta > 3 - 1/(2 max(H1, H2)) + d/2`` and, when ``lam`` is
    given, ``lam < 1/(2 max(H1, H2)) - d/2``.

    Slacks are left side minus right side (positive means satisfied).
    """
    if which not in SELECTORS:
        raise ConfigurationError(f"unknown selector {which!r}; choose from {SELECTORS}")
    _check_ranges(params)
    d = _F(params.d)
    slacks, details = {}, {}
    if which == "general":
        _need(params, ("zeta", "alpha", "gamma"), which)
        g = params.gamma if np.ndim(params.gamma) else (params.gamma, params.gamma)
        gmin = min(_F(x) for x in g)
        lower = max(Fraction(0), 1 / gmin - 1)
        upper = min(Fraction(1), _F(params.zeta) + _F(params.alpha) - 2)
        details["eta_interval"] = [float(lower), float(upper)]
        details["eta_feasible"] = lower < upper
        if params.eta is None:
            slacks["eta_interval_width"] = float(upper - lower)
            passed = lower < upper
        else:
            eta = _F(params.eta)
            slacks["gamma_times_one_plus_eta"] = float(gmin * (1 + eta) - 1)
            slacks["zeta_plus_alpha"] = float(_F(params.zeta) + _F(params.alpha) - 2 - eta)
            passed = all(v > 0 for v in (gmin * (1 + eta) - 1, _F(params.zeta) + _F(params.alpha) - 2 - eta))
        return Verdict(which, bool(passed), slacks, details)
    if which == "fbm_sum":
        _need(params, ("zeta", "H1", "H2"), which)
        rhs = d + 3 - 1 / (2 * _F(params.H1)) - 1 / (2 * _F(params.H2))
    elif which == "fbm_plus_deterministic":
        _need(params, ("zeta", "H1"), which)
        rhs = d + 3 - 1 / (2 * _F(params.H1))
    else:
        _need(params, ("zeta", "H1", "H2"), which)
        hmax = max(_F(params.H1), _F(params.H2))
        rhs = 3 - 1 / (2 * hmax) + d / 2
        if params.lam is not None:
            lam_s = 1 / (2 * hmax) - d / 2 - _F(params.lam)
            slacks["lambda"] = float(lam_s)
    zs = _F(params.zeta) - rhs
    slacks["zeta"] = float(zs)
    details["zeta_threshold"] = float(rhs)
    passed = all(v > 0 for v in slacks.values())
    return Verdict(which, bool(passed), slacks, details)


# ---------------------------------------------------------------------------
# Picard solver

class SolveReport:
    """Solution ``theta`` of a Picard solve with per-window diagnostics."""

    def __init__(self, theta: Field2D, iteration_log: list, residual: float, windows: tuple,
                 halvings: int, tol: float, richardson: dict | None = None):
        self.theta = theta
        self.iteration_log = iteration_log
        self.residual = residual
        self.windows = windows
        self.halvings = halvings
        self.tol = tol
        self.richardson = richardson

    @property
    def iterations(self) -> list[int]:
        return [row["iterations"] for row in self.iteration_log]

    @cached_property
    def holder(self) -> HolderReport:
        return holder_seminorms(self.theta, (0.5, 0.5), fit=self.theta.grid.n1 >= 3 and self.theta.grid.n2 >= 3)

    @property
    def gamma_hat(self):
        fx = self.holder.fitted_exponents
        return None if fx is None else fx.mixed


def _window_solve(A, theta, t1, t2, i0, i1, j0, j1, tol, max_iter, offset, divergence_factor=1e6):
    base = theta[i0:i1 + 1, j0:j1 + 1]
    xi = base[:, :1] + base[:1, :] - base[:1, :1]
    xi[:, 0] = base[:, 0]
    xi[0, :] = base[0, :]
    cur = xi.copy()
    if offset:
        cur[1:, 1:] += offset
    scale0 = 1.0 + float(np.max(np.abs(xi)))
    upd = math.inf
    for k in range(1, max_iter + 1):
        cells = A.partition_increments(t1[i0:i1 + 1], t2[j0:j1 + 1], cur[:-1, :-1])
        new = xi.copy()
        new[1:, 1:] += cells.cumsum(axis=0).cumsum(axis=1)
        if not np.all(np.isfinite(new)):
            return None, k, math.inf
        upd = float(np.max(np.abs(new - cur)))
        cur = new
        if upd < tol * (1.0 + float(np.max(np.abs(cur)))):
            theta[i0:i1 + 1, j0:j1 + 1] = cur
            return cur, k, upd
        if upd > divergence_factor * scale0:
            return None, k, upd
    return None, max_iter, upd


def _solve_level(A, xi: Field2D, tol, max_iter, max_halvings, offset):
    g = xi.grid
    t1, t2 = g.t1, g.t2
    w1, w2 = g.N1, g.N2
    halvings = 0
    while True:
        theta = np.array(xi.values, copy=True)
        log = []
        failed = None
        for bj, j0 in enumerate(range(0, g.N2, w2)):
            for bi, i0 in enumerate(range(0, g.N1, w1)):
                i1, j1 = i0 + w1, j0 + w2
                out, iters, upd = _window_solve(A, theta, t1, t2, i0, i1, j0, j1, tol, max_iter, offset)
                log.append({"window_i": bi, "window_j": bj, "iterations": iters, "residual": upd,
                            "window_cells": (w1, w2)})
                if out is None:
                    failed = log[-1]
                    break
            if failed:
                break
        if failed is None:
            return theta, log, (w1, w2), halvings
        if halvings >= max_halvings or (w1 == 1 and w2 == 1):
            raise NumericalError("Picard iteration does not contract even on the smallest windows",
                                 {"window": failed, "halvings": halvings, "window_cells": (w1, w2)})
        halvings += 1
        if w1 > 1:
            w1 //= 2
        else:
            w2 //= 2


def fixed_point_residual(A: TimeIndexedField, xi: Field2D, theta: Field2D) -> float:
    """``max |theta - (xi + int A(ds, theta_s))|`` with the grid-level left-point integral."""
    g = theta.grid
    cells = A.partition_increments(g.t1, g.t2, theta.values[:-1, :-1])
    rhs = np.array(xi.values, copy=True)
    rhs[1:, 1:] += cells.cumsum(axis=0).cumsum(axis=1)
    return float(np.max(np.abs(theta.values - rhs)))


def richardson_correct(solutions: list, grid: Grid2D, K: int) -> tuple[np.ndarray, dict]:
    """
    Extrapolate ``solutions[k]`` (node values on ``grid.coarsen(k)``, ``k = 0..K``)
    at the coarsest nodes with an error expansion in powers of the step, then add
    the bicubic interpolant of the correction to ``solutions[0]``.
    """
    sK = 2 ** K
    coarse = [solutions[k][::2 ** (K - k), ::2 ** (K - k)] for k in range(K, -1, -1)]
    R, prev = coarse, coarse[-1]
    for k in range(K):
        q = 1 + k
        prev = R[-1]
        R = [(2.0 ** q * R[m + 1] - R[m]) / (2.0 ** q - 1.0) for m in range(len(R) - 1)]
    extrap = R[-1]
    fine0 = solutions[0]
    corr = extrap - fine0[::sK, ::sK]
    gK = grid.coarsen(K)
    kx, ky = min(3, gK.N1), min(3, gK.N2)
    squeeze = fine0.ndim == 2
    c3 = corr[..., None] if squeeze else corr
    out = np.empty(fine0.shape + (() if not squeeze else (1,)))
    for c in range(c3.shape[-1]):
        spl = RectBivariateSpline(gK.t1, gK.t2, c3[..., c], kx=kx, ky=ky)
        out[..., c] = spl(grid.t1, grid.t2)
    out = fine0 + (out[..., 0] if squeeze else out)
    return out, {"levels": K, "max_correction": float(np.max(np.abs(corr))),
                 "error_estimate": float(np.max(np.abs(prev - extrap)))}


def picard_solve(A: TimeIndexedField, xi: BoundaryData, grid: Grid2D | None = None, *,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 max_halvings: int = DEFAULT_MAX_HALVINGS, init_offset: float = 0.0,
                 richardson: int = 0, conditions: tuple | None = None, override: bool = False) -> SolveReport:
    """
    Solve ``theta = xi + int A(ds, theta_s)`` at the nodes of ``grid``.

    The integral is the left-point sum over grid cells.  The domain is split
    into windows, starting with a single one; whenever an iteration diverges or
    hits ``max_iter`` the window width along the first axis is halved (then
    the second once the first reaches one cell) and the solve restarts.
    Windows are processed left to right, bottom to top, each inheriting its
    boundary values.  A window stops when the sup-norm update falls below
    ``tol * (1 + |theta|)``.

    ``richardson = K > 0`` additionally solves on the ``K`` coarser dyadic
    grids, extrapolates at the coarsest nodes assuming an error expansion in
    powers of the step, and adds the bicubic interpolant of the correction to
    the fine solution (only meaningful for smooth problems).

    ``conditions = (RegularityParams, selector)`` is checked first; a failed
    check raises :class:`ConfigurationError` unless ``override`` is set.
    """
    if conditions is not None:
        verdict = check_conditions(*conditions)
        if not verdict.passed and not override:
            raise ConfigurationError(f"existence conditions fail: {verdict.slacks}")
    grid = grid or A.grid
    if grid is None:
        raise DomainError("a time grid is required")
    if xi.d != A.d:
        raise DomainError(f"dimension mismatch: xi has d={xi.d}, A has d={A.d}")
    xif = xi.field(grid)
    theta, log, windows, halvings = _solve_level(A, xif, tol, max_iter, max_halvings, init_offset)
    info = None
    if richardson:
        K = int(richardson)
        if min(grid.n1, grid.n2) - K < 2:
            raise ConfigurationError(f"richardson={K} needs at least 4 nodes per axis on the coarsest grid")
        sols = [theta]
        for k in range(1, K + 1):
            gk = grid.coarsen(k)
            th, _, _, _ = _solve_level(A, xi.field(gk), tol, max_iter, max_halvings, 0.0)
            sols.append(th)
        theta, info = richardson_correct(sols, grid, K)
        theta[0, :, :] = xif.values[0, :, :]
        theta[:, 0, :] = xif.values[:, 0, :]
    th = Field2D(grid, theta)
    resid = fixed_point_residual(A, xif, th) if not richardson else float("nan")
    return SolveReport(th, log, resid, windows, halvings, tol, info)


# ---------------------------------------------------------------------------
# regularized equations

def solve_regularized_sde(b: DriftSpec, w: Field2D, xi: BoundaryData, sgrid: SpatialGrid | None = None, *,
                          bins: int = 256, scheme: str = DEFAULT_SCHEME, **picard_kw):
    """
    Solve ``x = w + theta`` with ``theta_t = xi_t + int_0^t (b * L^{-w})(ds, theta_s)``.

    Returns ``(x, report)``.  The spatial grid defaults to a box around the
    range of ``w``.
    """
    if b.d != w.d:
        raise DomainError(f"drift dimension {b.d} does not match path dimension {w.d}")
    sgrid = sgrid or SpatialGrid.auto(w.values, bins, d=w.d)
    L = occupation_density(w, sgrid, negate=True, scheme=scheme)
    A = averaged_field_convolved(b, L, reflect=False)
    rep = picard_solve(A, xi, w.grid, **picard_kw)
    x = Field2D(w.grid, w.values + rep.theta.values)
    rep.sgrid = sgrid
    return x, rep


@dataclass
class MollificationTable:
    eps: list
    distances: list
    ratios: list
    errors: list
    decreasing: bool
    mean_ratio: float
    cauchy: bool
    final_gap: float
    shape_difference: float | None = None
    shapes_agree: bool | None = None
    solutions: list | None = None

    def rows(self) -> list[dict]:
        out = []
        for k, e in enumerate(self.eps):
            out.append({"eps": e,
                        "sup_distance_to_previous": self.distances[k - 1] if k else float("nan"),
                        "ratio": self.ratios[k - 2] if k >= 2 else float("nan"),
                        "error": self.errors[k] or ""})
        return out


def cauchy_table(eps, solutions, errors, compare=None) -> MollificationTable:
    """Consecutive sup-distances, their ratios and the Cauchy verdict."""
    dists = []
    for k in range(1, len(solutions)):
        a, b = solutions[k - 1], solutions[k]
        dists.append(float(np.max(np.abs(a - b))) if a is not None and b is not None else float("nan"))
    ratios = [dists[k] / dists[k - 1] if dists[k - 1] > 0 else float("nan") for k in range(1, len(dists))]
    ok = all(e is None for e in errors) and len(dists) >= 2 and all(math.isfinite(x) for x in dists)
    decreasing = ok and all(dists[k] < dists[k - 1] for k in range(1, len(dists)))
    mean_ratio = float(np.mean(ratios)) if ratios and ok else float("nan")
    cauchy = bool(decreasing and mean_ratio < 0.9)
    final_gap = dists[-1] if dists else float("nan")
    tab = MollificationTable(list(eps), dists, ratios, list(errors), bool(decreasing), mean_ratio, cauchy, final_gap)
    if compare is not None and solutions[-1] is not None and compare is not None:
        diff = float(np.max(np.abs(solutions[-1] - compare)))
        tab.shape_difference = diff
        tab.shapes_agree = bool(diff <= 2 * final_gap)
    return tab


def _check_eps(eps_sequence):
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 3 or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigurationError(f"eps sequence must be positive, strictly decreasing, length >= 3: {eps}")
    return eps


def mollification_study(b: DriftSpec, eps_sequence: Sequence[float], w: Field2D, xi: BoundaryData,
                        sgrid: SpatialGrid | None = None, *, mollifier: str = "gaussian",
                        compare_mollifier: str | None = None, keep_solutions: bool = False,
                        **solve_kw) -> MollificationTable:
    """
    Solve with ``b * rho_eps`` along a decreasing ``eps`` sequence and tabulate
    ``sup |x^{eps_k} - x^{eps_{k-1}}|``.  The Cauchy verdict requires strictly
    decreasing distances with mean consecutive ratio below 0.9.  With
    ``compare_mollifier`` the finest solve is repeated with the other kernel
    and compared against twice the final gap.  Failed solves flag their row.
    """
    eps = _check_eps(eps_sequence)
    sgrid = sgrid or SpatialGrid.auto(w.values, solve_kw.pop("bins", 256), d=w.d)
    sols, errs = [], []
    for e in eps:
        try:
            x, _ = solve_regularized_sde(b.mollified(e, mollifier), w, xi, sgrid, **solve_kw)
            sols.append(x.values)
            errs.append(None)
        except Nly2dError as exc:
            sols.append(None)
            errs.append(f"{type(exc).__name__}: {exc}")
    other = None
    if compare_mollifier:
        try:
            other = solve_regularized_sde(b.mollified(eps[-1], compare_mollifier), w, xi, sgrid, **solve_kw)[0].values
        except Nly2dError:
            other = None
    tab = cauchy_table(eps, sols, errs, other)
    if keep_solutions:
        tab.solutions = sols
    return tab
