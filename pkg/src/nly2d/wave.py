"""
Wave equation with data on the two characteristics through the origin.

In the rotated frame ``t1 = (y + x)/sqrt2``, ``t2 = (y - x)/sqrt2`` the
problem becomes ``d^2 phi / dt1 dt2 = coupling * h(phi)`` (a Goursat problem)
with ``phi(t1, 0) = beta1(t1/sqrt2)`` and ``phi(0, t2) = beta2(t2/sqrt2)``.
Writing ``phi = psi + bb1(t1) + bb2(t2) - c`` with ``bbi(t) = betai(t/sqrt2)``
and ``c = beta1(0)`` turns it into a nonlinear Young equation driven by
``coupling * (h * L)`` where ``L = L^{-bb1} * L^{-bb2}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .drift import DriftSpec
from .errors import ConfigurationError, DomainError, Nly2dError
from .grid_field import Field2D, Grid2D, Path1D
from .noise import rescaled_boundary
from .occupation import DEFAULT_SCHEME, SpatialGrid, averaged_field_convolved, convolve_local_times, occupation_density
from .solver import (BoundaryData, MollificationTable, SolveReport, _check_eps, cauchy_table, check_conditions,
                     picard_solve, richardson_correct)

SQRT2 = math.sqrt(2.0)
DEFAULT_COUPLING = -2.0
WAVE_SCHEME = "linear"


def rotate_to_goursat(x, y):
    """``(x, y) -> ((y + x)/sqrt2, (y - x)/sqrt2)``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return (y + x) / SQRT2, (y - x) / SQRT2


def rotate_from_goursat(t1, t2):
    """Inverse of :func:`rotate_to_goursat`: ``(t1, t2) -> ((t1 - t2)/sqrt2, (t1 + t2)/sqrt2)``."""
    t1, t2 = np.asarray(t1, dtype=float), np.asarray(t2, dtype=float)
    return (t1 - t2) / SQRT2, (t1 + t2) / SQRT2


@dataclass(frozen=True, eq=False)
class WaveProblem:
    """
    Nonlinearity ``h``, boundary paths ``beta1`` (on ``y = x``) and ``beta2``
    (on ``y = -x``), and the horizon ``T`` of the Goursat square.

    The paths are parametrised by ``y`` and must cover ``[0, T/sqrt2]``.
    """

    h: DriftSpec
    beta1: Path1D
    beta2: Path1D
    T: float = 1.0
    coupling: float = DEFAULT_COUPLING

    def __post_init__(self):
        if self.h.d != 1 or self.beta1.d != 1 or self.beta2.d != 1:
            raise ConfigurationError("the wave pipeline is one-dimensional")
        if not np.array_equal(self.beta1.values[0], self.beta2.values[0]):
            raise ConfigurationError(f"corner values differ: beta1(0)={self.beta1.values[0, 0]!r}, "
                                     f"beta2(0)={self.beta2.values[0, 0]!r}")
        need = self.T / SQRT2
        for name, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if b.T < need * (1 - 1e-12):
                raise ConfigurationError(f"{name} covers [0, {b.T}] but the domain needs [0, {need}]")
        if not self.T > 0:
            raise ConfigurationError(f"horizon must be positive, got {self.T}")

    @property
    def corner(self) -> float:
        return float(self.beta1.values[0, 0])

    def goursat_boundaries(self, level: int) -> tuple[Path1D, Path1D]:
        """``bbi(t) = betai(t / sqrt2)`` on ``[0, T]`` with ``2**level`` steps."""
        out = []
        for b in (self.beta1, self.beta2):
            if b.n == level and math.isclose(b.T * SQRT2, self.T, rel_tol=1e-12):
                out.append(Path1D(self.T, level, b.values))
            else:
                r = rescaled_boundary(b, SQRT2, None)
                t = np.arange(2 ** level + 1) * (self.T / 2 ** level)
                vals = np.interp(t, r.nodes, r.values[:, 0])[:, None]
                out.append(Path1D(self.T, level, vals))
        return out[0], out[1]

    def with_h(self, h: DriftSpec) -> "WaveProblem":
        return WaveProblem(h, self.beta1, self.beta2, self.T, self.coupling)


class WaveSolution:
    """
    ``psi`` on the Goursat grid and ``u`` on its rotated image.

    ``x``, ``y`` and ``u`` are arrays indexed like the Goursat nodes ``(i, j)``;
    ``u[:, 0]`` is the trace on ``y = x`` and ``u[0, :]`` the trace on ``y = -x``.
    """

    def __init__(self, problem: WaveProblem, psi: Field2D, phi: np.ndarray, report: SolveReport,
                 sgrid: SpatialGrid):
        self.problem, self.psi, self.phi, self.report, self.sgrid = problem, psi, phi, report, sgrid
        g = psi.grid
        T1, T2 = g.mesh()
        self.x, self.y = rotate_from_goursat(T1, T2)
        self.u = phi
        self.cauchy: MollificationTable | None = None

    @property
    def grid(self) -> Grid2D:
        return self.psi.grid

    def boundary_errors(self) -> tuple[float, float]:
        """Max ``|u - beta_i|`` on the two characteristics at lattice points."""
        b1, b2 = self.problem.goursat_boundaries(self.grid.n1)
        return (float(np.max(np.abs(self.u[:, 0] - b1.values[:, 0]))),
                float(np.max(np.abs(self.u[0, :] - b2.values[:, 0]))))

    def u_at(self, x, y) -> np.ndarray:
        """Bilinear interpolation of ``u`` in the Goursat frame at arbitrary ``(x, y)``."""
        t1, t2 = rotate_to_goursat(x, y)
        f = Field2D(self.grid, self.u[..., None])
        pts = np.broadcast_arrays(t1, t2)
        flat = [f.at((a, b), interpolate=True)[0] for a, b in zip(pts[0].ravel(), pts[1].ravel())]
        return np.asarray(flat).reshape(pts[0].shape)

    def table(self) -> np.ndarray:
        """Rows ``(x, y, u)`` over the diamond lattice."""
        return np.column_stack([self.x.ravel(), self.y.ravel(), self.u.ravel()])


def wave_field(problem: WaveProblem, level: int, sgrid: SpatialGrid | None = None, *, bins: int = 256,
               scheme: str = DEFAULT_SCHEME):
    """The driving field ``coupling * (h * L)`` and the spatial grid it uses."""
    bb1, bb2 = problem.goursat_boundaries(level)
    if sgrid is None:
        span = float(np.max(np.abs(bb1.values)) + np.max(np.abs(bb2.values)))
        sgrid = SpatialGrid.auto(np.array([span]), bins)
    L1 = occupation_density(bb1, sgrid, negate=True, scheme=scheme)
    L2 = occupation_density(bb2, sgrid, negate=True, scheme=scheme)
    L = convolve_local_times(L1, L2)
    return averaged_field_convolved(problem.h, L, reflect=False, scale=problem.coupling), sgrid, (bb1, bb2)


def solve_wave(problem: WaveProblem, level: int = 9, sgrid: SpatialGrid | None = None, *, bins: int = 256,
               scheme: str = WAVE_SCHEME, richardson: int = 0, conditions=None, **picard_kw) -> WaveSolution:
    """
    Solve on the Goursat grid of ``2**level`` steps per axis and map back.

    ``psi`` is found from ``theta = -c + int A(ds, theta)`` (``c`` the corner
    value) as ``psi = theta + c``, which vanishes on both axes, and
    ``u = psi + bb1(t1) + bb2(t2) - c``.  ``conditions`` is advisory: a failed
    check only warns.

    The local time is built from the boundary values at the grid nodes, so
    both the field and the Picard sum carry a first-order error in the step.
    ``richardson = K`` therefore reruns the whole pipeline on the ``K`` coarser
    levels and extrapolates ``psi``.
    """
    if conditions is not None:
        verdict = check_conditions(*conditions)
        if not verdict.passed:
            warnings.warn(f"existence conditions fail: {verdict.slacks}", stacklevel=2)
    A, sgrid, (bb1, bb2) = wave_field(problem, level, sgrid, bins=bins, scheme=scheme)
    g = Grid2D.square(problem.T, level)
    c = problem.corner
    free = bb1.values[:, 0][:, None] + (bb2.values[:, 0][None, :] - c)
    rep = picard_solve(A, BoundaryData.constant(g, -c), g, **picard_kw)
    psi = rep.theta.values[..., 0] + c
    if richardson:
        K = int(richardson)
        if level - K < 2:
            raise ConfigurationError(f"richardson={K} needs level >= {K + 2}")
        sols = [psi] + [solve_wave(problem, level - k, sgrid, scheme=scheme, **picard_kw).psi.values[..., 0]
                        for k in range(1, K + 1)]
        psi, rep.richardson = richardson_correct(sols, g, K)
    psi[0, :] = 0.0
    psi[:, 0] = 0.0
    phi = psi + free
    phi[:, 0] = bb1.values[:, 0]
    phi[0, :] = bb2.values[:, 0]
    return WaveSolution(problem, Field2D(g, psi[..., None]), phi, rep, sgrid)


@dataclass
class WaveResidual:
    level: int
    max_residual: float
    l2_residual: float


def wave_residual(solution: WaveSolution, h: DriftSpec | None = None) -> WaveResidual:
    """
    Cell residual ``|box phi / |cell| - coupling * h(phi_centre)|`` with the
    centre value the mean of the four corners.  Only defined for smooth ``h``.
    """
    h = h or solution.problem.h
    if not h.is_smooth:
        raise DomainError("the pointwise residual is undefined for a non-smooth nonlinearity; mollify it first")
    g = solution.grid
    p = solution.phi
    box = p[1:, 1:] - p[1:, :-1] - p[:-1, 1:] + p[:-1, :-1]
    centre = 0.25 * (p[1:, 1:] + p[1:, :-1] + p[:-1, 1:] + p[:-1, :-1])
    r = box / (g.h1 * g.h2) - solution.problem.coupling * h.scalar(centre)
    return WaveResidual(g.n1, float(np.max(np.abs(r))), float(math.sqrt(np.sum(r * r) * g.h1 * g.h2)))


def residual_refinement(problem: WaveProblem, levels: Sequence[int], **solve_kw) -> tuple[list[WaveResidual], float]:
    """Residuals over a level sweep and the least-squares order of the max residual."""
    rows = [wave_residual(solve_wave(problem, lv, **solve_kw)) for lv in levels]
    lv = np.array([r.level for r in rows], dtype=float)
    m = np.array([r.max_residual for r in rows])
    if len(rows) < 2 or np.any(m <= 0):
        return rows, float("nan")
    return rows, float(-np.polyfit(lv, np.log2(m), 1)[0])


def wave_mollification_study(problem: WaveProblem, eps_sequence: Sequence[float], level: int = 9, *,
                             mollifier: str = "gaussian", compare_mollifier: str | None = None,
                             sgrid: SpatialGrid | None = None, bins: int = 256, **solve_kw) -> MollificationTable:
    """Cauchy table of ``u`` on the diamond lattice along ``h * rho_eps``."""
    eps = _check_eps(eps_sequence)
    if sgrid is None:
        sgrid = wave_field(problem.with_h(DriftSpec.catalog("constant", value=0.0)), level, bins=bins)[1]
    sols, errs = [], []
    for e in eps:
        try:
            sols.append(solve_wave(problem.with_h(problem.h.mollified(e, mollifier)), level, sgrid, **solve_kw).u)
            errs.append(None)
        except Nly2dError as exc:
            sols.append(None)
            errs.append(f"{type(exc).__name__}: {exc}")
    other = None
    if compare_mollifier:
        try:
            other = solve_wave(problem.with_h(problem.h.mollified(eps[-1], compare_mollifier)), level, sgrid,
                               **solve_kw).u
        except Nly2dError:
            other = None
    return cauchy_table(eps, sols, errs, other)
