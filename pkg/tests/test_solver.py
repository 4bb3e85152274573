import math

import numpy as np
import pytest

from conftest import linear_goursat_series, riemann_picard
from nly2d.drift import DriftSpec
from nly2d.errors import ConfigurationError, DomainError, NumericalError
from nly2d.grid_field import Field2D, Grid2D, Path1D
from nly2d.solver import (BoundaryData, RegularityParams, check_conditions, fixed_point_residual,
                          mollification_study, picard_solve, solve_regularized_sde)
from nly2d.timefield import linear_goursat_field, product_field

P = RegularityParams


# ---------------------------------------------------------------------------
# boundary data

def test_boundary_field_traces_and_corner():
    g = Grid2D(1.0, 2.0, 4, 3)
    xi = BoundaryData.from_functions(g, lambda t: 1 + np.sin(t), lambda t: 1 + t ** 2)
    f = xi.field(g)
    assert np.array_equal(f.values[:, 0, 0], xi.xi1.values[:, 0])
    assert np.array_equal(f.values[0, :, 0], xi.xi2.values[:, 0])
    T1, T2 = g.mesh()
    assert np.allclose(f.values[..., 0], np.sin(T1) + 1 + T2 ** 2)


def test_boundary_corner_mismatch_rejected():
    with pytest.raises(ConfigurationError, match="corner"):
        BoundaryData(Path1D.from_function(1.0, 2, lambda t: 1 + t), Path1D.from_function(1.0, 2, lambda t: t))


def test_boundary_resampled_to_other_level():
    xi = BoundaryData.from_functions(Grid2D.square(1.0, 3), lambda t: 2 * t, lambda t: -t)
    f = xi.field(Grid2D.square(1.0, 5))
    T1, T2 = f.grid.mesh()
    assert np.allclose(f.values[..., 0], 2 * T1 - T2, atol=1e-15)


# ---------------------------------------------------------------------------
# condition checker

def test_condition_examples():
    v = check_conditions(P(zeta=0.5, H1=0.25, H2=0.25), "fbm_sum")
    assert v.passed and v.slacks == {"zeta": 0.5} and v.details["zeta_threshold"] == 0.0
    v = check_conditions(P(zeta=1.5, alpha=1.0, gamma=(0.8, 0.8), eta=0.4), "general")
    assert v.passed
    assert v.slacks["zeta_plus_alpha"] == pytest.approx(0.1, abs=1e-15)
    assert v.slacks["gamma_times_one_plus_eta"] == pytest.approx(0.12, abs=1e-15)
    v = check_conditions(P(zeta=2, H1=0.5, H2=0.5), "sheet")
    assert not v.passed and v.slacks["zeta"] == -0.5


def test_general_reports_eta_interval():
    v = check_conditions(P(zeta=1.5, alpha=1.0, gamma=(0.8, 0.9)), "general")
    assert v.details["eta_interval"] == [0.25, 0.5]
    assert v.passed and v.slacks["eta_interval_width"] == 0.25
    v = check_conditions(P(zeta=0.9, alpha=1.0, gamma=(0.6, 0.6)), "general")
    assert not v.passed and not v.details["eta_feasible"]


def test_boundary_cases_are_strict():
    v = check_conditions(P(zeta=0.0, H1=0.25, H2=0.25), "fbm_sum")
    assert not v.passed and v.slacks["zeta"] == 0.0


@pytest.mark.parametrize("params, which", [
    (P(zeta=1.0, H1=1.0, H2=0.5), "fbm_sum"),
    (P(zeta=1.0, alpha=1.0, gamma=(0.5, 0.8), eta=0.5), "general"),
    (P(zeta=1.0, alpha=1.0, gamma=(0.8, 0.8), eta=1.0), "general"),
    (P(zeta=1.0, H1=0.5, p=2, q=3), "fbm_plus_deterministic"),
    (P(zeta=1.0, H1=0.5, p=0.5), "fbm_plus_deterministic"),
    (P(zeta=1.0, H1=0.5), "nope"),
    (P(H1=0.5), "fbm_plus_deterministic"),
])
def test_invalid_condition_inputs(params, which):
    with pytest.raises(ConfigurationError):
        check_conditions(params, which)


def test_conjugate_exponents_accepted():
    assert check_conditions(P(zeta=5.0, H1=0.5, p=1, q=math.inf), "fbm_plus_deterministic").passed
    assert check_conditions(P(zeta=5.0, H1=0.5, p=4, q=4 / 3), "fbm_plus_deterministic").passed


# ---------------------------------------------------------------------------
# Picard solver

def test_x_independent_field_needs_one_iteration():
    g = Grid2D.square(1.0, 5)
    rep = picard_solve(product_field(3.0), BoundaryData.constant(g), g)
    T1, T2 = g.mesh()
    assert np.allclose(rep.theta.values[..., 0], 3 * T1 * T2, atol=1e-14)
    assert max(rep.iterations) <= 2


def test_linear_goursat_series():
    g = Grid2D.square(1.0, 9)
    rep = picard_solve(linear_goursat_field(1.0), BoundaryData.constant(g, 1.0), g, richardson=3)
    assert rep.theta.values[-1, -1, 0] == pytest.approx(2.2795853, abs=1e-6)
    assert rep.theta.values[-1, -1, 0] == pytest.approx(linear_goursat_series(1.0, 1.0, 1.0), abs=1e-6)
    assert math.isnan(rep.residual) and rep.richardson["levels"] == 3


def test_axes_match_boundary_exactly():
    g = Grid2D.square(1.0, 6)
    xi = BoundaryData.from_functions(g, lambda t: 0.5 + np.sin(3 * t), lambda t: 0.5 + t ** 3)
    for r in (0, 2):
        th = picard_solve(linear_goursat_field(-1.0), xi, g, richardson=r).theta.values
        assert np.array_equal(th[:, 0], xi.xi1.values)
        assert np.array_equal(th[0, :], xi.xi2.values)


def test_residual_below_tolerance_and_uniqueness():
    g = Grid2D.square(1.0, 7)
    xi = BoundaryData.constant(g, 0.2)
    A = linear_goursat_field(2.0)
    base = picard_solve(A, xi, g)
    shifted = picard_solve(A, xi, g, init_offset=1.0)
    scale = 1 + np.max(np.abs(base.theta.values))
    assert base.residual < 10 * base.tol * scale
    assert base.theta.sup_distance(shifted.theta) <= 10 * base.tol * scale


def test_window_halving_on_stiff_problem():
    g = Grid2D.square(1.0, 6)
    rep = picard_solve(linear_goursat_field(60.0), BoundaryData.constant(g, 1.0), g, max_iter=8)
    assert rep.halvings >= 1 and rep.windows[0] < g.N1
    ref = picard_solve(linear_goursat_field(60.0), BoundaryData.constant(g, 1.0), g, max_iter=500)
    assert rep.theta.sup_distance(ref.theta) <= 1e-7 * np.max(np.abs(ref.theta.values))


def test_non_contraction_reports_window():
    g = Grid2D.square(1.0, 6)
    with pytest.raises(NumericalError) as exc:
        picard_solve(linear_goursat_field(60.0), BoundaryData.constant(g, 1.0), g, max_iter=3, max_halvings=0)
    assert "window" in exc.value.diagnostics


def test_conditions_gate_the_solve():
    g = Grid2D.square(1.0, 4)
    bad = (P(zeta=2.0, H1=0.5, H2=0.5), "sheet")
    with pytest.raises(ConfigurationError):
        picard_solve(product_field(), BoundaryData.constant(g), g, conditions=bad)
    picard_solve(product_field(), BoundaryData.constant(g), g, conditions=bad, override=True)


def test_dimension_and_richardson_checks():
    g = Grid2D.square(1.0, 3)
    with pytest.raises(DomainError):
        picard_solve(product_field(d=2), BoundaryData.constant(g), g)
    with pytest.raises(ConfigurationError):
        picard_solve(product_field(), BoundaryData.constant(g), g, richardson=2)


def test_solution_regularity_report():
    g = Grid2D.square(1.0, 6)
    rep = picard_solve(linear_goursat_field(1.0), BoundaryData.constant(g, 1.0), g)
    assert rep.holder.seminorm_11 > 0
    assert rep.gamma_hat[0] == pytest.approx(1.0, abs=0.1)


# ---------------------------------------------------------------------------
# regularized equation

def test_zero_drift_gives_w_plus_xi(fbm_sum_level9):
    w, _ = fbm_sum_level9
    xi = BoundaryData.constant(w.grid, 0.3)
    x, _ = solve_regularized_sde(DriftSpec.catalog("constant", value=0.0), w, xi)
    assert np.array_equal(x.values, w.values + 0.3)


def test_constant_drift_integrates_exactly(fbm_sum_level9):
    w, _ = fbm_sum_level9
    xi = BoundaryData.constant(w.grid, -0.1)
    x, rep = solve_regularized_sde(DriftSpec.catalog("constant", value=1.5), w, xi)
    T1, T2 = w.grid.mesh()
    assert np.allclose(rep.theta.values[..., 0], -0.1 + 1.5 * T1 * T2, atol=1e-12)


@pytest.mark.parametrize("name, params", [("sine", {}), ("gaussian", {"width": 0.4, "center": 0.2})])
def test_smooth_drift_matches_classical_picard(fbm_sum_level9, name, params):
    w, _ = fbm_sum_level9
    b = DriftSpec.catalog(name, **params)
    xi = BoundaryData.constant(w.grid, 0.0)
    x, rep = solve_regularized_sde(b, w, xi, bins=256)
    oracle = riemann_picard(b, w, xi.field(w.grid))
    assert np.max(np.abs(x.values[..., 0] - oracle)) < 1e-4
    assert rep.residual < 1e-6


def test_fixed_point_residual_detects_wrong_solution():
    g = Grid2D.square(1.0, 4)
    xi = BoundaryData.constant(g, 1.0)
    A = linear_goursat_field(1.0)
    rep = picard_solve(A, xi, g)
    wrong = Field2D(g, rep.theta.values + 1e-3)
    assert fixed_point_residual(A, xi.field(g), wrong) > 1e-4


def test_mollification_study_smooth_drift(fbm_sum_level9):
    w, _ = fbm_sum_level9
    small = Field2D(w.grid.coarsen(3), w.values[::8, ::8])
    b = DriftSpec.catalog("sine", frequency=0.5)
    tab = mollification_study(b, [0.1, 0.05, 0.025], small, BoundaryData.constant(small.grid), bins=128,
                              compare_mollifier="triangular")
    assert tab.cauchy and max(tab.distances) < 1e-2
    assert tab.shapes_agree is not None
    assert len(tab.rows()) == 3


@pytest.mark.parametrize("eps", [[0.1, 0.05], [0.1, 0.1, 0.05], [0.1, -0.05, 0.01]])
def test_eps_sequence_validation(fbm_sum_level9, eps):
    w, _ = fbm_sum_level9
    with pytest.raises(ConfigurationError):
        mollification_study(DriftSpec.catalog("indicator"), eps, w, BoundaryData.constant(w.grid))
