import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import goursat_marching
from nly2d.drift import DriftSpec
from nly2d.errors import ConfigurationError, DomainError
from nly2d.grid_field import Path1D
from nly2d.noise import FbmSpec, sample_fbm
from nly2d.wave import (SQRT2, WaveProblem, residual_refinement, rotate_from_goursat, rotate_to_goursat, solve_wave,
                        wave_mollification_study, wave_residual)


def smooth_problem(h, level=8):
    b1 = Path1D.from_function(1.0, level, lambda y: 0.1 + 0.5 * y)
    b2 = Path1D.from_function(1.0, level, lambda y: 0.1 + 0.3 * np.sin(3 * y))
    return WaveProblem(h, b1, b2)


def test_rotation_examples():
    assert rotate_to_goursat(0.0, 0.0) == (0.0, 0.0)
    t1, t2 = rotate_to_goursat(1.0, 1.0)
    assert t1 == pytest.approx(SQRT2, abs=1e-15) and t2 == 0.0
    t1, t2 = rotate_to_goursat(-1.0, 1.0)
    assert t1 == 0.0 and t2 == pytest.approx(SQRT2, abs=1e-15)


def test_rotation_round_trip():
    pts = np.random.default_rng(0).uniform(-3, 3, size=(2, 1000))
    x, y = rotate_from_goursat(*rotate_to_goursat(*pts))
    assert np.max(np.abs(x - pts[0])) < 1e-14 and np.max(np.abs(y - pts[1])) < 1e-14


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10))
def test_rotation_is_isometry(x, y):
    t1, t2 = rotate_to_goursat(x, y)
    assert math.isclose(t1 ** 2 + t2 ** 2, x ** 2 + y ** 2, rel_tol=1e-12, abs_tol=1e-12)


def test_problem_validation():
    b = Path1D.from_function(1.0, 4, lambda y: y)
    with pytest.raises(ConfigurationError, match="corner"):
        WaveProblem(DriftSpec.catalog("sine"), b, Path1D.from_function(1.0, 4, lambda y: 1 + y))
    with pytest.raises(ConfigurationError, match="covers"):
        WaveProblem(DriftSpec.catalog("sine"), b, Path1D.from_function(0.5, 4, lambda y: y))
    with pytest.raises(ConfigurationError):
        WaveProblem(DriftSpec.catalog("sine", d=2), b, b)


def test_free_wave_is_sum_of_traces():
    p = smooth_problem(DriftSpec.catalog("constant", value=0.0))
    sol = solve_wave(p, level=6)
    assert not np.any(sol.psi.values)
    assert sol.boundary_errors() == (0.0, 0.0)
    b1 = lambda y: 0.1 + 0.5 * y
    b2 = lambda y: 0.1 + 0.3 * np.sin(3 * y)
    expected = b1((sol.y + sol.x) / 2) + b2((sol.y - sol.x) / 2) - 0.1
    # beta2 is sampled with step 2^-8 and read off-node: linear interpolation error
    assert np.max(np.abs(sol.u - expected)) <= 2.0 ** -16 / 8 * 2.7 * 1.01


@pytest.mark.parametrize("c", [1.0, -0.7, 2.5])
def test_constant_nonlinearity(c):
    sol = solve_wave(smooth_problem(DriftSpec.catalog("constant", value=c)), level=7)
    T1, T2 = sol.grid.mesh()
    assert np.max(np.abs(sol.psi.values[..., 0] + 2 * c * T1 * T2)) < 1e-10
    assert wave_residual(sol).max_residual < 1e-8


def test_traces_exact_for_nonlinear_h():
    sol = solve_wave(smooth_problem(DriftSpec.catalog("sine")), level=6)
    assert sol.boundary_errors() == (0.0, 0.0)


def test_sine_nonlinearity_matches_marching():
    p = smooth_problem(DriftSpec.catalog("sine"), level=9)
    sol = solve_wave(p, level=8)
    bb = [lambda t, b=b: np.interp(t / SQRT2, b.nodes, b.values[:, 0]) for b in (p.beta1, p.beta2)]
    ref = goursat_marching(p.h, bb[0], bb[1], p.coupling, 11)
    assert np.max(np.abs(sol.u - ref[::8, ::8])) < 2e-3


def test_u_at_nodes_and_table():
    sol = solve_wave(smooth_problem(DriftSpec.catalog("sine")), level=5)
    i, j = 7, 19
    assert sol.u_at(sol.x[i, j], sol.y[i, j]) == pytest.approx(sol.u[i, j], abs=1e-12)
    tab = sol.table()
    assert tab.shape == (33 * 33, 3)


def test_residual_refused_for_rough_h():
    sol = solve_wave(smooth_problem(DriftSpec.catalog("constant", value=0.0)), level=4)
    with pytest.raises(DomainError):
        wave_residual(sol, DriftSpec.catalog("indicator"))


def test_residual_order_for_smooth_h():
    rows, order = residual_refinement(smooth_problem(DriftSpec.catalog("sine")), [5, 6, 7, 8])
    assert order >= 0.9
    assert rows[-1].max_residual < rows[0].max_residual


def test_rough_boundaries_mollification():
    b1 = sample_fbm(FbmSpec(0.25, 1.0, 8, seed=1))
    b2 = sample_fbm(FbmSpec(0.25, 1.0, 8, seed=2))
    p = WaveProblem(DriftSpec.catalog("indicator"), b1, b2)
    tab = wave_mollification_study(p, [2.0 ** -k for k in range(2, 6)], level=7, compare_mollifier="triangular")
    assert tab.decreasing and tab.cauchy
    assert tab.shapes_agree


def test_smooth_h_mollification_distances_small():
    p = smooth_problem(DriftSpec.catalog("sine"))
    tab = wave_mollification_study(p, [1e-2, 5e-3, 2.5e-3], level=6)
    assert max(tab.distances) < 1e-4
