import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nly2d.errors import DomainError
from nly2d.grid_field import (Field2D, Grid2D, Path1D, box_increment, boundary_decompose,
                              estimate_holder_exponents, holder_seminorms, rectangular_increment)
from nly2d.noise import FbmSpec, sample_fbm


def test_grid_nodes_and_counts():
    g = Grid2D(2.0, 1.0, 3, 2)
    assert g.node_count == 9 * 5
    assert g.node(8, 4) == (2.0, 1.0)
    assert g.index((0.5, 0.25)) == (2, 1)
    with pytest.raises(DomainError):
        g.index((0.3, 0.25))
    assert g.coarsen(1).shape == (5, 3)
    assert g.refine(1).shape == (17, 9)


def test_grid_rejects_bad_levels():
    with pytest.raises(Exception):
        Grid2D(1.0, 1.0, 0, 3)
    with pytest.raises(Exception):
        Grid2D(-1.0, 1.0, 2, 3)


@pytest.mark.parametrize("func, s, t, expected", [
    (lambda a, b: a * b, (0, 0), (1, 1), 1.0),
    (lambda a, b: np.sin(a) + b ** 3, (0.25, 0.5), (1, 1), 0.0),
    (lambda a, b: a ** 2 * b ** 2, (0.5, 0.5), (1, 1), 0.5625),
])
def test_rectangular_increment_examples(func, s, t, expected):
    f = Field2D.from_function(Grid2D.square(1.0, 4), func)
    assert rectangular_increment(f, s, t)[0] == pytest.approx(expected, abs=1e-15)
    assert rectangular_increment(func, s, t)[0] == pytest.approx(expected, abs=1e-15)


def test_degenerate_and_off_grid_rectangles():
    f = Field2D.from_function(Grid2D.square(1.0, 3), lambda a, b: np.exp(a * b))
    assert rectangular_increment(f, (0.5, 0.25), (0.5, 1.0))[0] == 0.0
    with pytest.raises(DomainError):
        rectangular_increment(f, (0.1, 0.0), (1.0, 1.0))
    approx = rectangular_increment(f, (0.1, 0.0), (1.0, 1.0), interpolate=True)
    assert np.isfinite(approx).all()


def test_boundary_decompose_examples():
    g = Grid2D.square(1.0, 4)
    add = Field2D.from_function(g, lambda a, b: a + b)
    z, y = boundary_decompose(add)
    assert np.array_equal(z.values, add.values)
    assert not np.any(y.values)
    prod = Field2D.from_function(g, lambda a, b: a * b)
    z, y = boundary_decompose(prod)
    assert not np.any(z.values)
    assert np.array_equal(y.values, prod.values)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 3))
def test_boundary_decompose_properties(seed, d):
    g = Grid2D(1.0, 2.0, 4, 3)
    f = Field2D(g, np.random.default_rng(seed).standard_normal(g.shape + (d,)))
    z, y = boundary_decompose(f)
    scale = np.max(np.abs(f.values))
    assert np.max(np.abs((z + y).values - f.values)) <= 8 * np.finfo(float).eps * scale
    assert not np.any(y.values[0]) and not np.any(y.values[:, 0])
    i0, j0, i1, j1 = 3, 2, 11, 7
    assert np.max(np.abs(box_increment(z.values, i0, j0, i1, j1))) <= 4 * np.finfo(float).eps * np.max(np.abs(f.values))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_four_tile_additivity(seed):
    rng = np.random.default_rng(seed)
    g = Grid2D.square(1.0, 5)
    v = rng.standard_normal(g.shape + (1,))
    i0, i1 = sorted(rng.choice(33, 2, replace=False))
    j0, j1 = sorted(rng.choice(33, 2, replace=False))
    u1, u2 = rng.integers(i0, i1 + 1), rng.integers(j0, j1 + 1)
    whole = box_increment(v, i0, j0, i1, j1)
    tiles = (box_increment(v, i0, j0, u1, u2) + box_increment(v, u1, u2, i1, j1)
             + box_increment(v, i0, u2, u1, j1) + box_increment(v, u1, j0, i1, u2))
    assert np.allclose(whole, tiles, rtol=0, atol=16 * np.finfo(float).eps * np.max(np.abs(v)))


def test_increment_of_integrated_field_matches():
    rng = np.random.default_rng(3)
    g = Grid2D.square(1.0, 4)
    f = Field2D(g, rng.standard_normal(g.shape))
    _, y = boundary_decompose(f)
    for _ in range(20):
        i0, i1 = sorted(rng.choice(17, 2, replace=False))
        j0, j1 = sorted(rng.choice(17, 2, replace=False))
        assert np.allclose(box_increment(y.values, i0, j0, i1, j1), box_increment(f.values, i0, j0, i1, j1),
                           rtol=0, atol=1e-13)


def test_holder_seminorm_examples():
    g = Grid2D.square(1.0, 5)
    rep = holder_seminorms(Field2D.from_function(g, lambda a, b: a * b), (0.5, 0.5))
    assert rep.seminorm_11 == pytest.approx(1.0, abs=1e-12)
    const = holder_seminorms(Field2D.from_function(g, lambda a, b: 0 * a + 3.0), (0.5, 0.5))
    assert const.total == 0.0


def test_holder_power_function_and_window_monotonicity():
    g = Grid2D.square(1.0, 9)
    f = Field2D.from_function(g, lambda a, b: a ** 0.3 + 0 * b)
    rep = holder_seminorms(f, (0.3, 0.5), fit=True)
    assert rep.seminorm_11 == pytest.approx(0.0, abs=1e-12)
    assert rep.fitted_exponents.gamma1 == pytest.approx(0.3, abs=0.05)
    small = holder_seminorms(f, (0.3, 0.5), window=((0.0, 0.0), (0.5, 0.5)))
    big = holder_seminorms(f, (0.3, 0.5), window=((0.0, 0.0), (1.0, 1.0)))
    assert big.seminorm_10 >= small.seminorm_10


def test_empty_window_rejected():
    f = Field2D.zeros(Grid2D.square(1.0, 3))
    with pytest.raises(DomainError):
        holder_seminorms(f, (0.5, 0.5), window=((0.5, 0.5), (0.5, 1.0)))


def test_separable_power_mixed_exponents():
    g = Grid2D.square(1.0, 10)
    f = Field2D.from_function(g, lambda a, b: a ** 0.7 * b ** 0.6)
    ex = estimate_holder_exponents(f)
    assert ex.mixed[0] == pytest.approx(0.7, abs=0.05)
    assert ex.mixed[1] == pytest.approx(0.6, abs=0.05)


def test_zero_field_sentinel():
    ex = estimate_holder_exponents(Field2D.zeros(Grid2D.square(1.0, 6)))
    assert ex.degenerate1 and ex.degenerate2 and ex.degenerate_mixed
    assert ex.gamma1 == np.inf


def test_brownian_path_exponent():
    gam = [estimate_holder_exponents(sample_fbm(FbmSpec(0.5, 1.0, 10, seed=s))).gamma1 for s in range(100)]
    assert np.mean(gam) == pytest.approx(0.5, abs=0.1)


def test_too_few_scales():
    with pytest.raises(DomainError):
        estimate_holder_exponents(Field2D.zeros(Grid2D.square(1.0, 6)), scales=[5, 6])


def test_path_as_field_and_values_read_only():
    p = Path1D.from_function(1.0, 3, lambda t: t ** 2)
    f = p.as_field(axis=1, T_other=1.0, n_other=2)
    assert f.values.shape == (9, 5, 1)
    assert np.array_equal(f.values[:, 3, 0], p.values[:, 0])
    with pytest.raises(ValueError):
        f.values[0, 0, 0] = 1.0
