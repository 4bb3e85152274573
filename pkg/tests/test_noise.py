import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nly2d.errors import ConfigurationError, DomainError
from nly2d.grid_field import Grid2D, Path1D, box_increment
from nly2d.noise import (FbmSpec, SheetSpec, derive_seed, fbm_covariance, fgn_autocovariance, resample_path,
                         rescaled_boundary, sample_fbm, sample_sheet, standard_normals, sum_field)

M = 10_000


@pytest.mark.parametrize("H", [0.1, 0.25, 0.5, 0.75, 0.95])
def test_fbm_starts_at_zero(H):
    p = sample_fbm(FbmSpec(H, 2.0, 6, d=2, seed=7))
    assert p.values.shape == (65, 2)
    assert np.all(p.values[0] == 0.0)


def test_brownian_variance_and_independence():
    ends = np.empty(M)
    mids = np.empty((M, 2))
    for s in range(M):
        v = sample_fbm(FbmSpec(0.5, 2.0, 1, seed=s)).values[:, 0]
        ends[s] = v[1]
        mids[s] = v[1] - v[0], v[2] - v[1]
    assert np.var(ends) == pytest.approx(1.0, abs=0.05)
    assert abs(np.corrcoef(mids.T)[0, 1]) <= 3 / math.sqrt(M)


def test_fbm_increment_covariance_matches_formula():
    H = 0.3
    vals = np.array([sample_fbm(FbmSpec(H, 1.0, 2, seed=s)).values[1:, 0] for s in range(4000)])
    t = np.array([0.25, 0.5, 0.75, 1.0])
    emp = vals.T @ vals / len(vals)
    assert np.max(np.abs(emp - fbm_covariance(t[:, None], t[None, :], H))) < 0.08


def test_fgn_autocovariance_white_for_half():
    r = fgn_autocovariance(8, 0.5)
    assert r[0] == pytest.approx(1.0)
    assert np.allclose(r[1:], 0.0, atol=1e-14)


def test_sheet_vanishes_on_axes():
    w = sample_sheet(SheetSpec(0.3, 0.7, Grid2D(1.0, 2.0, 4, 5), d=2, seed=3))
    assert np.all(w.values[0] == 0.0) and np.all(w.values[:, 0] == 0.0)


def test_sheet_variance_and_slice_law():
    g = Grid2D.square(1.0, 2)
    vals = np.array([sample_sheet(SheetSpec(0.5, 0.5, g, seed=s)).values[:, :, 0] for s in range(M)])
    assert np.var(vals[:, 4, 4]) == pytest.approx(1.0, abs=0.05)
    assert np.var(vals[:, 4, 1]) == pytest.approx(0.25, abs=0.02)


def test_determinism_and_seed_sensitivity():
    a = sample_fbm(FbmSpec(0.25, 1.0, 8, seed=99)).values
    b = sample_fbm(FbmSpec(0.25, 1.0, 8, seed=99)).values
    c = sample_fbm(FbmSpec(0.25, 1.0, 8, seed=100)).values
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)
    g = Grid2D.square(1.0, 5)
    s1 = sample_sheet(SheetSpec(0.4, 0.6, g, seed=5)).values
    s2 = sample_sheet(SheetSpec(0.4, 0.6, g, seed=5)).values
    assert s1.tobytes() == s2.tobytes()


def test_standard_normals_moments_and_shape():
    z = standard_normals(1, (201, 3))
    assert z.shape == (201, 3)
    big = standard_normals(2, 200_000)
    assert abs(big.mean()) < 0.01 and big.std() == pytest.approx(1.0, abs=0.01)


def test_derive_seed_properties():
    assert derive_seed(5) == 5
    assert derive_seed(5, "a", 1) != derive_seed(5, "a", 2)
    assert derive_seed(5, "a") != derive_seed(5, "b")
    assert 0 <= derive_seed(2 ** 64 - 1, "x", 3) < 2 ** 64


@pytest.mark.parametrize("kw", [dict(H=0.0), dict(H=1.0), dict(H=0.5, T=0.0), dict(H=0.5, n=0),
                                dict(H=0.5, d=0), dict(H=0.5, seed=-1)])
def test_fbm_spec_validation(kw):
    with pytest.raises(ConfigurationError):
        FbmSpec(**kw)


def test_sum_field_examples():
    z = Path1D(1.0, 3, np.zeros((9, 1)))
    assert not np.any(sum_field(z, z).values)
    ident = Path1D.from_function(1.0, 3, lambda t: t)
    f = sum_field(ident, ident)
    T1, T2 = f.grid.mesh()
    assert np.array_equal(f.values[..., 0], T1 + T2)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(1, 6), st.integers(1, 6))
def test_sum_field_is_additive(seed, n1, n2):
    b1 = sample_fbm(FbmSpec(0.3, 1.0, n1, seed=seed))
    b2 = sample_fbm(FbmSpec(0.6, 2.0, n2, seed=seed ^ 1))
    w = sum_field(b1, b2)
    rng = np.random.default_rng(seed % 2 ** 32)
    i0, i1 = np.sort(rng.integers(0, 2 ** n1 + 1, 2))
    j0, j1 = np.sort(rng.integers(0, 2 ** n2 + 1, 2))
    scale = np.max(np.abs(w.values)) + 1.0
    assert np.max(np.abs(box_increment(w.values, i0, j0, i1, j1))) <= 8 * np.finfo(float).eps * scale


def test_sum_field_dimension_mismatch():
    with pytest.raises(DomainError):
        sum_field(Path1D(1.0, 2, np.zeros((5, 1))), Path1D(1.0, 2, np.zeros((5, 2))))


def test_rescaled_boundary_examples():
    b = sample_fbm(FbmSpec(0.4, 1.0, 5, seed=1))
    same = rescaled_boundary(b, 1.0)
    assert same.T == b.T and np.array_equal(same.values, b.values)
    ident = Path1D.from_function(1.0, 4, lambda t: t)
    r = rescaled_boundary(ident, math.sqrt(2), 6)
    assert np.allclose(r.values[:, 0], r.nodes / math.sqrt(2), atol=1e-15)
    aff = Path1D.from_function(1.0, 3, lambda t: 2.0 - 3.0 * t)
    r = rescaled_boundary(aff, 2.0, 7)
    assert np.allclose(r.values[:, 0], 2.0 - 3.0 * r.nodes / 2.0, atol=1e-14)
    with pytest.raises(DomainError):
        rescaled_boundary(aff, -1.0)


def test_resample_path_keeps_nodes():
    b = sample_fbm(FbmSpec(0.5, 1.0, 4, seed=2))
    r = resample_path(b, 1.0, 6)
    assert np.array_equal(r.values[::4], b.values)
    with pytest.raises(DomainError):
        resample_path(b, 2.0, 4)
