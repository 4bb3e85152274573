import math

import numpy as np
import pytest
from scipy.integrate import quad

from nly2d.drift import CATALOG, DriftSpec, keys_interpolate
from nly2d.errors import ConfigurationError, DomainError


def _reference_mollified(b: DriftSpec, x: float) -> float:
    """Adaptive quadrature of ``b * rho_eps`` at one point."""
    raw = b.mollified(0.0)
    e = b.eps
    if b.mollifier == "gaussian":
        f = lambda u: raw.scalar(x - e * u) * math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        return quad(f, -12, 12, points=[(x - c) / e for c in _kinks(b)] or None, limit=200)[0]
    f = lambda u: raw.scalar(x - e * u) * (1 - abs(u))
    pts = [0.0] + [(x - c) / e for c in _kinks(b) if abs(x - c) < e]
    return quad(f, -1, 1, points=pts, limit=200)[0]


def _kinks(b):
    if b.name == "indicator":
        return [v for v in (b.params["lower"], b.params["upper"]) if math.isfinite(v)]
    return [0.0] if b.name == "power" else []


def test_catalog_defaults_and_values():
    x = np.linspace(-2, 2, 9)
    assert np.all(DriftSpec.catalog("constant", value=3.0).scalar(x) == 3.0)
    assert np.allclose(DriftSpec.catalog("linear", slope=-2.0).scalar(x), -2 * x)
    assert np.allclose(DriftSpec.catalog("sine").scalar(x), np.sin(x))
    assert DriftSpec.catalog("gaussian").scalar(np.array([0.0]))[0] == 1.0
    step = DriftSpec.catalog("indicator").scalar(x)
    assert np.array_equal(step, (x >= 0).astype(float))
    assert np.allclose(DriftSpec.catalog("power", exponent=0.5).scalar(x), np.sqrt(np.abs(x)))


def test_call_checks_trailing_dimension():
    b = DriftSpec.catalog("sine", d=2)
    assert b(np.zeros((3, 2))).shape == (3, 2)
    with pytest.raises(DomainError):
        b(np.zeros((3, 1)))


@pytest.mark.parametrize("kw", [dict(name="nope"), dict(name="sine", params={"bad": 1.0}),
                                dict(name="gaussian", params={"width": 0.0}),
                                dict(name="indicator", params={"lower": 1.0, "upper": 0.0}),
                                dict(eps=-1.0), dict(mollifier="box"), dict(d=0), dict(kind="other")])
def test_invalid_specs(kw):
    with pytest.raises(ConfigurationError):
        DriftSpec(**kw)


@pytest.mark.parametrize("name, params", [("sine", {"frequency": 3.0}), ("gaussian", {"width": 0.3}),
                                          ("indicator", {"lower": -0.2, "upper": 0.4}),
                                          ("indicator", {}), ("power", {"exponent": 0.3})])
@pytest.mark.parametrize("shape", ["gaussian", "triangular"])
def test_mollification_against_quadrature(name, params, shape):
    b = DriftSpec.catalog(name, **params).mollified(0.1, shape)
    for x in (-0.7, -0.05, 0.0, 0.13, 0.9):
        assert b.scalar(np.array([x]))[0] == pytest.approx(_reference_mollified(b, x), abs=2e-6)


def test_mollification_converges_to_smooth_drift():
    b = DriftSpec.catalog("gaussian", width=0.5)
    x = np.linspace(-2, 2, 101)
    errs = [b.sup_distance(b.mollified(e), x) for e in (0.2, 0.1, 0.05)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


def test_smoothness_flags():
    assert DriftSpec.catalog("sine").is_smooth
    assert not DriftSpec.catalog("indicator").is_smooth
    assert DriftSpec.catalog("indicator").mollified(0.1).is_smooth
    assert DriftSpec.catalog("constant").is_constant
    assert DriftSpec.catalog("indicator").zeta == 0.0
    assert set(CATALOG) >= {"constant", "sine", "gaussian", "indicator"}


def test_keys_interpolation_reproduces_cubics():
    h, origin = 0.1, 20
    k = np.arange(41) - origin
    f = lambda x: 1 + x - 2 * x ** 2 + 0.5 * x ** 3
    vals = f(k * h)
    u = np.linspace(-1.5, 1.5, 31) / h
    # Keys' kernel is exact for quadratics, third order for cubics
    assert np.allclose(keys_interpolate(f(k * h) - 0.5 * (k * h) ** 3, origin, u),
                       f(u * h) - 0.5 * (u * h) ** 3, atol=1e-12)
    assert np.max(np.abs(keys_interpolate(vals, origin, u) - f(u * h))) < 1e-3


def test_grid_drift_range_and_mollification():
    h = 0.05
    xs = (np.arange(81) - 40) * h
    b = DriftSpec.from_samples(h, np.sin(xs), 40)
    assert b.scalar(np.array([0.3]))[0] == pytest.approx(math.sin(0.3), abs=1e-5)
    with pytest.raises(DomainError):
        b.scalar(np.array([5.0]))
    m = b.mollified(0.2)
    assert m.scalar(np.array([0.3]))[0] == pytest.approx(math.exp(-0.02) * math.sin(0.3), abs=2e-3)


def test_fourier_drift_and_mollification():
    b = DriftSpec.fourier([0.5, 1.0], period=2 * math.pi)
    x = np.linspace(-1, 1, 7)
    assert np.allclose(b.scalar(x), 0.5 + np.cos(x))
    assert np.allclose(b.mollified(0.3).scalar(x), 0.5 + math.exp(-0.045) * np.cos(x))


def test_describe_is_plain_data():
    d = DriftSpec.catalog("sine", amplitude=2.0).mollified(0.1, "triangular").describe()
    assert d["params"]["amplitude"] == 2.0 and d["eps"] == 0.1 and d["mollifier"] == "triangular"
