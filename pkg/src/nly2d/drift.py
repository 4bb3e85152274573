"""
Drift (and wave nonlinearity) representations with Gaussian or triangular
mollification.

A :class:`DriftSpec` maps ``R^d -> R^d``.  Catalog drifts act componentwise,
``b(x)_i = f(x_i)``, with ``f`` one of

``constant``   ``value``
``linear``     ``slope * x``
``sine``       ``amplitude * sin(frequency * x + phase)``
``gaussian``   ``amplitude * exp(-(x - center)^2 / (2 width^2))``
``indicator``  ``amplitude * 1[lower <= x < upper]`` (``upper`` may be ``inf``; a step)
``power``      ``amplitude * |x|^exponent``

Grid-sampled drifts (``d = 1``) are interpolated with Keys' cubic kernel and
Fourier drifts are ``Re sum_k c_k exp(2 pi i k x / period)``.

Mollification ``b * rho_eps`` uses closed forms where they exist (constant,
linear, sine, Fourier, indicator, gaussian under the Gaussian kernel) and
graded Gauss-Legendre quadrature split at the kinks otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from scipy.special import ndtr

from .errors import ConfigurationError, DomainError

CATALOG = {
    "constant": {"value": 1.0},
    "linear": {"slope": 1.0},
    "sine": {"amplitude": 1.0, "frequency": 1.0, "phase": 0.0},
    "gaussian": {"amplitude": 1.0, "center": 0.0, "width": 1.0},
    "indicator": {"amplitude": 1.0, "lower": 0.0, "upper": math.inf},
    "power": {"amplitude": 1.0, "exponent": 0.5},
}
SMOOTH = {"constant", "linear", "sine", "gaussian"}
MOLLIFIERS = ("gaussian", "triangular")
QUAD_NODES = 48
GAUSS_CUTOFF = 10.0


def _graded_rule(n: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[0, 1]`` after ``v -> v^3 / (v^3 + (1 - v)^3)``."""
    g, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (g + 1)
    a, b = s ** 3, (1 - s) ** 3
    v = a / (a + b)
    dv = 3 * s ** 2 * (1 - s) ** 2 / (a + b) ** 2
    return v, 0.5 * w * dv


def keys_weights(f: np.ndarray) -> tuple[np.ndarray, ...]:
    """Keys (a = -1/2) cubic convolution weights for offsets ``-1, 0, 1, 2``."""
    f2, f3 = f * f, f * f * f
    w0 = -0.5 * f3 + f2 - 0.5 * f
    w1 = 1.5 * f3 - 2.5 * f2 + 1.0
    w2 = -1.5 * f3 + 2.0 * f2 + 0.5 * f
    w3 = 0.5 * f3 - 0.5 * f2
    return w0, w1, w2, w3


def keys_interpolate(values: np.ndarray, origin_index: int, u: np.ndarray) -> np.ndarray:
    """
    Cubic convolution of lattice samples at fractional lattice coordinates ``u``.

    ``values[k]`` is the sample at lattice index ``k - origin_index``.  The
    caller guarantees ``floor(u) - 1`` and ``floor(u) + 2`` are in range.
    """
    m = np.floor(u)
    f = u - m
    k = m.astype(np.int64) + origin_index
    w0, w1, w2, w3 = keys_weights(f)
    return w0 * values[k - 1] + w1 * values[k] + w2 * values[k + 1] + w3 * values[k + 2]


def _triangular_cdf(u: np.ndarray) -> np.ndarray:
    """CDF of the triangular density ``(1 - |u|)_+``."""
    u = np.clip(u, -1.0, 1.0)
    return np.where(u < 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)


def _kernel_cdf(u: np.ndarray, shape: str) -> np.ndarray:
    return ndtr(u) if shape == "gaussian" else _triangular_cdf(u)


def _kernel_char(k: np.ndarray, eps: float, shape: str) -> np.ndarray:
    """Characteristic function of the mollifier at frequency ``k``."""
    if shape == "gaussian":
        return np.exp(-0.5 * (k * eps) ** 2)
    return np.sinc(k * eps / (2 * np.pi)) ** 2


@dataclass(frozen=True)
class DriftSpec:
    """
    A drift ``b`` and its mollification width.

    Parameters
    ----------
    kind : {"catalog", "grid", "fourier"}
    name : catalog entry (``kind="catalog"``)
    params : catalog parameters; missing ones take the catalog defaults
    d : spatial dimension
    zeta : regularity tag (informational)
    eps : mollification width, 0 for the raw drift
    mollifier : "gaussian" (variance ``eps**2``) or "triangular" (support ``[-eps, eps]``)
    lattice : ``(h, values, origin_index)`` for grid-sampled drifts
    coefficients, period : Fourier representation
    """

    kind: str = "catalog"
    name: str = "constant"
    params: dict = field(default_factory=dict)
    d: int = 1
    zeta: float = math.inf
    eps: float = 0.0
    mollifier: str = "gaussian"
    lattice: Any = None
    coefficients: Any = None
    period: float = 2 * math.pi

    def __post_init__(self):
        if self.kind not in ("catalog", "grid", "fourier"):
            raise ConfigurationError(f"unknown drift representation {self.kind!r}")
        if self.eps < 0:
            raise ConfigurationError(f"mollification width must be >= 0, got {self.eps}")
        if self.mollifier not in MOLLIFIERS:
            raise ConfigurationError(f"unknown mollifier {self.mollifier!r}; choose from {MOLLIFIERS}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.d}")
        if self.kind == "catalog":
            if self.name not in CATALOG:
                raise ConfigurationError(f"unknown catalog drift {self.name!r}; choose from {sorted(CATALOG)}")
            unknown = set(self.params) - set(CATALOG[self.name])
            if unknown:
                raise ConfigurationError(f"unknown parameters {sorted(unknown)} for drift {self.name!r}")
            merged = dict(CATALOG[self.name])
            merged.update({k: float(v) for k, v in self.params.items()})
            object.__setattr__(self, "params", merged)
            if self.name == "gaussian" and merged["width"] <= 0:
                raise ConfigurationError("gaussian width must be positive")
            if self.name == "indicator" and not merged["lower"] < merged["upper"]:
                raise ConfigurationError("indicator needs lower < upper")
        elif self.kind == "grid":
            if self.d != 1:
                raise ConfigurationError("grid-sampled drifts are one-dimensional")
            h, values, origin = self.lattice
            values = np.asarray(values, dtype=float)
            if values.ndim != 1 or values.size < 4 or not h > 0:
                raise ConfigurationError("grid drift needs a positive step and at least 4 samples")
            object.__setattr__(self, "lattice", (float(h), values, int(origin)))
        else:
            if self.d != 1:
                raise ConfigurationError("Fourier drifts are one-dimensional")
            c = np.asarray(self.coefficients, dtype=complex)
            if c.ndim != 1 or c.size == 0 or not self.period > 0:
                raise ConfigurationError("Fourier drift needs a nonempty coefficient vector and positive period")
            object.__setattr__(self, "coefficients", c)

    # constructors -----------------------------------------------------------------
    @classmethod
    def catalog(cls, name: str, d: int = 1, zeta: float | None = None, **params) -> "DriftSpec":
        if zeta is None:
            zeta = {"indicator": 0.0, "power": float(params.get("exponent", 0.5))}.get(name, math.inf)
        return cls("catalog", name, params, d=d, zeta=zeta)

    @classmethod
    def from_samples(cls, h: float, values, origin_index: int, zeta: float = 0.0) -> "DriftSpec":
        """Drift sampled at ``(k - origin_index) * h``, ``k = 0..len(values)-1``."""
        return cls("grid", "grid", {}, d=1, zeta=zeta, lattice=(h, values, origin_index))

    @classmethod
    def fourier(cls, coefficients, period: float, zeta: float = math.inf) -> "DriftSpec":
        """``Re sum_k c_k exp(2 pi i k x / period)`` for ``k = 0..K``."""
        return cls("fourier", "fourier", {}, d=1, zeta=zeta, coefficients=coefficients, period=period)

    def mollified(self, eps: float, mollifier: str | None = None) -> "DriftSpec":
        return replace(self, eps=float(eps), mollifier=mollifier or self.mollifier)

    @property
    def is_smooth(self) -> bool:
        """Whether pointwise residuals of equations driven by ``b`` are meaningful."""
        if self.eps > 0:
            return True
        if self.kind == "catalog":
            return self.name in SMOOTH
        return self.kind == "fourier"

    @property
    def is_constant(self) -> bool:
        return self.kind == "catalog" and self.name == "constant"

    # evaluation -------------------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., d)``; returns shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise DomainError(f"points must have trailing dimension {self.d}, got shape {x.shape}")
        return self.scalar(x)

    def scalar(self, x) -> np.ndarray:
        """Componentwise profile evaluated elementwise on any array."""
        x = np.asarray(x, dtype=float)
        if self.kind == "grid":
            return self._grid_eval(x)
        if self.kind == "fourier":
            return self._fourier_eval(x)
        if self.eps == 0.0:
            return self._raw(x)
        return self._mollified(x)

    def _raw(self, x):
        p, nm = self.params, self.name
        if nm == "constant":
            return np.full_like(x, p["value"])
        if nm == "linear":
            return p["slope"] * x
        if nm == "sine":
            return p["amplitude"] * np.sin(p["frequency"] * x + p["phase"])
        if nm == "gaussian":
            return p["amplitude"] * np.exp(-0.5 * ((x - p["center"]) / p["width"]) ** 2)
        if nm == "indicator":
            return p["amplitude"] * ((x >= p["lower"]) & (x < p["upper"])).astype(float)
        return p["amplitude"] * np.abs(x) ** p["exponent"]

    def _mollified(self, x):
        p, nm, eps, shape = self.params, self.name, self.eps, self.mollifier
        if nm in ("constant", "linear"):
            return self._raw(x)
        if nm == "sine":
            return _kernel_char(np.asarray(p["frequency"]), eps, shape) * self._raw(x)
        if nm == "indicator":
            lo = _kernel_cdf((x - p["lower"]) / eps, shape)
            hi = _kernel_cdf((x - p["upper"]) / eps, shape) if math.isfinite(p["upper"]) else 0.0
            return p["amplitude"] * (lo - hi)
        if nm == "gaussian" and shape == "gaussian":
            s2 = p["width"] ** 2 + eps ** 2
            return p["amplitude"] * p["width"] / math.sqrt(s2) * np.exp(-0.5 * (x - p["center"]) ** 2 / s2)
        return self._quadrature(x)

    def _quadrature(self, x):
        # b * rho(x) = int b(x - eps u) k(u) du with k the unit-scale kernel, split
        # at the kernel breakpoints and at the cusp u = x / eps of the profile;
        # each piece uses Gauss-Legendre in a variable graded towards both ends
        if self.mollifier == "gaussian":
            fixed = [-GAUSS_CUTOFF, -6.0, -3.0, -1.0, 1.0, 3.0, 6.0, GAUSS_CUTOFF]
            kern = lambda u: np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
        else:
            fixed = [-1.0, 0.0, 1.0]
            kern = lambda u: np.clip(1 - np.abs(u), 0.0, None)
        lo, hi = fixed[0], fixed[-1]
        flat = x.reshape(-1)
        cusp = np.clip(flat / self.eps, lo, hi)
        brk = np.sort(np.column_stack([np.broadcast_to(fixed, (flat.size, len(fixed))), cusp]), axis=1)
        v, vw = _graded_rule()
        raw = replace(self, eps=0.0)
        out = np.zeros(flat.size)
        for k in range(brk.shape[1] - 1):
            a, b = brk[:, k:k + 1], brk[:, k + 1:k + 2]
            u = a + (b - a) * v
            out += np.sum((b - a) * vw * kern(u) * raw._raw(flat[:, None] - self.eps * u), axis=1)
        return out.reshape(x.shape)

    def _grid_eval(self, x):
        h, values, origin = self.lattice
        if self.eps > 0:
            values = self._mollified_lattice(h, values)
        u = x / h
        lo = -origin + 1
        hi = values.size - origin - 3
        if np.any(u < lo) or np.any(u > hi):
            raise DomainError(f"grid drift evaluated outside its sampled range "
                              f"[{lo * h:.6g}, {hi * h:.6g}]: observed [{np.min(x):.6g}, {np.max(x):.6g}]")
        return keys_interpolate(values, origin, u)

    def _mollified_lattice(self, h, values):
        r = int(math.ceil((8.0 if self.mollifier == "gaussian" else 1.0) * self.eps / h))
        k = np.arange(-r, r + 1) * h
        if self.mollifier == "gaussian":
            ker = np.exp(-0.5 * (k / self.eps) ** 2)
        else:
            ker = np.clip(1 - np.abs(k) / self.eps, 0, None)
        if ker.sum() == 0:
            return values
        ker = ker / ker.sum()
        padded = np.pad(values, r, mode="edge")
        return np.convolve(padded, ker, mode="valid")

    def _fourier_eval(self, x):
        c = self.coefficients
        k = np.arange(c.size)
        freq = 2 * np.pi * k / self.period
        if self.eps > 0:
            c = c * _kernel_char(freq, self.eps, self.mollifier)
        phase = np.multiply.outer(x, freq)
        return np.real(np.exp(1j * phase) @ c)

    def lattice_values(self, h: float, lo: int, hi: int) -> np.ndarray:
        """Componentwise profile at lattice points ``k * h`` for ``k = lo..hi``."""
        return self.scalar(np.arange(lo, hi + 1) * h)

    def sup_distance(self, other: "DriftSpec", x: np.ndarray) -> float:
        return float(np.max(np.abs(self.scalar(x) - other.scalar(x))))

    def describe(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "d": self.d, "eps": self.eps,
               "mollifier": self.mollifier, "zeta": self.zeta}
        if self.kind == "catalog":
            out["params"] = dict(self.params)
        return out
