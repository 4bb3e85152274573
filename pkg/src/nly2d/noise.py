"""
Samplers for fractional Brownian motion, the fractional Brownian sheet and the
composite fields built from one-parameter paths.

Randomness
----------
Every sampler draws from ``numpy.random.Philox`` keyed by the 64-bit seed
(a counter-based generator whose stream is fixed across platforms).  Uniform
doubles come from ``Generator.random`` and are turned into standard normals
with the Box-Muller transform

    z0 = sqrt(-2 log(1 - u1)) cos(2 pi u2),   z1 = sqrt(-2 log(1 - u1)) sin(2 pi u2),

so no platform-dependent library normal generator enters the stream.
Independent streams are derived with :func:`derive_seed`.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DomainError, NumericalError
from .grid_field import Field2D, Grid2D, Path1D

SEED_MASK = (1 << 64) - 1
EMBEDDING_TOL = 1e-10


def derive_seed(seed: int, tag: str = "", replicate: int = 0) -> int:
    """Sub-seed ``seed XOR h(tag) XOR replicate`` with ``h`` the first 8 bytes of SHA-256."""
    h = int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little") if tag else 0
    return (int(seed) ^ h ^ int(replicate)) & SEED_MASK


def standard_normals(seed: int, size) -> np.ndarray:
    """Standard normal array of the given shape from the documented stream."""
    shape = (size,) if np.isscalar(size) else tuple(size)
    n = int(np.prod(shape, dtype=np.int64))
    m = (n + 1) // 2
    gen = np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))
    u = gen.random((m, 2))
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    ang = 2.0 * np.pi * u[:, 1]
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:n].reshape(shape)


def _check_seed(seed):
    if int(seed) != seed or not (0 <= int(seed) <= SEED_MASK):
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed!r}")


@dataclass(frozen=True)
class FbmSpec:
    H: float
    T: float = 1.0
    n: int = 10
    d: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.H < 1:
            raise ConfigurationError(f"Hurst parameter must lie in (0,1), got H={self.H}")
        if not self.T > 0:
            raise ConfigurationError(f"horizon must be positive, got T={self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"level must be an integer >= 1, got n={self.n}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"dimension must be >= 1, got d={self.d}")
        _check_seed(self.seed)


@dataclass(frozen=True)
class SheetSpec:
    H1: float
    H2: float
    grid: Grid2D
    d: int = 1
    seed: int = 0

    def __post_init__(self):
        for name, H in (("H1", self.H1), ("H2", self.H2)):
            if not 0 < H < 1:
                raise ConfigurationError(f"{name} must lie in (0,1), got {H}")
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"dimension must be >= 1, got d={self.d}")
        _check_seed(self.seed)


def fbm_covariance(t: np.ndarray, s: np.ndarray, H: float) -> np.ndarray:
    """``R_H(t, s) = (|t|^{2H} + |s|^{2H} - |t - s|^{2H}) / 2``."""
    t, s = np.asarray(t, float), np.asarray(s, float)
    return 0.5 * (np.abs(t) ** (2 * H) + np.abs(s) ** (2 * H) - np.abs(t - s) ** (2 * H))


def fgn_autocovariance(N: int, H: float) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``0..N``."""
    k = np.arange(N + 1, dtype=float)
    return 0.5 * ((k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


@lru_cache(maxsize=32)
def _embedding_eigenvalues(N: int, H: float) -> np.ndarray:
    g = fgn_autocovariance(N, H)
    row = np.concatenate([g, g[N - 1:0:-1]])
    return np.fft.fft(row).real


@lru_cache(maxsize=32)
def _toeplitz_factor(N: int, H: float) -> np.ndarray:
    g = fgn_autocovariance(N - 1, H)
    C = scipy.linalg.toeplitz(g)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(C)
    if w.min() < -1e-8 * w.max():
        raise NumericalError("fGn covariance is not positive semidefinite",
                             {"N": N, "H": H, "min_eigenvalue": float(w.min())})
    return V * np.sqrt(np.clip(w, 0.0, None))


def _fgn(N: int, H: float, d: int, seed: int) -> np.ndarray:
    """``(N, d)`` array of unit-step fGn by circulant embedding, Cholesky fallback."""
    lam = _embedding_eigenvalues(N, H)
    if lam.min() >= -EMBEDDING_TOL * lam.max():
        M = lam.size
        z = standard_normals(seed, (2, M, d))
        coef = np.sqrt(np.clip(lam, 0.0, None) / M)[:, None]
        return np.fft.fft(coef * (z[0] + 1j * z[1]), axis=0).real[:N]
    try:
        L = _toeplitz_factor(N, H)
    except NumericalError as exc:
        exc.diagnostics["embedding_min_eigenvalue"] = float(lam.min())
        raise
    return L @ standard_normals(seed, (N, d))


def sample_fbm(spec: FbmSpec) -> Path1D:
    """
    Fractional Brownian motion on ``[0, T]`` at ``2**n + 1`` nodes.

    Increments are sampled exactly by circulant embedding of the fractional
    Gaussian noise covariance; if the embedding has negative eigenvalues the
    Toeplitz covariance is factorized densely instead.  ``B_0 = 0`` exactly.
    """
    N = 2 ** spec.n
    incr = _fgn(N, spec.H, spec.d, spec.seed) * (spec.T / N) ** spec.H
    values = np.zeros((N + 1, spec.d))
    np.cumsum(incr, axis=0, out=values[1:])
    return Path1D(spec.T, spec.n, values)


@lru_cache(maxsize=32)
def _fbm_factor(N: int, T: float, H: float) -> np.ndarray:
    t = np.arange(1, N + 1) * (T / N)
    C = fbm_covariance(t[:, None], t[None, :], H)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(C)
    if w.min() < -1e-8 * w.max():
        raise NumericalError("fBm covariance is not positive semidefinite",
                             {"N": N, "T": T, "H": H, "min_eigenvalue": float(w.min())})
    return V * np.sqrt(np.clip(w, 0.0, None))


def sample_sheet(spec: SheetSpec) -> Field2D:
    """
    Fractional Brownian sheet with covariance ``R_{H1}(s1,t1) R_{H2}(s2,t2)``.

    The covariance of the interior nodes is the Kronecker product of the two
    one-parameter fBm covariances, so a sample is ``L1 Z L2^T`` with ``Li``
    the per-axis Cholesky factors and ``Z`` i.i.d. standard normal.  The
    sheet vanishes on both axes.
    """
    g = spec.grid
    L1 = _fbm_factor(g.N1, g.T1, float(spec.H1))
    L2 = _fbm_factor(g.N2, g.T2, float(spec.H2))
    z = standard_normals(spec.seed, (spec.d, g.N1, g.N2))
    values = np.zeros(g.shape + (spec.d,))
    for k in range(spec.d):
        values[1:, 1:, k] = L1 @ z[k] @ L2.T
    return Field2D(g, values)


def sum_field(beta1: Path1D, beta2: Path1D) -> Field2D:
    """Field ``w(t1, t2) = beta1(t1) + beta2(t2)``; its rectangular increments vanish."""
    if beta1.d != beta2.d:
        raise DomainError(f"dimension mismatch: {beta1.d} vs {beta2.d}")
    grid = Grid2D(beta1.T, beta2.T, beta1.n, beta2.n)
    return Field2D(grid, beta1.values[:, None, :] + beta2.values[None, :, :])


def resample_path(beta: Path1D, T: float, n: int) -> Path1D:
    """Linear interpolation of ``beta`` onto ``2**n + 1`` nodes of ``[0, T]`` (``T <= beta.T``)."""
    if T > beta.T * (1 + 1e-12):
        raise DomainError(f"cannot resample a path of horizon {beta.T} onto [0, {T}]")
    t = np.arange(2 ** n + 1) * (T / 2 ** n)
    return Path1D(T, n, _interp_nodes(beta, t))


def _interp_nodes(beta: Path1D, t: np.ndarray) -> np.ndarray:
    u = np.clip(t / beta.h, 0.0, beta.N)
    k = np.minimum(np.floor(u).astype(np.int64), beta.N - 1)
    a = (u - k)[:, None]
    v = beta.values
    out = (1 - a) * v[k] + a * v[k + 1]
    exact = np.isclose(u, np.round(u), rtol=0, atol=1e-9)
    ki = np.round(u[exact]).astype(np.int64)
    out[exact] = v[ki]
    return out


def rescaled_boundary(beta: Path1D, factor: float, n: int | None = None) -> Path1D:
    """
    The path ``t -> beta(t / factor)`` on ``[0, factor * T]``.

    At the same level the new nodes are the images of the old ones, so the
    values are copied unchanged; at another level ``n`` they are obtained by
    linear interpolation (exact for affine data).
    """
    if not factor > 0:
        raise DomainError(f"rescaling factor must be positive, got {factor}")
    T = beta.T * factor
    if n is None or n == beta.n:
        return Path1D(T, beta.n, beta.values)
    t = np.arange(2 ** n + 1) * (T / 2 ** n)
    return Path1D(T, n, _interp_nodes(beta, t / factor))


def terminal_std(spec) -> float:
    """Standard deviation of one component of the terminal value."""
    if isinstance(spec, FbmSpec):
        return spec.T ** spec.H
    if isinstance(spec, SheetSpec):
        return spec.grid.T1 ** spec.H1 * spec.grid.T2 ** spec.H2
    raise TypeError(f"unsupported spec {type(spec).__name__}")


def sum_terminal_std(spec1: FbmSpec, spec2: FbmSpec) -> float:
    return math.hypot(terminal_std(spec1), terminal_std(spec2))
