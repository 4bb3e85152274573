"""
Occupation measures and local times of sampled paths and fields, averaged
fields ``A = b * L^{-w}``, Bessel-potential norms of local-time increments and
Monte Carlo regularity scans.

Spatial discretization
----------------------
A :class:`SpatialGrid` is a symmetric box with ``M = 2**k`` bins per axis of
width ``h = 2a / M`` whose centres ``(k - M/2) h`` include the origin.  Bin 0 is
a guard bin that is never filled, so the reflection ``x -> -x`` is the exact
index map ``k -> M - k``.  Values must satisfy ``|v| <= (M/2 - 1) h``.

Estimator
---------
Every time cell deposits its measure (length or area) at the spatial position
of the path at the cell's lower-left node, either into the nearest bin
(``scheme="nearest"``, a plain histogram) or split linearly between the two
neighbouring bins along each axis (``scheme="linear"``, cloud-in-cell).  Both
keep the mass identity ``sum L_t h^d = |[0, t]|`` exact.  Deposits are stored
per cell as integer bin offsets from the origin plus weights; densities at
time nodes are assembled on demand.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .drift import DriftSpec, keys_interpolate
from .errors import ConfigurationError, DomainError
from .grid_field import Field2D, Grid2D, Path1D
from .noise import FbmSpec, SheetSpec, derive_seed, sample_fbm, sample_sheet, terminal_std
from .timefield import TimeIndexedField, _check_partition

SCHEMES = ("nearest", "linear")
DEFAULT_SCHEME = "nearest"
DENSE_LIMIT = 2 ** 26


@dataclass(frozen=True)
class SpatialGrid:
    """Symmetric box ``[-a - h/2, a - h/2)^d`` with ``bins`` bins of width ``h = 2a/bins`` per axis."""

    half_width: float
    bins: int = 256
    d: int = 1

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError(f"half width must be positive, got {self.half_width}")
        M = int(self.bins)
        if M != self.bins or M < 8 or M & (M - 1):
            raise DomainError(f"bins must be a power of two >= 8, got {self.bins}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be >= 1, got {self.d}")
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "bins", M)
        object.__setattr__(self, "d", int(self.d))

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.bins

    @property
    def origin(self) -> int:
        return self.bins // 2

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.bins) - self.origin) * self.h

    @property
    def max_abs(self) -> float:
        """Largest admissible ``|v|`` per coordinate."""
        return (self.origin - 1) * self.h

    @property
    def x_min(self) -> float:
        return -self.half_width - 0.5 * self.h

    @property
    def x_max(self) -> float:
        return self.half_width - 0.5 * self.h

    @property
    def lambda_max(self) -> float:
        """Largest resolvable Bessel order, ``log2(bins) / 4`` (2 at 256 bins)."""
        return math.log2(self.bins) / 4.0

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.bins,) * self.d

    @classmethod
    def auto(cls, values, bins: int = 256, sigma: float = 0.0, n_sigma: float = 4.0,
             margin: float = 0.0, d: int | None = None) -> "SpatialGrid":
        """
        Box covering ``max(max|values|, n_sigma * sigma) + margin`` with one
        spare bin on each side, so both binning schemes fit.

        ``sigma`` is the terminal marginal standard deviation of the random
        field; for deterministic paths leave it at 0 and set ``margin``.
        """
        v = np.asarray(values, dtype=float)
        if d is None:
            d = v.shape[-1] if v.ndim >= 2 else 1
        R = max(float(np.max(np.abs(v))) if v.size else 0.0, n_sigma * sigma) + margin
        if R <= 0:
            R = 1.0
        M = int(bins)
        return cls(R * M / (M - 4), M, d)

    def refined(self, factor: int = 2) -> "SpatialGrid":
        """Same box with ``factor`` times as many bins."""
        return SpatialGrid(self.half_width, self.bins * factor, self.d)

    def check_range(self, values, what: str = "values"):
        v = np.asarray(values)
        lo, hi = float(np.min(v)), float(np.max(v))
        if max(-lo, hi) > self.max_abs * (1 + 1e-12):
            raise DomainError(f"{what} leave the spatial box: observed range [{lo:.6g}, {hi:.6g}], "
                              f"admissible [{-self.max_abs:.6g}, {self.max_abs:.6g}]")


def _deposit(values: np.ndarray, sgrid: SpatialGrid, scheme: str, sign: float, what: str):
    """Integer offsets and weights of the deposits of ``sign * values``."""
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown binning scheme {scheme!r}; choose from {SCHEMES}")
    u = (sign * values) / sgrid.h
    lim = sgrid.origin - 1
    if scheme == "nearest":
        lo = np.rint(u)
        top = lo
        w_lo = w_hi = None
    else:
        lo = np.floor(u)
        w_hi = u - lo
        w_lo = 1.0 - w_hi
        top = lo + 1
    if lo.size and (np.min(lo) < -lim or np.max(top) > lim):
        sgrid.check_range(values, what)
        if np.min(lo) < -lim or np.max(top) > lim:
            raise DomainError(f"{what} fall in the guard bins of the spatial box")
    return lo.astype(np.int32), w_lo, w_hi


class LocalTime:
    """
    Histogram local time of a path (``kind="path"``), of a two-parameter field
    (``kind="field"``) or of a sum ``beta1(t1) + beta2(t2)`` represented as
    the convolution of the two path local times (``kind="product"``).

    ``sign = +1`` means the local time of ``w`` and ``sign = -1`` that of ``-w``.
    """

    def __init__(self, kind, sgrid, scheme, sign, *, lo=None, w_lo=None, w_hi=None,
                 time=None, parts=None):
        self.kind, self.sgrid, self.scheme, self.sign = kind, sgrid, scheme, sign
        self.lo, self.w_lo, self.w_hi = lo, w_lo, w_hi
        self.parts = parts
        if kind == "path":
            self.T, self.n = time
            self.grid = None
            self.cell_measure = self.T / 2 ** self.n
        elif kind == "field":
            self.grid = time
            self.cell_measure = self.grid.h1 * self.grid.h2
        else:
            p1, p2 = parts
            self.grid = Grid2D(p1.T, p2.T, p1.n, p2.n)
            self.cell_measure = self.grid.h1 * self.grid.h2

    @property
    def d(self) -> int:
        return self.sgrid.d

    @property
    def is_path(self) -> bool:
        return self.kind == "path"

    # ------------------------------------------------------------------ helpers
    def _combos(self, lo, w_lo, w_hi):
        """List of (offset array (..., d), weight array or None) for every deposit corner."""
        if self.scheme == "nearest":
            return [(lo, None)]
        d = lo.shape[-1]
        out = []
        for corner in range(2 ** d):
            bits = [(corner >> k) & 1 for k in range(d)]
            off = lo + np.asarray(bits, dtype=np.int32)
            wt = None
            for k, b in enumerate(bits):
                wk = w_hi[..., k] if b else w_lo[..., k]
                wt = wk if wt is None else wt * wk
            out.append((off, wt))
        return out

    def _histogram(self, lo, w_lo, w_hi) -> np.ndarray:
        """Density from a set of cell deposits (already sliced)."""
        sg = self.sgrid
        shape = sg.shape
        hist = np.zeros(int(np.prod(shape)))
        scale = self.cell_measure / sg.h ** sg.d
        for off, wt in self._combos(lo, w_lo, w_hi):
            idx = off.reshape(-1, sg.d) + sg.origin
            flat = np.ravel_multi_index(tuple(idx.T), shape)
            w = None if wt is None else wt.reshape(-1)
            hist += np.bincount(flat, weights=w, minlength=hist.size)
        return (hist * scale).reshape(shape)

    def _path_index(self, t) -> int:
        k = int(round(t / self.cell_measure))
        if abs(k * self.cell_measure - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k <= 2 ** self.n:
            raise DomainError(f"t={t!r} is not a node of the time grid")
        return k

    # ------------------------------------------------------------------ densities
    def density(self, t) -> np.ndarray:
        """``L_t`` on the spatial bins."""
        if self.kind == "path":
            return self.increment(0.0, t)
        return self.increment((0.0, 0.0), t)

    def increment(self, s, t) -> np.ndarray:
        """``L_t - L_s`` for paths, ``box_{s,t} L`` for two-parameter times."""
        if self.kind == "path":
            a, b = self._path_index(float(s)), self._path_index(float(t))
            if b < a:
                raise DomainError("increment needs s <= t")
            sl = slice(a, b)
            return self._histogram(self.lo[sl], _sl(self.w_lo, sl), _sl(self.w_hi, sl))
        if s[0] > t[0] or s[1] > t[1]:
            raise DomainError(f"rectangle corners must satisfy s <= t, got {s}, {t}")
        if self.kind == "field":
            i0, j0 = self.grid.index(s)
            i1, j1 = self.grid.index(t)
            sl = (slice(i0, i1), slice(j0, j1))
            return self._histogram(self.lo[sl], _sl(self.w_lo, sl), _sl(self.w_hi, sl))
        p1, p2 = self.parts
        return convolve_densities(p1.increment(s[0], t[0]), p2.increment(s[1], t[1]), self.sgrid)

    def mass(self, t) -> float:
        return float(np.sum(self.density(t)) * self.sgrid.h ** self.d)

    def dense(self, stride: int = 1) -> np.ndarray:
        """
        Densities at the time nodes ``0, stride, 2 stride, ...``.

        Shape ``(B + 1, M^d...)`` for paths and ``(B1 + 1, B2 + 1, M^d...)``
        otherwise, where ``B = N / stride``.
        """
        sg = self.sgrid
        if self.kind == "path":
            N = 2 ** self.n
            B = _blocks(N, stride)
            out = np.zeros((B + 1,) + sg.shape)
            blk = np.repeat(np.arange(B), stride)
            out[1:] = self._block_hist(blk, B, self.lo, self.w_lo, self.w_hi).cumsum(axis=0)
            return out
        g = self.grid
        B1, B2 = _blocks(g.N1, stride), _blocks(g.N2, stride)
        size = (B1 + 1) * (B2 + 1) * int(np.prod(sg.shape))
        if size > DENSE_LIMIT:
            raise DomainError(f"dense local time with {size} entries exceeds the limit {DENSE_LIMIT}; increase stride")
        if self.kind == "product":
            p1, p2 = self.parts
            return convolve_densities(p1.dense(stride)[:, None], p2.dense(stride)[None, :], sg)
        blk = (np.repeat(np.arange(B1), stride)[:, None] * B2 + np.repeat(np.arange(B2), stride)[None, :])
        hist = self._block_hist(blk, B1 * B2, self.lo, self.w_lo, self.w_hi).reshape((B1, B2) + sg.shape)
        out = np.zeros((B1 + 1, B2 + 1) + sg.shape)
        out[1:, 1:] = hist.cumsum(axis=0).cumsum(axis=1)
        return out

    def _block_hist(self, blk, nblocks, lo, w_lo, w_hi):
        sg = self.sgrid
        nb = int(np.prod(sg.shape))
        hist = np.zeros(nblocks * nb)
        for off, wt in self._combos(lo, w_lo, w_hi):
            idx = off.reshape(-1, sg.d) + sg.origin
            flat = np.ravel_multi_index(tuple(idx.T), sg.shape) + blk.reshape(-1) * nb
            hist += np.bincount(flat, weights=None if wt is None else wt.reshape(-1), minlength=hist.size)
        return (hist * (self.cell_measure / sg.h ** sg.d)).reshape((nblocks,) + sg.shape)

    # ------------------------------------------------------------------ transforms
    def reflected(self) -> "LocalTime":
        """Local time of the negated path: the exact index reversal about 0."""
        if self.kind == "product":
            p1, p2 = self.parts
            return LocalTime("product", self.sgrid, self.scheme, -self.sign, parts=(p1.reflected(), p2.reflected()))
        time = (self.T, self.n) if self.kind == "path" else self.grid
        if self.scheme == "nearest":
            return LocalTime(self.kind, self.sgrid, self.scheme, -self.sign, lo=-self.lo, time=time)
        return LocalTime(self.kind, self.sgrid, self.scheme, -self.sign, lo=-self.lo - 1,
                         w_lo=self.w_hi, w_hi=self.w_lo, time=time)

    def cell_deposits(self, i0: int, i1: int, j0: int, j1: int):
        """Deposit (offsets, weights) of the time cells ``[i0, i1) x [j0, j1)``."""
        if self.kind == "field":
            sl = (slice(i0, i1), slice(j0, j1))
            return self._combos(self.lo[sl], _sl(self.w_lo, sl), _sl(self.w_hi, sl))
        if self.kind != "product":
            raise DomainError("cell deposits over rectangles need a two-parameter local time")
        p1, p2 = self.parts
        c1 = p1._combos(p1.lo[i0:i1], _sl(p1.w_lo, slice(i0, i1)), _sl(p1.w_hi, slice(i0, i1)))
        c2 = p2._combos(p2.lo[j0:j1], _sl(p2.w_lo, slice(j0, j1)), _sl(p2.w_hi, slice(j0, j1)))
        out = []
        for o1, w1 in c1:
            for o2, w2 in c2:
                off = o1[:, None, :] + o2[None, :, :]
                if w1 is None:
                    wt = None
                else:
                    wt = w1[:, None] * w2[None, :]
                out.append((off, wt))
        return out


def _sl(a, sl):
    return None if a is None else a[sl]


def _blocks(N: int, stride: int) -> int:
    if stride < 1 or N % stride:
        raise DomainError(f"stride {stride} must divide the number of time cells {N}")
    return N // stride


def convolve_densities(L1: np.ndarray, L2: np.ndarray, sgrid: SpatialGrid) -> np.ndarray:
    """
    ``(L1 * L2)(x) = int L1(y) L2(x - y) dy`` on the bin lattice, by zero-padded FFT.

    Operates on the trailing ``d`` axes; leading axes broadcast.  Bin ``k`` of the
    result collects index pairs with ``k1 + k2 - M/2 = k``.
    """
    d, M, o = sgrid.d, sgrid.bins, sgrid.origin
    axes = tuple(range(-d, 0))
    shape = (2 * M,) * d
    F = np.fft.rfftn(L1, s=shape, axes=axes) * np.fft.rfftn(L2, s=shape, axes=axes)
    full = np.fft.irfftn(F, s=shape, axes=axes)
    sl = (Ellipsis,) + (slice(o, o + M),) * d
    out = full[sl] * sgrid.h ** d
    return np.clip(out, 0.0, None) if np.all(L1 >= 0) and np.all(L2 >= 0) else out


def occupation_density(w, sgrid: SpatialGrid, *, negate: bool = False, scheme: str = DEFAULT_SCHEME) -> LocalTime:
    """
    Local time of ``w`` (or of ``-w`` when ``negate``) on ``sgrid``.

    ``w`` is a :class:`Path1D` (one time parameter) or a :class:`Field2D`.
    Raises :class:`DomainError` reporting the observed range when the values
    leave the box.
    """
    sign = -1.0 if negate else 1.0
    if w.d != sgrid.d:
        raise DomainError(f"path dimension {w.d} does not match spatial grid dimension {sgrid.d}")
    if isinstance(w, Path1D):
        lo, w_lo, w_hi = _deposit(w.values[:-1], sgrid, scheme, sign, "path values")
        return LocalTime("path", sgrid, scheme, -1 if negate else 1, lo=lo, w_lo=w_lo, w_hi=w_hi, time=(w.T, w.n))
    if isinstance(w, Field2D):
        lo, w_lo, w_hi = _deposit(w.values[:-1, :-1], sgrid, scheme, sign, "field values")
        return LocalTime("field", sgrid, scheme, -1 if negate else 1, lo=lo, w_lo=w_lo, w_hi=w_hi, time=w.grid)
    raise TypeError(f"expected Path1D or Field2D, got {type(w).__name__}")


def convolve_local_times(L1: LocalTime, L2: LocalTime) -> LocalTime:
    """
    Local time of ``beta1(t1) + beta2(t2)`` from the two path local times:
    ``L_t = L1_{t1} * L2_{t2}`` at every node, with the 2D mass identity.
    """
    if not (L1.is_path and L2.is_path):
        raise DomainError("convolve_local_times expects two path local times")
    if L1.sgrid != L2.sgrid:
        raise DomainError(f"spatial grids differ: {L1.sgrid} vs {L2.sgrid}")
    if L1.scheme != L2.scheme or L1.sign != L2.sign:
        raise DomainError("local times must share binning scheme and sign")
    lim = L1.sgrid.origin - 1
    ext = []
    for L in (L1, L2):
        top = L.lo + (0 if L.scheme == "nearest" else 1)
        ext.append((int(L.lo.min()), int(top.max())))
    if ext[0][0] + ext[1][0] < -lim or ext[0][1] + ext[1][1] > lim:
        h = L1.sgrid.h
        raise DomainError(f"sum of paths leaves the spatial box: offsets reach "
                          f"[{(ext[0][0] + ext[1][0]) * h:.6g}, {(ext[0][1] + ext[1][1]) * h:.6g}], "
                          f"admissible [{-lim * h:.6g}, {lim * h:.6g}]")
    return LocalTime("product", L1.sgrid, L1.scheme, L1.sign, parts=(L1, L2))


# ---------------------------------------------------------------------------
# averaged fields

class _Lattice:
    """Lazily extended samples of a drift profile on the lattice ``k h``."""

    PAD = 64

    def __init__(self, b: DriftSpec, h: float):
        self.b, self.h = b, h
        self.lo, self.hi = 0, -1
        self.values = np.zeros(0)

    def ensure(self, umin: float, umax: float):
        need_lo, need_hi = int(math.floor(umin)) - 2, int(math.ceil(umax)) + 3
        if need_lo >= self.lo and need_hi <= self.hi:
            return
        lo = min(need_lo, self.lo) - self.PAD if self.hi >= self.lo else need_lo - self.PAD
        hi = max(need_hi, self.hi) + self.PAD if self.hi >= self.lo else need_hi + self.PAD
        self.values = self.b.lattice_values(self.h, lo, hi)
        self.lo, self.hi = lo, hi

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if u.size == 0:
            return np.zeros_like(u)
        self.ensure(float(np.min(u)), float(np.max(u)))
        return keys_interpolate(self.values, -self.lo, u)


class AveragedField(TimeIndexedField):
    """
    ``A(t, x) = scale * (b * L_t)(x)`` for a two-parameter local time ``L``.

    Cell increments are ``scale * |cell| * sum_k w_k b~(x - m_k h)`` over the
    cell's deposits ``(m_k, w_k)``, with ``b~`` the Keys cubic interpolant of the
    lattice samples ``b(j h)``.  At lattice points this is the discrete
    convolution of ``b`` with the histogram; off the lattice it equals cubic
    interpolation of that convolution, since cardinal interpolation commutes
    with lattice shifts.
    """

    def __init__(self, b: DriftSpec, L: LocalTime, scale: float = 1.0):
        if L.is_path:
            raise DomainError("averaged fields need a two-parameter local time")
        if b.d != L.d:
            raise DomainError(f"drift dimension {b.d} does not match local time dimension {L.d}")
        self.b, self.L, self.scale = b, L, float(scale)
        self.d, self.grid = L.d, L.grid
        self.exponents = None
        self._lattice = _Lattice(b, L.sgrid.h)

    def _node_indices(self, t, N, h, name):
        t = np.asarray(t, dtype=float)
        k = np.rint(t / h).astype(np.int64)
        if np.any(np.abs(k * h - t) > 1e-9 * np.maximum(1.0, np.abs(t))) or k.min() < 0 or k.max() > N:
            raise DomainError(f"{name} partition nodes must be nodes of the time grid")
        return k

    def cell_values(self, x_fine: np.ndarray, i0: int, i1: int, j0: int, j1: int) -> np.ndarray:
        """Increments over the grid cells ``[i0,i1) x [j0,j1)``, each at its own point."""
        h = self.L.sgrid.h
        out = np.zeros(x_fine.shape)
        if self.b.is_constant:
            out[...] = self.b.params["value"]
        else:
            for off, wt in self.L.cell_deposits(i0, i1, j0, j1):
                for c in range(self.d):
                    v = self._lattice(x_fine[..., c] / h - off[..., c])
                    out[..., c] += v if wt is None else wt * v
        return out * (self.scale * self.L.cell_measure)

    def partition_increments(self, t1_nodes, t2_nodes, x):
        t1, t2, x = _check_partition(t1_nodes, t2_nodes, x, self.d)
        g = self.grid
        I = self._node_indices(t1, g.N1, g.h1, "t1")
        J = self._node_indices(t2, g.N2, g.h2, "t2")
        c1, c2 = np.diff(I), np.diff(J)
        i0, i1, j0, j1 = int(I[0]), int(I[-1]), int(J[0]), int(J[-1])
        if np.all(c1 == 1) and np.all(c2 == 1):
            return self.cell_values(x, i0, i1, j0, j1)
        xf = np.repeat(np.repeat(x, c1, axis=0), c2, axis=1)
        fine = self.cell_values(xf, i0, i1, j0, j1)
        C = np.zeros((fine.shape[0] + 1, fine.shape[1] + 1, self.d))
        C[1:, 1:] = fine.cumsum(axis=0).cumsum(axis=1)
        a, b = I - i0, J - j0
        return C[a[1:, None], b[None, 1:]] - C[a[1:, None], b[None, :-1]] - C[a[:-1, None], b[None, 1:]] \
            + C[a[:-1, None], b[None, :-1]]

    def dense(self, stride: int = 1) -> np.ndarray:
        """``A`` at the time sub-lattice and every bin centre by zero-padded FFT (``d = 1``)."""
        if self.d != 1:
            raise DomainError("dense evaluation is implemented for d = 1")
        sg = self.L.sgrid
        M = sg.bins
        dens = self.L.dense(stride)
        kern = self.b.lattice_values(sg.h, -(M - 1), M - 1)
        full = fftconvolve(dens, np.broadcast_to(kern, (1,) * (dens.ndim - 1) + kern.shape), axes=-1)
        return self.scale * sg.h * full[..., M - 1:2 * M - 1]


def averaged_field_convolved(b: DriftSpec, L: LocalTime, *, reflect: bool = True,
                             scale: float = 1.0) -> AveragedField:
    """
    ``A(t, x) = (b * L^{-w}_t)(x)``.

    With ``reflect=True`` the argument is the local time of ``w`` and is
    reflected here; with ``reflect=False`` it must already be ``L^{-w}``.
    """
    return AveragedField(b, L.reflected() if reflect else L, scale)


def averaged_field_direct(b: DriftSpec, w: Field2D, x_points, stride: int = 1) -> np.ndarray:
    """
    ``T^w b(t, x) = int_0^t b(x + w_r) dr`` at the time nodes ``0, stride, ...``
    for each ``x`` in ``x_points``.

    Riemann sum with each grid cell evaluated at its lower-left node (the same
    quadrature the local time estimator uses).  Returns an array of shape
    ``(len(x_points), B1 + 1, B2 + 1, d)``.
    """
    xs = np.asarray(x_points, dtype=float).reshape(-1, w.d)
    g = w.grid
    B1, B2 = _blocks(g.N1, stride), _blocks(g.N2, stride)
    base = w.values[:-1, :-1]
    out = np.zeros((xs.shape[0], B1 + 1, B2 + 1, w.d))
    area = g.h1 * g.h2
    for k, x in enumerate(xs):
        vals = b.scalar(base + x) * area
        C = vals.cumsum(axis=0).cumsum(axis=1)
        out[k, 1:, 1:] = C[stride - 1::stride, stride - 1::stride]
    return out


# ---------------------------------------------------------------------------
# Bessel potential norms and regularity scans

def sobolev_norm(density: np.ndarray, sgrid: SpatialGrid, lam: float) -> float:
    """
    ``(2 pi)^{-d/2} (sum_z |F(z)|^2 (1 + |z|^2)^lam dz^d)^{1/2}`` with ``F`` the
    DFT approximation of the Fourier transform and frequencies up to Nyquist.
    At ``lam = 0`` this is the discrete L2 norm exactly (Parseval).
    """
    if abs(lam) > sgrid.lambda_max:
        raise DomainError(f"lambda={lam} outside the resolvable band |lambda| <= {sgrid.lambda_max:g} "
                          f"for {sgrid.bins} bins")
    d, h, M = sgrid.d, sgrid.h, sgrid.bins
    F = np.fft.fftn(density) * h ** d
    z = 2 * np.pi * np.fft.fftfreq(M, d=h)
    zz = np.zeros(F.shape)
    for k in range(d):
        sh = [1] * d
        sh[k] = M
        zz = zz + z.reshape(sh) ** 2
    dz = 2 * np.pi / (M * h)
    s = np.sum(np.abs(F) ** 2 * (1 + zz) ** lam) * dz ** d / (2 * np.pi) ** d
    return float(math.sqrt(max(s, 0.0)))


def sobolev_norm_increment(L: LocalTime, s, t, lam: float) -> float:
    """``||box_{s,t} L||_{H^lam}`` (``L_t - L_s`` for path local times)."""
    if abs(lam) > L.sgrid.lambda_max:
        raise DomainError(f"lambda={lam} outside the resolvable band |lambda| <= {L.sgrid.lambda_max:g} "
                          f"for {L.sgrid.bins} bins")
    if L.is_path:
        if float(s) == float(t):
            return 0.0
    elif s[0] == t[0] or s[1] == t[1]:
        return 0.0
    return sobolev_norm(L.increment(s, t), L.sgrid, lam)


@dataclass(frozen=True)
class RegularityRow:
    lam: float
    gamma1_hat: float
    gamma1_se: float
    gamma1_floor: float
    gamma2_hat: float
    gamma2_se: float
    gamma2_floor: float
    above_bound: bool
    seeds: int

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "gamma1_hat": self.gamma1_hat, "gamma1_se": self.gamma1_se,
                "gamma1_floor": self.gamma1_floor, "gamma2_hat": self.gamma2_hat,
                "gamma2_se": self.gamma2_se, "gamma2_floor": self.gamma2_floor,
                "above_bound": self.above_bound, "seeds": self.seeds}


def _slope(tau: np.ndarray, norms: np.ndarray) -> float:
    ok = norms > 0
    if ok.sum() < 3:
        return float("nan")
    return float(np.polyfit(np.log(tau[ok]), np.log(norms[ok]), 1)[0])


def regularity_scan(spec, lambdas: Sequence[float], seeds: int = 100, *, base_seed: int = 0,
                    bins: int = 256, levels: Sequence[int] | None = None,
                    scheme: str = DEFAULT_SCHEME) -> list[RegularityRow]:
    """
    Monte Carlo time-regularity exponents of local-time increments.

    ``spec`` is a :class:`SheetSpec`, a pair of :class:`FbmSpec` (the sum field
    ``beta1(t1) + beta2(t2)``) or a single :class:`FbmSpec` (path local time).
    For each replicate and each ``lam`` the exponent along axis ``i`` is the
    least-squares slope of ``log ||box_{0,(tau, T2)} L||_{H^lam}`` (resp. the
    second axis) against ``log tau`` over ``tau = T_i 2^{-l}``, ``l`` in
    ``levels``.  Rows report the mean, its standard error and the floor
    ``1 - (lam + d/2) H_i``.  Orders at or above ``1/(2 max H) - d/2`` trigger a
    warning, not an error.
    """
    if int(seeds) < 10:
        raise ConfigurationError(f"regularity_scan needs at least 10 seeds, got {seeds}")
    lambdas = [float(l) for l in lambdas]
    if isinstance(spec, SheetSpec):
        kind, H, n, d = "sheet", (spec.H1, spec.H2), min(spec.grid.n1, spec.grid.n2), spec.d
        T = (spec.grid.T1, spec.grid.T2)
    elif isinstance(spec, FbmSpec):
        kind, H, n, d, T = "path", (spec.H, spec.H), spec.n, spec.d, (spec.T, spec.T)
    else:
        s1, s2 = spec
        if s1.d != s2.d:
            raise ConfigurationError("the two fBm specs must share the dimension")
        kind, H, n, d, T = "sum", (s1.H, s2.H), min(s1.n, s2.n), s1.d, (s1.T, s2.T)
    if levels is None:
        levels = list(range(1, max(4, n - 3)))
    levels = [int(l) for l in levels]
    if len(levels) < 3 or max(levels) > n:
        raise ConfigurationError(f"need >= 3 levels within the grid resolution, got {levels}")
    bound = 1.0 / (2 * max(H)) - d / 2.0
    for lam in lambdas:
        if lam >= bound:
            warnings.warn(f"lambda={lam} is at or above the regularity bound {bound:g}; "
                          "reporting measured exponents only", stacklevel=2)

    taus = [np.array([T[i] * 2.0 ** -l for l in levels]) for i in range(2)]
    slopes = np.zeros((len(lambdas), 2, int(seeds)))
    for r in range(int(seeds)):
        if kind == "sheet":
            w = sample_sheet(SheetSpec(spec.H1, spec.H2, spec.grid, spec.d, derive_seed(spec.seed ^ base_seed, "sheet", r)))
            sg = SpatialGrid.auto(w.values, bins, sigma=terminal_std(spec), d=d)
            L = occupation_density(w, sg, scheme=scheme)
            incs = [[L.increment((0.0, 0.0), (tau, T[1])) for tau in taus[0]],
                    [L.increment((0.0, 0.0), (T[0], tau)) for tau in taus[1]]]
        elif kind == "path":
            p = sample_fbm(FbmSpec(spec.H, spec.T, spec.n, spec.d, derive_seed(spec.seed ^ base_seed, "fbm", r)))
            sg = SpatialGrid.auto(p.values, bins, sigma=terminal_std(spec), d=d)
            L = occupation_density(p, sg, scheme=scheme)
            incs = [[L.increment(0.0, tau) for tau in taus[0]]] * 2
        else:
            b1 = sample_fbm(FbmSpec(s1.H, s1.T, s1.n, d, derive_seed(s1.seed ^ base_seed, "beta1", r)))
            b2 = sample_fbm(FbmSpec(s2.H, s2.T, s2.n, d, derive_seed(s2.seed ^ base_seed, "beta2", r)))
            span = np.max(np.abs(b1.values)) + np.max(np.abs(b2.values))
            sg = SpatialGrid.auto(np.array([span]), bins, sigma=math.hypot(terminal_std(s1), terminal_std(s2)), d=d)
            L1, L2 = occupation_density(b1, sg, scheme=scheme), occupation_density(b2, sg, scheme=scheme)
            full1, full2 = L1.density(T[0]), L2.density(T[1])
            incs = [[convolve_densities(L1.density(tau), full2, sg) for tau in taus[0]],
                    [convolve_densities(full1, L2.density(tau), sg) for tau in taus[1]]]
        for a, lam in enumerate(lambdas):
            for i in range(2):
                norms = np.array([sobolev_norm(x, sg, lam) for x in incs[i]])
                slopes[a, i, r] = _slope(taus[i], norms)
    rows = []
    for a, lam in enumerate(lambdas):
        g = slopes[a]
        mean = np.nanmean(g, axis=1)
        se = np.nanstd(g, axis=1, ddof=1) / np.sqrt(np.sum(np.isfinite(g), axis=1))
        floors = [1.0 - (lam + d / 2.0) * H[i] for i in range(2)]
        rows.append(RegularityRow(lam, float(mean[0]), float(se[0]), floors[0],
                                  float(mean[1]), float(se[1]), floors[1], lam >= bound, int(seeds)))
    return rows
