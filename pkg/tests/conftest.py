"""Shared fixtures and independent reference oracles."""
import math

import numpy as np
import pytest

from nly2d.grid_field import Grid2D, Path1D
from nly2d.noise import FbmSpec, sample_fbm, sum_field


def riemann_picard(b, w, xi_field):
    """
    Classical left-point marching for ``x = xi + w + int_0^t b(x_s) ds``.

    Row by row: row ``i`` adds the integral over the cells of row ``i - 1``
    evaluated at their lower-left node values, which are already final.
    """
    g = w.grid
    area = g.h1 * g.h2
    base = xi_field.values[..., 0] + w.values[..., 0]
    x = base.copy()
    acc = np.zeros(g.N2 + 1)
    for i in range(1, g.N1 + 1):
        inc = np.concatenate([[0.0], np.cumsum(b.scalar(x[i - 1, :-1]) * area)])
        acc = acc + inc
        x[i] = base[i] + acc
    return x


def goursat_marching(h, bb1, bb2, coupling, level, T=1.0):
    """
    Second-order characteristic marching for ``phi_{t1 t2} = coupling * h(phi)``
    with ``phi(t1, 0) = bb1(t1)`` and ``phi(0, t2) = bb2(t2)``, swept along
    anti-diagonals.  The source is evaluated at the mean of the two known
    neighbours, which is the cell centre to second order.
    """
    N = 2 ** level
    dt = T / N
    t = np.arange(N + 1) * dt
    p = np.full((N + 1, N + 1), np.nan)
    p[:, 0] = bb1(t)
    p[0, :] = bb2(t)
    f = dt * dt * coupling
    for d in range(2, 2 * N + 1):
        i = np.arange(max(1, d - N), min(N, d - 1) + 1)
        j = d - i
        a, b = p[i, j - 1], p[i - 1, j]
        p[i, j] = a + b - p[i - 1, j - 1] + f * h.scalar(0.5 * (a + b))
    return p


def linear_goursat_series(lam, T1, T2, terms=30):
    """``sum_k (lam t1 t2)^k / (k!)^2``."""
    z = lam * T1 * T2
    return sum(z ** k / math.factorial(k) ** 2 for k in range(terms))


def midpoint_integral(func, level, rows=256):
    """Tensor midpoint rule on ``[0,1]^2`` with ``2**level`` cells per axis, in row blocks."""
    n = 2 ** level
    c = (np.arange(n) + 0.5) / n
    total = math.fsum(float(np.sum(func(c[k:k + rows, None], c[None, :]))) for k in range(0, n, rows))
    return total / n ** 2


@pytest.fixture(scope="session")
def fbm_sum_level9():
    b1 = sample_fbm(FbmSpec(0.5, 1.0, 9, seed=101))
    b2 = sample_fbm(FbmSpec(0.5, 1.0, 9, seed=202))
    return sum_field(b1, b2), (b1, b2)


@pytest.fixture
def unit_grid():
    return Grid2D.square(1.0, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def affine_path(T, n, c0, slope):
    return Path1D.from_function(T, n, lambda t: c0 + slope * t)


# Small configurations for every subcommand, fast enough for repeated runs.
SMALL_CONFIGS = {
    "sample-field": """
[run]
seed = 7
[grid]
level = 6
[noise]
kind = fbm_sum
H1 = 0.5
H2 = 0.3
""",
    "local-time": """
[run]
seed = 7
[grid]
level = 6
[noise]
kind = sheet
H1 = 0.5
H2 = 0.5
[local_time]
bins = 32
time_level = 2
""",
    "averaged-field": """
[grid]
level = 6
[noise]
kind = fbm_sum
H1 = 0.5
H2 = 0.5
[drift]
name = sine
[averaged]
bins = 64
x = -0.5, 0, 0.5
time_level = 2
""",
    "sew-demo": """
[sew]
germ = planted
beta = 1.2, 1.8
max_level = 7
""",
    "solve-nly": """
[grid]
level = 6
[field]
kind = linear
lam = 1.0
[boundary]
xi = 1.0
[solver]
richardson = 2
""",
    "solve-sde": """
[run]
seed = 11
[grid]
level = 6
[noise]
kind = fbm_sum
H1 = 0.5
H2 = 0.5
[drift]
name = gaussian
width = 0.5
[boundary]
xi = 0.3
[solver]
bins = 64
""",
    "regularity-scan": """
[run]
seed = 5
[grid]
level = 7
[noise]
kind = fbm_sum
H1 = 0.5
H2 = 0.5
[scan]
lambdas = 0, 0.25
seeds = 10
bins = 64
""",
    "solve-wave": """
[run]
seed = 2
[drift]
name = sine
[wave]
level = 6
boundary = affine
corner = 0.1
slope1 = 0.5
slope2 = -0.3
bins = 64
""",
    "mollify-study": """
[run]
seed = 4
[grid]
level = 6
[noise]
kind = fbm_sum
H1 = 0.25
H2 = 0.25
[drift]
name = indicator
[study]
eps = 0.25, 0.125, 0.0625
compare_mollifier = triangular
bins = 64
""",
    "check-conditions": """
[conditions]
which = fbm_sum
d = 1
H1 = 0.25
H2 = 0.25
zeta = 0.5
""",
}


def data_files(out):
    """Relative names and bytes of every data file in an output directory."""
    from pathlib import Path
    out = Path(out)
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}
