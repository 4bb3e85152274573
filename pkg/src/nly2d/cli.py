"""
Config-driven command-line harness.

    nly2d <subcommand> --config FILE [--out DIR] [--seed U64] [--threads N]

The config is INI text (sections of ``key = value``).  Every subcommand reads
all of its parameters and builds its inputs before computing anything, writes
CSV/JSON/binary data files into the output directory and finishes with an
atomically written ``manifest.json``.  Exit codes: 0 success, 2 invalid
configuration or inputs, 3 numerical failure, 4 I/O failure, 1 anything else.
Failures print a JSON error object on stdout.
"""
from __future__ import annotations

import argparse
import configparser
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .drift import DriftSpec
from .errors import ConfigurationError, DomainError, NumericalError
from .grid_field import Field2D, Grid2D, Path1D
from .io import atomic_write_text, dumps, save_field, save_field_csv, sha256_file, write_csv, write_json
from .noise import FbmSpec, SheetSpec, derive_seed, sample_fbm, sample_sheet, sum_field
from .occupation import (DEFAULT_SCHEME, SCHEMES, SpatialGrid, averaged_field_convolved, averaged_field_direct,
                         convolve_local_times, occupation_density, regularity_scan)
from .sewing import Germ, nly_integral, sew
from .solver import (BoundaryData, RegularityParams, check_conditions, mollification_study, picard_solve,
                     solve_regularized_sde)
from .timefield import linear_goursat_field, product_field, separable_field
from .wave import SQRT2, WAVE_SCHEME, WaveProblem, solve_wave, wave_mollification_study, wave_residual

EXIT_OK, EXIT_OTHER, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
CSV_MAX_SIDE = 257
_REQUIRED = object()


class ConfigKeyError(ConfigurationError):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


class Config:
    """Typed access to an INI config; errors name the offending ``section.key``."""

    def __init__(self, parser: configparser.ConfigParser, source: str = "<string>"):
        self.parser, self.source = parser, source

    @classmethod
    def from_file(cls, path) -> "Config":
        p = configparser.ConfigParser(interpolation=None)
        with open(path, encoding="utf-8") as fh:
            p.read_file(fh, source=str(path))
        return cls(p, str(path))

    @classmethod
    def from_string(cls, text: str) -> "Config":
        p = configparser.ConfigParser(interpolation=None)
        p.read_string(text)
        return cls(p)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section, key, default=_REQUIRED):
        if not self.parser.has_option(section, key):
            if default is _REQUIRED:
                raise ConfigKeyError(f"{section}.{key}", f"missing required key [{section}] {key}")
            return default
        return self.parser.get(section, key).strip()

    def get(self, section, key, conv: Callable = str, default=_REQUIRED, choices=None):
        v = self.raw(section, key, default)
        if v is default and default is not _REQUIRED:
            return default
        try:
            out = conv(v)
        except (TypeError, ValueError) as exc:
            raise ConfigKeyError(f"{section}.{key}", f"[{section}] {key} = {v!r}: {exc}") from None
        if choices is not None and out not in choices:
            raise ConfigKeyError(f"{section}.{key}", f"[{section}] {key} = {v!r} is not one of {list(choices)}")
        return out

    def floats(self, section, key, default=_REQUIRED) -> list[float]:
        return self.get(section, key, _float_list, default)

    def section(self, name: str) -> dict:
        return dict(self.parser.items(name)) if self.parser.has_section(name) else {}

    def as_dict(self) -> dict:
        return {s: dict(self.parser.items(s)) for s in sorted(self.parser.sections())}


def _float(v) -> float:
    s = str(v).strip().lower()
    if s in ("inf", "+inf", "infinity"):
        return math.inf
    if s in ("-inf", "-infinity"):
        return -math.inf
    return float(s)


def _float_list(v) -> list[float]:
    parts = [p for p in str(v).replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return [_float(p) for p in parts]


class Run:
    """Output directory, seed and the list of emitted data files."""

    def __init__(self, subcommand: str, cfg: Config, out: Path, seed: int, threads: int):
        self.subcommand, self.cfg, self.out, self.seed, self.threads = subcommand, cfg, out, seed, threads
        self.files: list[str] = []

    def sub_seed(self, tag: str, replicate: int = 0) -> int:
        return derive_seed(self.seed, f"{self.subcommand}/{tag}", replicate)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def csv(self, name, header, rows):
        write_csv(self.path(name), header, rows)

    def json(self, name, obj):
        write_json(self.path(name), obj)

    def field(self, name: str, f: Field2D, with_csv: bool = True):
        save_field(f, self.path(name + ".bin"))
        if with_csv:
            stride = max(1, -(-max(f.grid.N1, f.grid.N2) // (CSV_MAX_SIDE - 1)))
            save_field_csv(f, self.path(name + ".csv"), stride)


# ---------------------------------------------------------------------------
# input builders

def _grid(cfg: Config) -> Grid2D:
    T = cfg.get("grid", "T", _float, 1.0)
    level = cfg.get("grid", "level", int)
    if level < 1 or level > 14:
        raise ConfigKeyError("grid.level", f"[grid] level must lie in 1..14, got {level}")
    return Grid2D.square(T, level)


def _noise(cfg: Config, run: Run, grid: Grid2D, kinds=("fbm_sum", "sheet")):
    kind = cfg.get("noise", "kind", str, choices=kinds)
    if kind == "fbm":
        H = cfg.get("noise", "H", _float)
        return kind, sample_fbm(FbmSpec(H, grid.T1, grid.n1, 1, run.sub_seed("fbm"))), None
    H1, H2 = cfg.get("noise", "H1", _float), cfg.get("noise", "H2", _float)
    if kind == "sheet":
        return kind, sample_sheet(SheetSpec(H1, H2, grid, 1, run.sub_seed("sheet"))), None
    b1 = sample_fbm(FbmSpec(H1, grid.T1, grid.n1, 1, run.sub_seed("beta1")))
    b2 = sample_fbm(FbmSpec(H2, grid.T2, grid.n2, 1, run.sub_seed("beta2")))
    return kind, sum_field(b1, b2), (b1, b2)


def _drift(cfg: Config, section: str = "drift") -> DriftSpec:
    name = cfg.get(section, "name", str)
    params = {k: _float(v) for k, v in cfg.section(section).items() if k not in ("name", "eps", "mollifier")}
    b = DriftSpec.catalog(name, **params)
    if cfg.has(section, "eps"):
        b = b.mollified(cfg.get(section, "eps", _float), cfg.get(section, "mollifier", str, "gaussian"))
    return b


def _bins_scheme(cfg: Config, section: str, default_scheme: str = DEFAULT_SCHEME):
    bins = cfg.get(section, "bins", int, 256)
    if bins < 8 or bins & (bins - 1):
        raise ConfigKeyError(f"{section}.bins", f"[{section}] bins must be a power of two >= 8, got {bins}")
    return bins, cfg.get(section, "scheme", str, default_scheme, choices=SCHEMES)


def _solver_opts(cfg: Config) -> dict:
    return {"tol": cfg.get("solver", "tol", _float, 1e-9), "max_iter": cfg.get("solver", "max_iter", int, 50),
            "richardson": cfg.get("solver", "richardson", int, 0)}


def _boundary(cfg: Config, grid: Grid2D) -> BoundaryData:
    return BoundaryData.constant(grid, cfg.get("boundary", "xi", _float, 0.0))


def _time_stride(cfg: Config, section: str, grid: Grid2D) -> int:
    tl = cfg.get(section, "time_level", int, min(3, grid.n1))
    if not 0 <= tl <= grid.n1:
        raise ConfigKeyError(f"{section}.time_level", f"[{section}] time_level must lie in 0..{grid.n1}")
    return 2 ** (grid.n1 - tl)


def _iteration_rows(report):
    return [(r["window_i"], r["window_j"], r["iterations"], r["residual"]) for r in report.iteration_log]


# ---------------------------------------------------------------------------
# plot data

PLOT_KINDS = ("regularity", "convergence", "wave", "cauchy", "iterations", "heatmap")


def emit_plotdata(result, kind: str, run: Run, name: str | None = None):
    """Tidy long-format CSV for plotting."""
    if kind not in PLOT_KINDS:
        raise ConfigurationError(f"unknown plot-data kind {kind!r}; choose from {PLOT_KINDS}")
    name = name or f"plot_{kind}.csv"
    if kind == "regularity":
        rows = []
        for r in result:
            rows.append((r.lam, 1, r.gamma1_hat, r.gamma1_se, r.gamma1_floor))
            rows.append((r.lam, 2, r.gamma2_hat, r.gamma2_se, r.gamma2_floor))
        run.csv(name, ["lambda", "axis", "gamma_hat", "gamma_se", "gamma_floor"], rows)
    elif kind == "convergence":
        t = result.table()
        run.csv(name, ["level", "diff_norm", "observed_order"], [(r["level"], r["diff_norm"], r["observed_order"]) for r in t])
    elif kind == "wave":
        side = result.u.shape[0]
        s = max(1, -(-(side - 1) // (CSV_MAX_SIDE - 1)))
        run.csv(name, ["x", "y", "u"], zip(result.x[::s, ::s].ravel(), result.y[::s, ::s].ravel(),
                                           result.u[::s, ::s].ravel()))
    elif kind == "cauchy":
        run.csv(name, ["eps", "sup_distance_to_previous", "ratio", "error"],
                [(r["eps"], r["sup_distance_to_previous"], r["ratio"], r["error"]) for r in result.rows()])
    elif kind == "iterations":
        run.csv(name, ["window_i", "window_j", "iterations", "residual"], _iteration_rows(result))
    else:
        f = result
        s = max(1, -(-max(f.grid.N1, f.grid.N2) // (CSV_MAX_SIDE - 1)))
        save_field_csv(f, run.path(name), s)


# ---------------------------------------------------------------------------
# subcommands

def cmd_sample_field(cfg: Config, run: Run):
    grid = _grid(cfg)
    kind, w, parts = _noise(cfg, run, grid, ("fbm_sum", "sheet", "fbm"))
    if kind == "fbm":
        run.csv("path.csv", ["t", "v_1"], zip(w.nodes, w.values[:, 0]))
        return {"kind": kind, "max_abs": float(np.max(np.abs(w.values)))}
    run.field("field", w)
    if parts:
        for k, p in enumerate(parts, 1):
            run.csv(f"beta{k}.csv", ["t", "v_1"], zip(p.nodes, p.values[:, 0]))
    return {"kind": kind, "max_abs": float(np.max(np.abs(w.values)))}


def cmd_local_time(cfg: Config, run: Run):
    grid = _grid(cfg)
    bins, scheme = _bins_scheme(cfg, "local_time")
    stride = _time_stride(cfg, "local_time", grid)
    kind, w, parts = _noise(cfg, run, grid, ("fbm_sum", "sheet", "fbm"))
    if kind == "fbm":
        sg = SpatialGrid.auto(w.values, bins)
        L = occupation_density(w, sg, scheme=scheme)
        dens = L.dense(stride)
        t = w.nodes[::stride]
        run.csv("local_time.csv", ["t", "x", "value"],
                ((t[i], x, dens[i, k]) for i in range(len(t)) for k, x in enumerate(sg.centers)))
    else:
        if parts:
            span = float(np.max(np.abs(parts[0].values)) + np.max(np.abs(parts[1].values)))
            sg = SpatialGrid.auto(np.array([span]), bins)
            L = convolve_local_times(occupation_density(parts[0], sg, scheme=scheme),
                                     occupation_density(parts[1], sg, scheme=scheme))
        else:
            sg = SpatialGrid.auto(w.values, bins)
            L = occupation_density(w, sg, scheme=scheme)
        dens = L.dense(stride)
        t1, t2 = grid.t1[::stride], grid.t2[::stride]
        run.csv("local_time.csv", ["t1", "t2", "x", "value"],
                ((t1[i], t2[j], x, dens[i, j, k]) for i in range(len(t1)) for j in range(len(t2))
                 for k, x in enumerate(sg.centers)))
    return {"kind": kind, "bins": bins, "scheme": scheme, "bin_width": sg.h, "half_width": sg.half_width,
            "terminal_mass": float(np.sum(dens[-1] if kind == "fbm" else dens[-1, -1]) * sg.h)}


def cmd_averaged_field(cfg: Config, run: Run):
    grid = _grid(cfg)
    bins, scheme = _bins_scheme(cfg, "averaged")
    stride = _time_stride(cfg, "averaged", grid)
    xs = cfg.floats("averaged", "x", [-1.0, -0.5, 0.0, 0.5, 1.0])
    b = _drift(cfg)
    kind, w, parts = _noise(cfg, run, grid)
    sg = SpatialGrid.auto(w.values, bins)
    A = averaged_field_convolved(b, occupation_density(w, sg, scheme=scheme))
    direct = averaged_field_direct(b, w, xs, stride)
    conv = np.stack([A.values(x, grid, stride) for x in xs])
    t1, t2 = grid.t1[::stride], grid.t2[::stride]
    rows = [(x, t1[i], t2[j], direct[k, i, j, 0], conv[k, i, j, 0], abs(direct[k, i, j, 0] - conv[k, i, j, 0]))
            for k, x in enumerate(xs) for i in range(len(t1)) for j in range(len(t2))]
    run.csv("averaged_field.csv", ["x", "t1", "t2", "direct", "convolved", "abs_diff"], rows)
    return {"kind": kind, "bins": bins, "scheme": scheme, "max_abs_diff": float(np.max(np.abs(direct - conv)))}


def cmd_sew_demo(cfg: Config, run: Run):
    germ_kind = cfg.get("sew", "germ", str, "planted", choices=("planted", "nly"))
    max_level = cfg.get("sew", "max_level", int, 12)
    if germ_kind == "planted":
        beta = cfg.floats("sew", "beta", [1.5, 1.5])
        if len(beta) != 2 or min(beta) <= 1:
            raise ConfigKeyError("sew.beta", "[sew] beta needs two exponents above 1")
        res = sew(Germ.planted(tuple(beta)), max_level=max_level)
    else:
        grid = Grid2D.square(1.0, cfg.get("sew", "level", int, 10))
        b = _drift(cfg)
        y = Field2D.from_function(grid, lambda t1, t2: np.sin(3 * t1) * np.cos(2 * t2) + t1 * t2)
        res = nly_integral(separable_field(b.scalar), y, max_level=min(max_level, grid.n1))
    emit_plotdata(res, "convergence", run, "convergence.csv")
    return {"germ": germ_kind, "value": res.value, "raw_value": res.raw_value, "observed_order": res.observed_order,
            "converged": res.converged, "extrapolation": res.extrapolation, "fitted_constant": res.fitted_constant}


def cmd_solve_nly(cfg: Config, run: Run):
    grid = _grid(cfg)
    kind = cfg.get("field", "kind", str, "linear", choices=("linear", "product"))
    if kind == "linear":
        A = linear_goursat_field(cfg.get("field", "lam", _float, 1.0))
    else:
        A = product_field(cfg.get("field", "c", _float, 1.0))
    xi = _boundary(cfg, grid)
    opts = _solver_opts(cfg)
    rep = picard_solve(A, xi, grid, init_offset=cfg.get("solver", "init_offset", _float, 0.0), **opts)
    run.field("theta", rep.theta)
    emit_plotdata(rep, "iterations", run, "iteration_log.csv")
    return {"field": kind, "residual": rep.residual, "windows": rep.windows, "halvings": rep.halvings,
            "richardson": rep.richardson, "theta_T": rep.theta.values[-1, -1]}


def cmd_solve_sde(cfg: Config, run: Run):
    grid = _grid(cfg)
    bins, scheme = _bins_scheme(cfg, "solver")
    b = _drift(cfg)
    xi = _boundary(cfg, grid)
    opts = _solver_opts(cfg)
    kind, w, _ = _noise(cfg, run, grid)
    x, rep = solve_regularized_sde(b, w, xi, bins=bins, scheme=scheme, **opts)
    run.field("x", x)
    run.field("theta", rep.theta, with_csv=False)
    emit_plotdata(rep, "iterations", run, "iteration_log.csv")
    return {"noise": kind, "residual": rep.residual, "windows": rep.windows, "halvings": rep.halvings,
            "bins": bins, "scheme": scheme, "half_width": rep.sgrid.half_width}


def cmd_regularity_scan(cfg: Config, run: Run):
    grid = _grid(cfg)
    kind = cfg.get("noise", "kind", str, choices=("fbm_sum", "sheet", "fbm"))
    lambdas = cfg.floats("scan", "lambdas", [0.0, 0.25])
    seeds = cfg.get("scan", "seeds", int, 100)
    bins, scheme = _bins_scheme(cfg, "scan")
    levels = cfg.get("scan", "levels", lambda v: [int(p) for p in _float_list(v)], None)
    base = run.sub_seed("scan")
    if kind == "fbm":
        spec = FbmSpec(cfg.get("noise", "H", _float), grid.T1, grid.n1, 1, base)
    elif kind == "sheet":
        spec = SheetSpec(cfg.get("noise", "H1", _float), cfg.get("noise", "H2", _float), grid, 1, base)
    else:
        spec = (FbmSpec(cfg.get("noise", "H1", _float), grid.T1, grid.n1, 1, base),
                FbmSpec(cfg.get("noise", "H2", _float), grid.T2, grid.n2, 1, base))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rows = regularity_scan(spec, lambdas, seeds, bins=bins, levels=levels, scheme=scheme)
    run.csv("regularity.csv", ["lambda", "gamma1_hat", "gamma1_se", "gamma1_floor", "gamma2_hat", "gamma2_se",
                               "gamma2_floor", "above_bound", "seeds"],
            [tuple(r.as_dict().values()) for r in rows])
    emit_plotdata(rows, "regularity", run, "plot_regularity.csv")
    return {"noise": kind, "seeds": seeds, "warnings": sorted({str(w.message) for w in caught}),
            "one_sided_pass": all(r.gamma1_hat >= r.gamma1_floor - 0.1 and r.gamma2_hat >= r.gamma2_floor - 0.1
                                  for r in rows)}


def _wave_problem(cfg: Config, run: Run, h: DriftSpec) -> tuple[WaveProblem, int, str]:
    T = cfg.get("wave", "T", _float, 1.0)
    level = cfg.get("wave", "level", int, 9)
    coupling = cfg.get("wave", "coupling", _float, -2.0)
    kind = cfg.get("wave", "boundary", str, "fbm", choices=("fbm", "affine"))
    S = T / SQRT2
    if kind == "fbm":
        H1, H2 = cfg.get("wave", "H1", _float), cfg.get("wave", "H2", _float)
        b1 = sample_fbm(FbmSpec(H1, S, level, 1, run.sub_seed("beta1")))
        b2 = sample_fbm(FbmSpec(H2, S, level, 1, run.sub_seed("beta2")))
    else:
        c0 = cfg.get("wave", "corner", _float, 0.0)
        s1, s2 = cfg.get("wave", "slope1", _float, 1.0), cfg.get("wave", "slope2", _float, -1.0)
        b1 = Path1D.from_function(S, level, lambda y: c0 + s1 * y)
        b2 = Path1D.from_function(S, level, lambda y: c0 + s2 * y)
    return WaveProblem(h, b1, b2, T, coupling), level, kind


def cmd_solve_wave(cfg: Config, run: Run):
    h = _drift(cfg)
    bins, scheme = _bins_scheme(cfg, "wave", WAVE_SCHEME)
    richardson = cfg.get("wave", "richardson", int, 0)
    problem, level, boundary = _wave_problem(cfg, run, h)
    sol = solve_wave(problem, level, bins=bins, scheme=scheme, richardson=richardson)
    run.field("psi", sol.psi, with_csv=False)
    emit_plotdata(sol, "wave", run, "u.csv")
    summary = {"level": level, "bins": bins, "scheme": scheme, "boundary_errors": sol.boundary_errors(),
               "fixed_point_residual": sol.report.residual}
    if h.is_smooth and boundary == "affine":
        res = wave_residual(sol)
        run.csv("residual.csv", ["level", "max_residual", "l2_residual"], [(res.level, res.max_residual, res.l2_residual)])
        summary["max_residual"] = res.max_residual
    return summary


def cmd_mollify_study(cfg: Config, run: Run):
    target = cfg.get("study", "target", str, "sde", choices=("sde", "wave"))
    eps = cfg.floats("study", "eps")
    moll = cfg.get("study", "mollifier", str, "gaussian", choices=("gaussian", "triangular"))
    other = cfg.get("study", "compare_mollifier", str, "", choices=("", "gaussian", "triangular")) or None
    b = _drift(cfg)
    if target == "sde":
        grid = _grid(cfg)
        bins, scheme = _bins_scheme(cfg, "study")
        xi = _boundary(cfg, grid)
        _, w, _ = _noise(cfg, run, grid)
        tab = mollification_study(b, eps, w, xi, SpatialGrid.auto(w.values, bins), mollifier=moll,
                                  compare_mollifier=other, scheme=scheme)
    else:
        bins, scheme = _bins_scheme(cfg, "study", WAVE_SCHEME)
        problem, level, _ = _wave_problem(cfg, run, b)
        tab = wave_mollification_study(problem, eps, level, mollifier=moll, compare_mollifier=other, bins=bins,
                                       scheme=scheme)
    emit_plotdata(tab, "cauchy", run, "cauchy.csv")
    return {"target": target, "cauchy": tab.cauchy, "decreasing": tab.decreasing, "mean_ratio": tab.mean_ratio,
            "final_gap": tab.final_gap, "shape_difference": tab.shape_difference, "shapes_agree": tab.shapes_agree}


def cmd_check_conditions(cfg: Config, run: Run):
    which = cfg.get("conditions", "which", str)
    opt = lambda key: cfg.get("conditions", key, _float, None)
    gamma = cfg.get("conditions", "gamma", _float_list, None)
    params = RegularityParams(zeta=opt("zeta"), alpha=opt("alpha"), gamma=tuple(gamma) if gamma else None,
                              eta=opt("eta"), p=opt("p"), q=opt("q"), H1=opt("h1"), H2=opt("h2"),
                              d=cfg.get("conditions", "d", int, 1), lam=opt("lam"))
    try:
        verdict = check_conditions(params, which)
    except ConfigurationError as exc:
        missing = getattr(exc, "missing", None)
        if not missing:
            raise
        raise ConfigKeyError(f"conditions.{missing[0].lower()}",
                             f"missing required key [conditions] {missing[0].lower()} for which = {which}") from None
    run.json("verdict.json", verdict.as_dict())
    return {"passed": verdict.passed}


SUBCOMMANDS: dict[str, Callable] = {
    "sample-field": cmd_sample_field,
    "local-time": cmd_local_time,
    "averaged-field": cmd_averaged_field,
    "sew-demo": cmd_sew_demo,
    "solve-nly": cmd_solve_nly,
    "solve-sde": cmd_solve_sde,
    "regularity-scan": cmd_regularity_scan,
    "solve-wave": cmd_solve_wave,
    "mollify-study": cmd_mollify_study,
    "check-conditions": cmd_check_conditions,
}


# ---------------------------------------------------------------------------
# driver

def _error(kind: str, exc: BaseException, out: Path | None, code: int) -> int:
    payload = {"status": "error", "error": kind, "type": type(exc).__name__, "message": str(exc)}
    key = getattr(exc, "key", None)
    if key:
        payload["key"] = key
    diag = getattr(exc, "diagnostics", None)
    if diag:
        payload["diagnostics"] = diag
    text = dumps(payload)
    sys.stdout.write(text)
    if out is not None and out.is_dir():
        try:
            atomic_write_text(out / "error.json", text)
        except OSError:
            pass
    return code


def run(subcommand: str, cfg: Config, out, seed: int | None = None, threads: int = 1) -> int:
    """Execute one subcommand; returns the exit status."""
    out = Path(out)
    started = time.perf_counter()
    try:
        if subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {subcommand!r}; choose from {sorted(SUBCOMMANDS)}")
        if threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {threads}")
        if seed is None:
            seed = cfg.get("run", "seed", int, 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    except ConfigurationError as exc:
        return _error("validation", exc, None, EXIT_VALIDATION)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _error("io", exc, None, EXIT_IO)
    job = Run(subcommand, cfg, out, seed, threads)
    try:
        summary = SUBCOMMANDS[subcommand](cfg, job)
        job.json("summary.json", summary)
        manifest = {
            "subcommand": subcommand,
            "config": cfg.as_dict(),
            "config_source": cfg.source,
            "seed": seed,
            "threads": threads,
            "version": __version__,
            "numpy": np.__version__,
            "files": [{"name": n, "sha256": sha256_file(out / n), "bytes": (out / n).stat().st_size}
                      for n in job.files],
            "timings": {"wall_seconds": round(time.perf_counter() - started, 6)},
        }
        atomic_write_text(out / "manifest.json", dumps(manifest))
    except (ConfigurationError, DomainError) as exc:
        return _error("validation", exc, out, EXIT_VALIDATION)
    except NumericalError as exc:
        return _error("numerical", exc, out, EXIT_NUMERICAL)
    except OSError as exc:
        return _error("io", exc, out, EXIT_IO)
    except Exception as exc:  # noqa: BLE001
        return _error("internal", exc, out, EXIT_OTHER)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nly2d", description="2D nonlinear Young toolkit")
    ap.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", default=None, help="output directory (default: ./out/<subcommand>)")
    ap.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    ap.add_argument("--threads", type=int, default=1, help="accepted for compatibility; runs are single-threaded")
    args = ap.parse_args(argv)
    try:
        cfg = Config.from_file(args.config)
    except OSError as exc:
        return _error("io", exc, None, EXIT_IO)
    except configparser.Error as exc:
        return _error("validation", exc, None, EXIT_VALIDATION)
    out = Path(args.out) if args.out else Path("out") / args.subcommand
    return run(args.subcommand, cfg, out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
