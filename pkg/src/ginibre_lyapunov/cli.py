"""Command-line front end.

Subcommands: ``simulate``, ``density``, ``compare``, ``positions``,
``limits``, ``spacing``; or ``--preset fig1..fig5`` for a whole figure's data.
Every run writes CSV (or JSON) files into ``--out`` (a directory).

Exit codes: 0 success, 2 a ``compare`` tolerance failure, 1 any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
import time
from typing import Optional, Tuple

import numpy as np
from scipy import special

from . import asymptotics, laws
from .csvio import write_csv, write_json
from .laws import DensityModel
from .montecarlo import (ExperimentError, histogram, ks_distance, run_2x2_bounds,
                         run_ev_experiment, run_sv_experiment)
from .rng import OBSERVABLES, EnsembleSpec

log = logging.getLogger("ginibre_lyapunov")

COMMANDS = ("simulate", "density", "compare", "positions", "limits", "spacing")
PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5")
MODELS = laws._KINDS
_PREFIX = {"sv-lyapunov": "mu", "incremental-sv": "lambda",
           "ev-lyapunov": "nu", "incremental-radius": "r"}


class ConfigError(ValueError):
    """Invalid flags or config file; the message is shown to the user as is."""


@dataclasses.dataclass
class ExperimentConfig:
    command: Optional[str] = None
    ensemble: str = "ginibre"
    beta: int = 2
    n: int = 3
    t: int = 1
    samples: Optional[int] = None
    seed: int = 0
    observable: str = "sv-lyapunov"
    method: str = "matrix"
    model: str = "gaussian-mixture"
    grid: Optional[Tuple[float, float, int]] = None
    component: str = "pooled"
    tolerance: float = 0.05
    bins: int = 100
    moments: int = 4
    t_values: Tuple[int, ...] = (10, 100, 1000, 10000)
    out: str = "."
    format: str = "csv"
    threads: int = 1
    preset: Optional[str] = None
    no_timestamp: bool = False
    emit_plot_script: bool = False

    @property
    def family(self):
        return f"ginibre-beta{self.beta}"

    def ensemble_spec(self, **over):
        kw = dict(family=self.family, N=self.n, t=self.t, samples=self.samples or 1000,
                  master_seed=self.seed, observable=self.observable)
        kw.update(over)
        return EnsembleSpec(**kw)


_INT_KEYS = ("beta", "n", "t", "samples", "seed", "bins", "moments", "threads")
_STR_KEYS = ("command", "ensemble", "observable", "method", "model", "component",
             "out", "format", "preset")
_BOOL_KEYS = ("no_timestamp", "emit_plot_script")


def parse_grid(text):
    """``"lo:hi:n"`` -> ``(lo, hi, n)``."""
    try:
        lo, hi, n = text.split(":")
        g = (float(lo), float(hi), int(n))
    except (ValueError, AttributeError):
        raise ConfigError(f"grid must look like lo:hi:n, got {text!r}") from None
    return g


def _coerce(key, value):
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, str) and value.lstrip("-").isdigit():
                return int(value)
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string, got {value!r}")
        return value
    if key in _BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if key == "tolerance":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"tolerance must be a number, got {value!r}")
        return float(value)
    if key == "grid":
        if isinstance(value, str):
            return parse_grid(value)
        if isinstance(value, (list, tuple)) and len(value) == 3:
            return (float(value[0]), float(value[1]), int(value[2]))
        raise ConfigError(f"grid must be 'lo:hi:n' or [lo, hi, n], got {value!r}")
    if key == "t_values":
        if isinstance(value, str):
            value = value.split(",")
        try:
            return tuple(int(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"t_values must be a list of integers, got {value!r}") from None
    raise ConfigError(f"unknown key {key!r}")


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def validate(cfg: ExperimentConfig):
    for key in ("n", "t", "samples", "bins", "moments", "threads"):
        v = getattr(cfg, key)
        if v is not None and v < 1:
            raise ConfigError(f"{key} must be ≥ 1")
    if cfg.command is None and cfg.preset is None:
        raise ConfigError(f"give a subcommand ({', '.join(COMMANDS)}) or --preset")
    if cfg.command is not None and cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; choose from {', '.join(COMMANDS)}")
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError(f"unknown preset {cfg.preset!r}; choose from {', '.join(PRESETS)}")
    if cfg.ensemble != "ginibre":
        raise ConfigError("ensemble must be 'ginibre' (custom ensembles are available from Python)")
    if cfg.beta not in (1, 2, 4):
        raise ConfigError("beta must be 1, 2 or 4")
    if cfg.observable not in OBSERVABLES:
        raise ConfigError(f"observable must be one of {', '.join(OBSERVABLES)}")
    if cfg.method not in ("matrix", "gamma-product"):
        raise ConfigError("method must be matrix or gamma-product")
    if cfg.model not in MODELS:
        raise ConfigError(f"model must be one of {', '.join(MODELS)}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.component != "pooled":
        if not (cfg.component.isdigit() and 1 <= int(cfg.component) <= cfg.n):
            raise ConfigError(f"component must be 'pooled' or an index in 1..{cfg.n}")
    if cfg.grid is not None:
        lo, hi, npts = cfg.grid
        if not lo < hi:
            raise ConfigError("grid needs lo < hi")
        if npts < 2:
            raise ConfigError("grid needs at least 2 points")
    if not cfg.tolerance > 0:
        raise ConfigError("tolerance must be > 0")
    if any(v < 1 for v in cfg.t_values):
        raise ConfigError("t must be ≥ 1")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_common(p):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with the same keys as the flags")
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--threads", type=int, default=S)
    p.add_argument("--out", default=S, help="output directory")
    p.add_argument("--format", default=S, help="csv or json")
    p.add_argument("--preset", default=S, help="fig1 .. fig5")
    p.add_argument("--no-timestamp", action="store_true", default=S)
    p.add_argument("--emit-plot-script", action="store_true", default=S)
    p.add_argument("--ensemble", default=S)
    p.add_argument("--beta", type=int, default=S)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--t", type=int, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--observable", default=S)
    p.add_argument("--method", default=S)
    p.add_argument("--model", default=S)
    p.add_argument("--grid", default=S, help="lo:hi:n")
    p.add_argument("--component", default=S)
    p.add_argument("--tolerance", type=float, default=S)
    p.add_argument("--bins", type=int, default=S)
    p.add_argument("--moments", type=int, default=S)
    p.add_argument("--t-values", default=S, help="comma-separated list")


def build_parser():
    parser = _Parser(prog="ginibre-lyapunov", description=__doc__.splitlines()[0])
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    return parser


def parse_config(argv=None, config_text=None) -> ExperimentConfig:
    """Resolve defaults, then a JSON config document, then explicit flags."""
    argv = list(sys.argv[1:] if argv is None else argv)
    # a grid such as -0.8:0.8:400 would otherwise be read as a flag
    for i in range(len(argv) - 1):
        if argv[i] == "--grid":
            argv[i:i + 2] = [f"--grid={argv[i + 1]}", ""]
    ns = vars(build_parser().parse_args([a for a in argv if a != ""]))
    values = {}
    path = ns.pop("config", None)
    if path is not None and config_text is None:
        try:
            with open(path) as fh:
                config_text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if config_text is not None:
        try:
            doc = json.loads(config_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        for k, v in doc.items():
            key = k.replace("-", "_")
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {k!r}")
            values[key] = _coerce(key, v)
    for k, v in ns.items():
        if k == "command" and v is None:
            continue
        values[k] = _coerce(k, v)
    return validate(ExperimentConfig(**values))


# ---------------------------------------------------------------------------
# writers


class _Out:
    def __init__(self, cfg):
        self.cfg = cfg
        self.files = []
        try:
            os.makedirs(cfg.out, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {cfg.out}: {exc.strerror}") from exc

    def table(self, stem, columns, data, meta=None):
        path = os.path.join(self.cfg.out, f"{stem}.{self.cfg.format}")
        if self.cfg.format == "json":
            doc = {"meta": dict(meta or {}), "columns": list(columns),
                   "data": [list(r) for r in data]}
            write_json(path, doc)
        else:
            write_csv(path, columns, data, meta, timestamp=not self.cfg.no_timestamp)
        self.files.append((path, columns))
        print(path)
        return path

    def json(self, stem, obj):
        path = os.path.join(self.cfg.out, f"{stem}.json")
        write_json(path, obj)
        print(path)
        return path

    def plot_script(self, stem):
        if not self.cfg.emit_plot_script or not self.files:
            return
        lines = ['set datafile separator ","', "set key autotitle columnhead"]
        for path, columns in self.files:
            name = os.path.basename(path)
            cols = ", ".join(f"'{name}' using 1:{j} with lines" for j in range(2, len(columns) + 1))
            lines.append(f"set title '{name}'")
            lines.append(f"plot {cols}")
            lines.append("pause -1")
        path = os.path.join(self.cfg.out, f"{stem}.gp")
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(path)


def _spec_meta(spec):
    return {"ensemble": spec.family, "N": spec.N, "t": spec.t, "samples": spec.samples,
            "seed": spec.master_seed, "observable": spec.observable}


def _run_samples(spec, method, threads):
    if spec.observable in ("sv-lyapunov", "incremental-sv"):
        return run_sv_experiment(spec, threads=threads)
    return run_ev_experiment(spec, method=method, threads=threads)


def _hist_rows(h):
    return [(c, d, int(k)) for c, d, k in zip(h.centers, h.density, h.counts)]


def _grid(cfg, default):
    lo, hi, n = cfg.grid if cfg.grid is not None else default
    return np.linspace(lo, hi, n)


def _model_columns(model, x):
    if model.kind == "staircase":
        return ["x", "cdf"], list(zip(x, model.cdf(x)))
    return ["x", "pdf", "cdf"], list(zip(x, model.pdf(x), model.cdf(x)))


def _default_grid(model):
    lo, hi = model.support()
    if model.kind not in ("triangular", "staircase", "lognormal-mixture"):
        lo, hi = max(lo, hi - 12.0), hi
    return (lo, hi, 400)


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg, out):
    spec = cfg.ensemble_spec()
    meta = _spec_meta(spec)
    if spec.observable == "two-by-two-schur":
        rep = run_2x2_bounds(spec)
        rows = [(i, a, b, c, d) for i, (a, b, c, d) in
                enumerate(zip(rep.mu_max, rep.mu_max_svd, rep.lower, rep.sum_residual))]
        out.table("simulate_2x2", ["sample", "mu_max", "mu_max_svd", "lower_bound", "sum_residual"],
                  rows, meta)
        return 0
    sset = _run_samples(spec, cfg.method, cfg.threads)
    meta["method"] = cfg.method if spec.observable.startswith(("ev", "incremental-r")) else "svd"
    p = _PREFIX[spec.observable]
    cols = ["sample"] + [f"{p}_{b}" for b in range(1, sset.rows.shape[1] + 1)]
    data = [[i] + list(r) for i, r in enumerate(sset.rows)]
    if sset.angles is not None:
        cols += [f"phi_{b}" for b in range(1, sset.angles.shape[1] + 1)]
        data = [d + list(a) for d, a in zip(data, sset.angles)]
    if "real_fraction" in sset.extra:
        cols.append("real_fraction")
        data = [d + [f] for d, f in zip(data, sset.extra["real_fraction"])]
    out.table("simulate_samples", cols, data, meta)
    h = histogram(sset, cfg.component, n_bins=cfg.bins)
    out.table("simulate_histogram", ["x", "density", "count"], _hist_rows(h),
              dict(meta, component=cfg.component, digest=h.provenance))
    return 0


def cmd_density(cfg, out):
    model = DensityModel(cfg.model, cfg.n, cfg.t, cfg.beta)
    x = _grid(cfg, _default_grid(model))
    cols, data = _model_columns(model, x)
    out.table("density", cols, data, {"model": model.kind, "N": model.N, "t": model.t,
                                      "beta": model.beta})
    return 0


def cmd_compare(cfg, out):
    spec = cfg.ensemble_spec()
    t0 = time.perf_counter()
    sset = _run_samples(spec, cfg.method, cfg.threads)
    model = DensityModel(cfg.model, cfg.n, cfg.t, cfg.beta)
    ks = ks_distance(sset, model, cfg.component)
    runtime = time.perf_counter() - t0
    passed = ks <= cfg.tolerance
    out.json("compare_summary", {
        "experiment": dict(_spec_meta(spec), method=cfg.method, component=cfg.component),
        "model": {"kind": model.kind, "N": model.N, "t": model.t, "beta": model.beta},
        "ks": ks, "tolerance": cfg.tolerance, "pass": passed,
        "runtime_seconds": None if cfg.no_timestamp else runtime, "seed": cfg.seed,
    })
    return 0 if passed else 2


def cmd_positions(cfg, out):
    pos = laws.deterministic_positions(cfg.n, cfg.beta)
    out.table("positions", ["b", "position", "radius"],
              [(b, p, math.exp(p)) for b, p in enumerate(pos, start=1)],
              {"N": cfg.n, "beta": cfg.beta})
    return 0


def cmd_limits(cfg, out):
    rows = []
    for t in cfg.t_values:
        for n in range(1, cfg.moments + 1):
            fc = asymptotics.fuss_catalan_moment(True, t, n)
            tri = asymptotics.fuss_catalan_moment(False, t, n)
            rows.append((n, t, fc, tri, abs(fc - tri)))
    out.table("limits_moments", ["n", "t", "fuss_catalan", "triangular", "abs_diff"], rows)
    x = _grid(cfg, (0.0, 1.2, 601))
    sc = asymptotics.staircase(cfg.n)
    out.table("limits_staircase", ["lambda", "staircase_cdf", "triangular_cdf"],
              list(zip(x, sc(x), asymptotics.triangular_cdf(x))),
              {"N": cfg.n, "sup_deviation": asymptotics.staircase_sup_deviation(cfg.n)})
    return 0


def cmd_spacing(cfg, out):
    n = max(cfg.n, 2)
    d = asymptotics.level_spacing_finite_N(n)
    out.table("spacing_atoms", ["j", "spacing"], list(zip(range(1, n), d.atoms)),
              {"N": n, "mass_0.9_1.1": d.mass_in(0.9, 1.1)})
    samples = cfg.samples or 200
    s = asymptotics.mc_level_spacing(n, cfg.t, samples, cfg.seed, method=cfg.method,
                                     threads=cfg.threads)
    frac = float(((s >= 0.9) & (s <= 1.1)).mean())
    out.table("spacing_mc", ["spacing"], [(v,) for v in s],
              {"N": n, "t": cfg.t, "samples": samples, "seed": cfg.seed,
               "mass_0.9_1.1": frac})
    return 0


# ---------------------------------------------------------------------------
# figure presets


def _samples(cfg, default):
    return cfg.samples if cfg.samples is not None else default


def preset_fig1(cfg, out):
    for t in (30, 200):
        spec = EnsembleSpec("ginibre-beta2", 3, t, _samples(cfg, 10000), cfg.seed, "sv-lyapunov")
        sset = run_sv_experiment(spec, threads=cfg.threads)
        h = histogram(sset, "pooled", -1.0, 1.0, cfg.bins)
        out.table(f"fig1_t{t}_histogram", ["mu", "density", "count"], _hist_rows(h), _spec_meta(spec))
        x = np.linspace(-1.0, 1.0, 400)
        out.table(f"fig1_t{t}_curves", ["mu", "gaussian", "saddle"],
                  list(zip(x, laws.density_sv_lyapunov(3, t, x, "gaussian"),
                           laws.density_sv_lyapunov(3, t, x, "saddle"))), {"N": 3, "t": t})


def preset_fig2(cfg, out):
    spec = EnsembleSpec("ginibre-beta2", 10, 200, _samples(cfg, 1000), cfg.seed, "incremental-sv")
    sset = run_sv_experiment(spec, threads=cfg.threads)
    h = histogram(sset, "pooled", 0.0, 3.5, max(cfg.bins, 200))
    out.table("fig2_histogram", ["lambda", "density", "count"], _hist_rows(h), _spec_meta(spec))
    x = np.linspace(0.01, 3.5, 700)
    out.table("fig2_curve", ["lambda", "lognormal_mixture"],
              list(zip(x, laws.density_incremental_sv(10, 200, x))), {"N": 10, "t": 200})


def _scatter(out, stem, sset, t, meta):
    r = np.exp(sset.rows)
    z = r * np.exp(1j * sset.angles)
    rows = [(i, zz.real, zz.imag) for i, zrow in enumerate(z) for zz in zrow]
    out.table(stem, ["sample", "re", "im"], rows, meta)


def preset_fig3(cfg, out):
    for N, t in ((3, 300), (5, 500)):
        spec = EnsembleSpec("ginibre-beta2", N, t, _samples(cfg, 1000), cfg.seed, "ev-lyapunov")
        sset = run_ev_experiment(spec, "matrix", threads=cfg.threads)
        _scatter(out, f"fig3_N{N}_t{t}_scatter", sset, t, dict(_spec_meta(spec), rooting="R^(1/t) e^(i phi)"))
    b = np.arange(1, 6)
    out.table("fig3_rings", ["b", "radius"], list(zip(b, np.exp(special.psi(b) / 2))))


def preset_fig4(cfg, out):
    N, t = 5, 100
    n = _samples(cfg, 10000)
    sv = run_sv_experiment(EnsembleSpec("ginibre-beta2", N, t, n, cfg.seed, "incremental-sv"),
                           threads=cfg.threads)
    ev_spec = EnsembleSpec("ginibre-beta2", N, t, n, cfg.seed, "incremental-radius")
    ev = run_ev_experiment(ev_spec, "gamma-product")
    for name, s in (("singular", sv), ("radii", ev)):
        h = histogram(s, "pooled", 0.4, 2.8, max(cfg.bins, 200))
        out.table(f"fig4_{name}_histogram", ["lambda", "density", "count"], _hist_rows(h),
                  _spec_meta(s.spec))
    x = np.linspace(0.4, 2.8, 600)
    out.table("fig4_curves", ["lambda", "radii_lognormal", "singular_saddle"],
              list(zip(x, laws.density_incremental_sv(N, t, x),
                       laws.density_sv_lyapunov(N, t, np.log(x), "saddle") / x)), {"N": N, "t": t})
    b = np.arange(1, N + 1)
    out.table("fig4_positions", ["b", "radius"], list(zip(b, np.exp(special.psi(b) / 2))))


def preset_fig5(cfg, out):
    for beta in (1, 2, 4):
        for t in (5, 500):
            spec = EnsembleSpec(f"ginibre-beta{beta}", 2, t, _samples(cfg, 1000), cfg.seed, "ev-lyapunov")
            sset = run_ev_experiment(spec, "matrix", threads=cfg.threads)
            meta = _spec_meta(spec)
            if "real_fraction" in sset.extra:
                meta["mean_real_fraction"] = float(sset.extra["real_fraction"].mean())
            _scatter(out, f"fig5_beta{beta}_t{t}_scatter", sset, t, meta)
        pos = np.exp(laws.deterministic_positions(2, beta))
        out.table(f"fig5_beta{beta}_positions", ["n", "radius"], list(zip((1, 2), pos)))


_COMMAND_FUNCS = {"simulate": cmd_simulate, "density": cmd_density, "compare": cmd_compare,
                  "positions": cmd_positions, "limits": cmd_limits, "spacing": cmd_spacing}
_PRESET_FUNCS = {"fig1": preset_fig1, "fig2": preset_fig2, "fig3": preset_fig3,
                 "fig4": preset_fig4, "fig5": preset_fig5}


def run(cfg: ExperimentConfig) -> int:
    out = _Out(cfg)
    if cfg.preset is not None:
        _PRESET_FUNCS[cfg.preset](cfg, out)
        code = 0
        stem = cfg.preset
    else:
        code = _COMMAND_FUNCS[cfg.command](cfg, out)
        stem = cfg.command
    out.plot_script(stem)
    return code


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(parse_config(argv))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ExperimentError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
