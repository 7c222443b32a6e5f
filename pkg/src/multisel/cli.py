"""Command line interface: ``multisel {simulate,fit,bootstrap,decompose}``.

Each command reads a JSON config, writes CSV and text tables plus a
``manifest.json`` into the output directory, and exits non-zero with a
single ``CODE: message`` line on stderr when something fails. A manifest
is itself a valid config, so ``--config out/manifest.json`` replays a run.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import asdict

import numpy as np
import pandas as pd
import scipy

from . import __version__, kernels
from .basis import SieveSpec
from .data import DataError, build_first_stage_design, load_dataset
from .decompose import decompose, read_group_stats, write_components
from .design import with_intercept
from .first_stage import FirstStageError, fit_mnl, fit_ordered, fit_thresholds
from .optimize import OptimizationError
from .pipeline import PipelineOptions, fit_categories
from .second_stage import ControlSpec
from .study import SimConfig, StudyError, run_bootstrap_study, run_study

EXIT_CODES = {
    "E_IO_NOT_FOUND": 2,
    "E_CONFIG": 3,
    "E_DATA": 4,
    "E_ESTIMATION": 5,
    "E_STUDY": 6,
}

ARCH_VARIANTS = {
    "ordered-parametric": ("none", "parametric-ordered"),
    "ordered-nonparametric": ("none", "sieve-ordered"),
    "mnl": ("none", "mlogit-iv", "sieve-probs", "exch-L"),
}


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# config handling -----------------------------------------------------------


def _sieve(d, default):
    if d is None:
        return default
    return SieveSpec(order=int(d.get("order", 4)), n_interior=d.get("n_interior"),
                     full_tensor=bool(d.get("full_tensor", False)))


def _sieve_dict(s: SieveSpec | None):
    return None if s is None else asdict(s)


def _options(cfg):
    base = PipelineOptions()
    return PipelineOptions(
        first_stage=_sieve(cfg.get("first_stage"), base.first_stage),
        pair_stage=_sieve(cfg.get("pair_stage"), base.pair_stage),
        second_stage=_sieve(cfg.get("second_stage"), base.second_stage),
        interact_binary=bool(cfg.get("interact_binary", base.interact_binary)),
        min_column_mass=float(cfg.get("min_column_mass", base.min_column_mass)),
    )


def _options_dict(o: PipelineOptions):
    return {
        "first_stage": _sieve_dict(o.first_stage),
        "pair_stage": _sieve_dict(o.pair_stage),
        "second_stage": _sieve_dict(o.second_stage),
        "interact_binary": o.interact_binary,
        "min_column_mass": o.min_column_mass,
    }


def load_config(path):
    if not os.path.exists(path):
        raise CliError("E_IO_NOT_FOUND", f"config file not found: {path}")
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError("E_CONFIG", f"config is not valid JSON: {exc}") from exc
    if isinstance(cfg, dict) and "config" in cfg and "versions" in cfg:
        cfg = cfg["config"]  # a manifest from an earlier run
    if not isinstance(cfg, dict):
        raise CliError("E_CONFIG", "config must be a JSON object")
    return cfg


def _sim_config(cfg):
    try:
        est = cfg.get("estimators")
        return SimConfig(
            family=cfg["family"], dgp=int(cfg["dgp"]), n=int(cfg.get("n", 5000)),
            R=int(cfg.get("R", 200)), seed=int(cfg.get("seed", 0)),
            estimators=tuple(est) if est else None, delta=float(cfg.get("delta", 1.0)),
            bootstrap=int(cfg.get("B", 0)), workers=int(cfg.get("workers", 1)),
            options=_options(cfg),
        )
    except KeyError as exc:
        raise CliError("E_CONFIG", f"config lacks {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise CliError("E_CONFIG", str(exc)) from exc


def _resolved_sim(sc: SimConfig, mode):
    out = {
        "mode": mode, "family": sc.family, "dgp": sc.dgp, "n": sc.n, "R": sc.R,
        "seed": sc.seed, "estimators": list(sc.battery), "delta": sc.delta,
        "workers": sc.workers,
    }
    if mode == "bootstrap":
        out["B"] = sc.bootstrap
    out.update(_options_dict(sc.options))
    return out


# commands ------------------------------------------------------------------


def _write(outdir, name, text):
    with open(os.path.join(outdir, name), "w") as fh:
        fh.write(text)


def cmd_simulate(cfg, outdir):
    sc = _sim_config(cfg)
    try:
        table = run_study(sc)
    except StudyError as exc:
        if exc.table is not None:
            table = exc.table
            table.to_csv(os.path.join(outdir, "metrics.csv"))
            _write(outdir, "metrics.txt", table.to_text())
        raise CliError("E_STUDY", str(exc)) from exc
    table.to_csv(os.path.join(outdir, "metrics.csv"))
    _write(outdir, "metrics.txt", table.to_text())
    return _resolved_sim(sc, "simulate")


def cmd_bootstrap(cfg, outdir):
    cfg = dict(cfg)
    cfg.setdefault("B", 100)
    sc = _sim_config(cfg)
    if sc.bootstrap < 2:
        raise CliError("E_CONFIG", "bootstrap needs B >= 2")
    table = run_bootstrap_study(sc)
    table.to_csv(os.path.join(outdir, "bootstrap.csv"))
    _write(outdir, "bootstrap.txt", table.to_text())
    return _resolved_sim(sc, "bootstrap")


def fit_dataset(ds, architecture, variant, L=2, linear_controls=False, linear_index=False,
                opts: PipelineOptions | None = None):
    """Fit the selection model and every category's outcome equation.

    Returns ``(first_stage_fit, {k: FitResult})``.
    """
    opts = opts or PipelineOptions()
    if architecture not in ARCH_VARIANTS:
        raise CliError("E_CONFIG", f"unknown architecture {architecture!r}")
    if variant not in ARCH_VARIANTS[architecture]:
        raise CliError("E_CONFIG", f"variant {variant!r} does not fit architecture {architecture!r}")
    spec = ControlSpec(variant, L=L, sieve=opts.second_stage, linear=linear_controls)
    K = ds.K
    fs = Q = None
    if variant != "none":
        if architecture == "ordered-parametric":
            Q = ds.X
            fs = fit_ordered(ds.d, Q, K)
        else:
            raw = build_first_stage_design(ds, opts.first_stage, linear_index, opts.pair_stage,
                                           opts.interact_binary)
            Q = with_intercept(raw, min_mass=0.0 if linear_index else opts.min_column_mass)[0]
            fit = fit_thresholds if architecture == "ordered-nonparametric" else fit_mnl
            fs = fit(ds.d, Q, K)
    return fs, fit_categories(ds.y, ds.X, ds.d, K, spec, fs, Q)


def fit_report(ds, fits):
    rows = []
    for k, f in sorted(fits.items()):
        for j, name in enumerate(ds.names):
            rows.append({
                "category": k, "coef": name, "beta": f.beta[j], "se": f.se[j],
                "se_hom": f.se_hom[j], "n": f.n, "kappa": f.kappa, "cond": f.cond,
                "n_dropped": len(f.dropped),
            })
    return pd.DataFrame(rows)


def _report_text(df):
    head = f"{'occ':>4} {'coef':<14}{'beta':>12}{'se':>12}{'se_hom':>12}{'n':>8}{'kappa':>7}{'cond':>12}"
    lines = [head, "-" * len(head)]
    for _, r in df.iterrows():
        lines.append(f"{r.category:>4} {str(r.coef):<14}{r.beta:>12.5f}{r.se:>12.5f}"
                     f"{r.se_hom:>12.5f}{r.n:>8}{r.kappa:>7}{r.cond:>12.3g}")
    return "\n".join(lines) + "\n"


def cmd_fit(cfg, outdir):
    try:
        path, schema = cfg["data"], cfg["schema"]
        architecture, variant = cfg["architecture"], cfg["variant"]
    except KeyError as exc:
        raise CliError("E_CONFIG", f"config lacks {exc.args[0]!r}") from exc
    if not os.path.exists(path):
        raise CliError("E_IO_NOT_FOUND", f"data file not found: {path}")
    ds = load_dataset(path, schema)
    opts = _options(cfg)
    L = int(cfg.get("L", 2))
    lin_c = bool(cfg.get("linear_controls", False))
    lin_i = bool(cfg.get("linear_index", False))
    _, fits = fit_dataset(ds, architecture, variant, L, lin_c, lin_i, opts)
    df = fit_report(ds, fits)
    df.to_csv(os.path.join(outdir, "fit.csv"), index=False, float_format="%.17g")
    _write(outdir, "fit.txt", _report_text(df))
    resolved = {"mode": "fit", "data": path, "schema": schema, "architecture": architecture,
                "variant": variant, "L": L, "linear_controls": lin_c, "linear_index": lin_i,
                "seed": cfg.get("seed")}
    resolved.update(_options_dict(opts))
    return resolved


def cmd_decompose(cfg, outdir):
    path = cfg.get("input")
    if path is None:
        raise CliError("E_CONFIG", "config lacks 'input'")
    if not os.path.exists(path):
        raise CliError("E_IO_NOT_FOUND", f"group statistics file not found: {path}")
    try:
        comps = decompose(read_group_stats(path))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    write_components(comps, os.path.join(outdir, "components.csv"))
    _write(outdir, "components.txt",
           "".join(f"{k:<24}{v:>12.6f}\n" for k, v in comps.items()))
    return {"mode": "decompose", "input": path, "seed": cfg.get("seed")}


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "bootstrap": cmd_bootstrap,
    "decompose": cmd_decompose,
}


def versions():
    return {
        "multisel": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
        "pandas": pd.__version__, "python": platform.python_version(),
        "kernel_backend": kernels.BACKEND,
    }


def execute(mode, cfg, outdir):
    """Run one command and write its manifest; returns the manifest dict."""
    if mode not in COMMANDS:
        raise CliError("E_CONFIG", f"unknown mode {mode!r}")
    cfg_mode = cfg.get("mode", mode)
    if cfg_mode != mode:
        raise CliError("E_CONFIG", f"config is for mode {cfg_mode!r}, not {mode!r}")
    os.makedirs(outdir, exist_ok=True)
    t0 = time.perf_counter()
    try:
        resolved = COMMANDS[mode](cfg, outdir)
    except DataError as exc:
        raise CliError("E_DATA", str(exc)) from exc
    except FileNotFoundError as exc:
        raise CliError("E_IO_NOT_FOUND", str(exc)) from exc
    except (FirstStageError, OptimizationError, np.linalg.LinAlgError) as exc:
        raise CliError("E_ESTIMATION", str(exc)) from exc
    except ValueError as exc:
        raise CliError("E_ESTIMATION", str(exc)) from exc
    manifest = {
        "config": resolved,
        "seed": resolved.get("seed"),
        "versions": versions(),
        "wall_time_seconds": time.perf_counter() - t0,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def build_parser():
    p = argparse.ArgumentParser(prog="multisel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="mode", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config or an earlier manifest")
        sp.add_argument("--output", default=None, help="output directory (default: config 'output' or ./out)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--workers", type=int, default=None, help="worker processes for replications")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = dict(load_config(args.config))
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.workers is not None:
            cfg["workers"] = args.workers
        outdir = args.output or cfg.get("output") or "out"
        execute(args.mode, cfg, outdir)
    except CliError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.code]
    return 0


if __name__ == "__main__":
    sys.exit(main())
