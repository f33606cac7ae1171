"""Command-line front end: ``otto-ldf {pearson,ldf,contour,sample}``.

Every command reads an optional config file, applies ``--set`` overrides
and the common flags, writes CSV/JSON data with a provenance header plus a
standalone plot script, and exits with 0 (ok), 2 (config), 3 (numerical or
truncation failure) or 4 (``--verify`` mismatch).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .cgf import DistributionCgf, make_cgf
from .config import RunConfig, apply_overrides, load_config
from .errors import ConfigError, OttoError
from .joint import build_joint, moments
from .ldf import SearchConfig, contour_grid, degeneracy_check, rate_curve, rate_function
from .montecarlo import empirical_rate, sample_blocks

log = logging.getLogger("otto_ldf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4


class VerificationError(OttoError):
    pass


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _num(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def provenance(cfg: RunConfig, command):
    resolved = cfg.to_dict()
    resolved.pop("output")
    return {"package": "otto_ldf", "version": __version__, "command": command, "config": resolved}


def write_csv(path, header, rows, prov):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# " + json.dumps(prov, sort_keys=True) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _num(v) for v in row) + "\n")
    log.info("wrote %s", path)


def write_text(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    log.info("wrote %s", path)


_PLOT_HEAD = '''"""Plot script generated by otto-ldf; reads only the CSV/JSON files next to it."""
import csv, json, sys
import matplotlib.pyplot as plt


def read(path):
    with open(path) as fh:
        rows = [r for r in fh if not r.startswith("#")]
    return list(csv.DictReader(rows))


def num(x):
    return float(x) if x not in ("", "inf") else float("nan")

'''


def _plot_curves(files, x, y, xlabel, ylabel, out):
    return _PLOT_HEAD + f'''
for name in {files!r}:
    rows = read(name)
    plt.plot([num(r[{x!r}]) for r in rows], [num(r[{y!r}]) for r in rows], label=name)
plt.xlabel({xlabel!r})
plt.ylabel({ylabel!r})
plt.legend()
plt.savefig({out!r}, dpi=150)
'''


def _plot_contour(files):
    return _PLOT_HEAD + f'''
for name in {files!r}:
    with open(name) as fh:
        doc = json.load(fh)
    vals = [[float("nan") if v is None else v for v in row] for row in doc["values"]]
    plt.figure()
    plt.contourf(doc["gamma1"], doc["gamma2"], vals, 40)
    plt.colorbar()
    plt.xlabel("gamma1")
    plt.ylabel("gamma2")
    plt.title(name)
    plt.savefig(name.replace(".json", ".png"), dpi=150)
'''


# --------------------------------------------------------------------------
# verification against the enumeration oracle
# --------------------------------------------------------------------------

def verify_engine(engine, baths, cfg: RunConfig, regime="exact", n_points=20):
    """Largest deviation between analytic CGF and the distribution oracle.

    Points are drawn deterministically from ``[-1/2, 1/2]^2`` (in inverse
    quanta) and kept when three times the point is still in the domain.
    """
    cgf = make_cgf(engine, baths, "exact" if regime == "linear" else regime)
    dist = build_joint(cgf.engine, baths, cfg.n_levels or None, cfg.tail_tolerance)
    oracle = DistributionCgf(dist)
    rng = np.random.default_rng(20240501)
    g = rng.uniform(-0.5, 0.5, size=(50 * n_points, 2)) / cgf.min_quantum
    ok = np.isfinite(cgf.evaluate(3 * g[:, 0], 3 * g[:, 1]))
    g = g[ok][:n_points]
    ref = oracle.evaluate(g[:, 0], g[:, 1]) - oracle(0.0, 0.0)
    return float(np.max(np.abs(cgf.evaluate(g[:, 0], g[:, 1]) - ref)))


def _verify(cfg, engines, regime=None):
    baths = cfg.baths()
    for name, engine in engines:
        err = verify_engine(engine, baths, cfg, regime or cfg.regime)
        log.info("verify %s: max |cgf - oracle| = %.3g", name, err)
        if not err <= cfg.tolerance:
            raise VerificationError(f"{name}: analytic CGF deviates from oracle by {err:.3g}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_pearson(cfg: RunConfig, verify=False):
    out = cfg.output_dir()
    baths = cfg.baths()
    prov = provenance(cfg, "pearson")
    files = []
    sweeps = {
        "two_level": (cfg.tl_q_min, cfg.tl_q_max, cfg.two_level),
        "harmonic": (cfg.ho_q_min, cfg.ho_q_max, cfg.harmonic),
    }
    names = ("two_level", "harmonic") if cfg.engine == "both" else (cfg.engine,)
    for name in names:
        lo, hi, factory = sweeps[name]
        qs = np.linspace(lo, hi, cfg.q_points) if cfg.q_points > 1 else np.array([lo])
        rows = []
        for q in qs:
            dist = build_joint(factory(float(q)), baths, cfg.n_levels or None, cfg.tail_tolerance)
            m = moments(dist)
            rows.append((q, m.pearson, m.eta_macroscopic, m.mean_q2, m.mean_w))
        path = os.path.join(out, f"pearson_{name}.csv")
        write_csv(path, ["q_star", "rho", "eta_macroscopic", "mean_q2", "mean_w"], rows, prov)
        files.append(os.path.basename(path))
    write_text(os.path.join(out, "plot_pearson.py"),
               _plot_curves(files, "q_star", "rho", "Q*", "rho", "pearson.png"))
    if verify:
        _verify(cfg, [(n, sweeps[n][2](float(sweeps[n][1]))) for n in names], "exact")
    return files


def _eta_grid(cfg):
    if cfg.eta_points == 1:
        return np.array([cfg.eta_min])
    return np.linspace(cfg.eta_min, cfg.eta_max, cfg.eta_points)


def cmd_ldf(cfg: RunConfig, verify=False):
    out = cfg.output_dir()
    baths = cfg.baths()
    prov = provenance(cfg, "ldf")
    search = SearchConfig(gamma_max=cfg.gamma_max, j_max=cfg.j_max)
    regimes = ("linear", "exact") if cfg.regime == "linear" else (cfg.regime,)
    files = []
    for name, engine in cfg.engines():
        for regime in regimes:
            cgf = make_cgf(engine, baths, regime)
            curve = rate_curve(cgf, _eta_grid(cfg), search, threads=cfg.threads)
            rows = [(p.eta, p.j, p.argmin_gamma2, p.status, p.line_minimum) for p in curve.points]
            path = os.path.join(out, f"ldf_{name}_{regime}.csv")
            meta = dict(prov, eta_th=curve.eta_th, eta_ca=curve.eta_ca, **curve.metadata)
            write_csv(path, ["eta", "j", "argmin_gamma2", "status", "line_minimum"], rows, meta)
            files.append(os.path.basename(path))
    write_text(os.path.join(out, "plot_ldf.py"),
               _plot_curves(files, "eta", "j", "eta", "J(eta)", "ldf.png"))
    if verify:
        _verify(cfg, cfg.engines())
    return files


def cmd_contour(cfg: RunConfig, verify=False):
    out = cfg.output_dir()
    baths = cfg.baths()
    prov = provenance(cfg, "contour")
    files = []
    bounds = (cfg.gamma1_min, cfg.gamma1_max, cfg.gamma2_min, cfg.gamma2_max)
    for name, engine in cfg.engines():
        cgf = make_cgf(engine, baths, cfg.regime)
        grid = contour_grid(cgf, bounds, (cfg.gamma1_points, cfg.gamma2_points))
        grid.metadata.update(
            engine=name,
            regime=cfg.regime,
            eta_th=cgf.eta_th,
            degenerate=degeneracy_check(cgf, cgf.eta_th),
            undefined_cells=int(grid.mask.sum()),
        )
        path = os.path.join(out, f"contour_{name}_{cfg.regime}.json")
        write_text(path, grid.to_json(prov) + "\n")
        files.append(os.path.basename(path))
    write_text(os.path.join(out, "plot_contour.py"), _plot_contour(files))
    if verify:
        _verify(cfg, cfg.engines())
    return files


def cmd_sample(cfg: RunConfig, verify=False):
    out = cfg.output_dir()
    baths = cfg.baths()
    prov = provenance(cfg, "sample")
    search = SearchConfig(gamma_max=cfg.gamma_max, j_max=cfg.j_max)
    files = []
    for name, engine in cfg.engines():
        blocks = sample_blocks(engine, baths, cfg.s, cfg.n_blocks, cfg.seed, cfg.threads,
                               cfg.bins, (cfg.eta_min, cfg.eta_max), cfg.n_levels or None)
        meta = dict(prov, seed=cfg.seed, excluded_blocks=blocks.excluded)
        hist = [(lo, hi, int(c)) for lo, hi, c in
                zip(blocks.edges[:-1], blocks.edges[1:], blocks.counts)]
        path = os.path.join(out, f"histogram_{name}_s{cfg.s}.csv")
        write_csv(path, ["eta_lo", "eta_hi", "count"], hist, meta)
        files.append(os.path.basename(path))
        cgf = make_cgf(engine, baths, cfg.regime if cfg.regime != "linear" else "exact")
        rows = []
        if blocks.included:
            for center, rate, se, count in empirical_rate(blocks):
                rows.append((center, rate, se, count, rate_function(cgf, center, search).j))
        path = os.path.join(out, f"rate_{name}_s{cfg.s}.csv")
        write_csv(path, ["eta", "rate", "stderr", "count", "analytic_j"], rows, meta)
        files.append(os.path.basename(path))
    rate_files = [f for f in files if f.startswith("rate_")]
    write_text(os.path.join(out, "plot_sample.py"),
               _plot_curves(rate_files, "eta", "rate", "eta", "-ln p / s", "sample.png"))
    if verify:
        _verify(cfg, cfg.engines())
    return files


COMMANDS = {"pearson": cmd_pearson, "ldf": cmd_ldf, "contour": cmd_contour, "sample": cmd_sample}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="parameter file")
    common.add_argument("--out", help="output directory (default: $OTTO_LDF_OUTPUT)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--tolerance", type=float, help="verification tolerance")
    common.add_argument("--engine", choices=("two_level", "harmonic", "both"))
    common.add_argument("--regime", choices=("exact", "linear", "adiabatic"))
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("--verify", action="store_true",
                        help="cross-check analytic values against the enumeration oracle")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="otto-ldf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("pearson", parents=[common], help="work-heat Pearson coefficient vs Q*")
    sub.add_parser("ldf", parents=[common], help="efficiency rate function J(eta)")
    sub.add_parser("contour", parents=[common], help="CGF contour grid")
    sub.add_parser("sample", parents=[common], help="Monte Carlo block efficiencies")
    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args.set)
    flags = {k: getattr(args, k) for k in ("seed", "threads", "tolerance", "engine", "regime")}
    flags = {k: v for k, v in flags.items() if v is not None}
    if args.out:
        flags["output"] = args.out
    return replace(cfg, **flags).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        out = cfg.output_dir()
        try:
            os.makedirs(out, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc.strerror}",
                              field="output") from exc
        files = COMMANDS[args.command](cfg, verify=args.verify)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OttoError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for f in files:
        print(os.path.join(out, f))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
