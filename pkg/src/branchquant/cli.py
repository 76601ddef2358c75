"""Command line interface: experiment orchestration and persistence.

Subcommands: solve-bot, quantize, sweep, render, validate. All structured
artifacts are JSON, tabular reports CSV, figures SVG. Runs are reproducible:
the same config + seed produces byte-identical output trees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import asymptotics, render
from .landscape import holder_exponent
from .measures import DiscreteMeasure, GridSpec
from .network import TransportNetwork
from .quantizer import solve_quantization
from .solver import SolverConfig, solve_bot

log = logging.getLogger("branchquant")


def _setup_logging():
    level = os.environ.get("BRANCHQUANT_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR),
                        format="%(levelname)s %(name)s: %(message)s")


def _fail(category, message):
    click.echo("error[%s]: %s" % (category, message), err=True)
    sys.exit(1)


DEFAULT_CONFIG = {
    "dimension": 2,
    "alpha": 0.85,
    "measure": {
        "lo": [0.0, 0.0],
        "hi": [1.0, 1.0],
        "density": {"kind": "uniform"},
        "resolution": 32,
    },
    "N_list": [2, 4, 8],
    "solver": {},
    "seed": 0,
    "out": "runs",
    "reports": {"scaling": True, "delone": True, "density": True,
                "basins": True},
    "threads": 1,
}


def load_config(path, seed=None, out=None, threads=None):
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            _fail("parse", "config: %s" % exc)
        cfg.update(user)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out"] = out
    if threads is not None:
        cfg["threads"] = int(threads)
    d = int(cfg["dimension"])
    if not (1.0 - 1.0 / d < float(cfg["alpha"]) <= 1.0):
        _fail("config", "alpha must exceed 1 - 1/d (and be <= 1)")
    if not cfg["N_list"] or any(
        b <= a for a, b in zip(cfg["N_list"], cfg["N_list"][1:])
    ):
        _fail("config", "N_list must be nonempty and strictly increasing")
    return cfg


def solver_config(cfg):
    fields = {f.name for f in dataclasses.fields(SolverConfig)}
    extra = {k: v for k, v in cfg.get("solver", {}).items() if k in fields}
    extra["seed"] = int(cfg["seed"])
    return SolverConfig(**extra)


def run_id(cfg):
    # output location and worker count do not affect results, so they are
    # excluded from the identity hash
    canon = {k: v for k, v in cfg.items() if k not in ("out", "threads")}
    text = json.dumps(canon, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _load_measure(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail("parse", "%s: %s" % (path, exc))
    try:
        return DiscreteMeasure.from_json(doc)
    except ValueError as exc:
        _fail("parse", "%s: %s" % (path, exc))


@click.group()
def main():
    """Branched optimal transport quantization toolkit."""
    _setup_logging()


@main.command("solve-bot")
@click.argument("sources_file", type=click.Path(exists=True))
@click.argument("sinks_file", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--alpha", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--threads", type=int, default=None)
def cmd_solve_bot(sources_file, sinks_file, config_path, alpha, seed, out,
                  threads):
    """Solve branched transport between two measure files."""
    cfg = load_config(config_path, seed=seed, out=out, threads=threads)
    if alpha is not None:
        cfg["alpha"] = float(alpha)
    mu = _load_measure(sources_file)
    nu = _load_measure(sinks_file)
    d = mu.dimension
    if not (1.0 - 1.0 / d < float(cfg["alpha"]) <= 1.0):
        _fail("config", "alpha must exceed 1 - 1/d (and be <= 1)")
    try:
        net = solve_bot(mu, nu, float(cfg["alpha"]), solver_config(cfg))
    except ValueError as exc:
        _fail("solver", str(exc))
    rid = run_id({**cfg, "cmd": "solve-bot",
                  "sources": mu.to_json(), "sinks": nu.to_json()})
    base = Path(cfg["out"]) / rid
    _write(base / "network.json", net.dumps() + "\n")
    _write(base / "network.svg", render.render_network(net))
    click.echo(repr(float(net.cost)))


@main.command("quantize")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--n-sites", "n_sites", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--threads", type=int, default=None)
def cmd_quantize(config_path, n_sites, seed, out, threads):
    """Solve the N-point quantization problem for the configured measure."""
    cfg = load_config(config_path, seed=seed, out=out, threads=threads)
    if n_sites is None:
        n_sites = cfg["N_list"][-1]
    nu = GridSpec.from_json(cfg["measure"]).build()
    q = solve_quantization(nu, int(n_sites), float(cfg["alpha"]),
                           solver_config(cfg))
    rid = run_id({**cfg, "cmd": "quantize", "N": int(n_sites)})
    base = Path(cfg["out"]) / rid
    _write(base / "quantizer.json", q.dumps() + "\n")
    _write(base / "quantizer.svg", render.render_quantizer(q))
    _write(base / "basins.csv", _basin_csv(q))
    click.echo(repr(float(q.total_cost)))


def _basin_csv(q):
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["site", "mass", "diameter", "density", "cost", "cost_scaled"])
    for i, row in enumerate(asymptotics.basin_stats(q)):
        w.writerow([i] + [repr(x) for x in row])
    return buf.getvalue()


def _landscape_csv(q):
    import csv
    import io

    z = q.sink_z()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sink", "coords", "mass", "site", "z"])
    for j in range(q.nu.n_atoms):
        w.writerow([
            j,
            ";".join(repr(float(c)) for c in q.nu.points[j]),
            repr(float(q.nu.masses[j])),
            int(q.assignment[j]),
            repr(float(z[j])),
        ])
    return buf.getvalue()


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
@click.option("--threads", type=int, default=None)
@click.option("--debug-planted", type=float, default=None,
              help="skip solving; inject costs N^slope and fit")
def cmd_sweep(config_path, seed, out, threads, debug_planted):
    """Run an N-sweep and write all enabled reports."""
    cfg = load_config(config_path, seed=seed, out=out, threads=threads)
    if len(cfg["N_list"]) < 3:
        _fail("config", "sweep needs at least 3 N values")
    rid = run_id({**cfg, "cmd": "sweep", "planted": debug_planted})
    base = Path(cfg["out"]) / rid
    alpha = float(cfg["alpha"])
    if debug_planted is not None:
        pts = [(n, float(n) ** debug_planted) for n in cfg["N_list"]]
        rep = asymptotics.scaling_fit_points(pts, alpha=alpha,
                                             d=int(cfg["dimension"]))
        _write(base / "scaling.csv", rep.csv())
        click.echo("slope %r" % rep.fitted_slope)
        click.echo("c_estimate %r" % rep.c_estimate)
        return
    grid = GridSpec.from_json(cfg["measure"])
    nu = grid.build()
    quantizers = asymptotics.sweep(nu, alpha, cfg["N_list"], solver_config(cfg))
    toggles = cfg.get("reports", {})
    for n, q in zip(cfg["N_list"], quantizers):
        _write(base / ("quantizer_N%04d.json" % n), q.dumps() + "\n")
        _write(base / ("quantizer_N%04d.svg" % n), render.render_quantizer(q))
        _write(base / ("landscape_N%04d.csv" % n), _landscape_csv(q))
    rep = None
    if toggles.get("scaling", True):
        rep = asymptotics.scaling_fit(quantizers, cfg["N_list"])
        _write(base / "scaling.csv", rep.csv())
        _write(base / "scaling.svg", render.render_scaling(rep))
    if toggles.get("delone", True):
        _write(base / "delone.csv", asymptotics.delone_report(quantizers).csv())
    if toggles.get("density", True):
        try:
            dep = asymptotics.density_compare(quantizers, grid, alpha)
            _write(base / "density.csv", dep.csv())
        except ValueError as exc:
            log.info("density report skipped: %s", exc)
    if toggles.get("basins", True):
        for n, q in zip(cfg["N_list"], quantizers):
            _write(base / ("basins_N%04d.csv" % n), _basin_csv(q))
    if rep is not None:
        click.echo("slope %r" % rep.fitted_slope)
        click.echo("c_estimate %r" % rep.c_estimate)
    else:
        click.echo("cost %r" % quantizers[-1].total_cost)


@main.command("render")
@click.argument("dump", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None)
def cmd_render(dump, out):
    """Re-render an SVG from a network or quantizer JSON dump."""
    _setup_logging()
    try:
        with open(dump) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail("parse", "%s: %s" % (dump, exc))
    if "nodes" in doc:
        net = TransportNetwork.from_json(doc)
        svg = render.render_network(net)
    elif "sites" in doc:
        _fail("unsupported",
              "quantizer dumps render at sweep time; re-render needs the "
              "measure, use 'sweep'")
    else:
        _fail("parse", "%s: unknown dump type" % dump)
    target = Path(out) if out else Path(dump).with_suffix(".svg")
    _write(target, svg)
    click.echo(str(target))


@main.command("validate")
@click.argument("dump", type=click.Path(exists=True))
def cmd_validate(dump):
    """Schema-check a network, quantizer or measure JSON dump."""
    try:
        with open(dump) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        _fail("parse", "%s: %s" % (dump, exc))
    try:
        if "nodes" in doc:
            TransportNetwork.from_json(doc).validate()
            kind = "network"
        elif "sites" in doc:
            _validate_quantizer_doc(doc)
            kind = "quantizer"
        elif "atoms" in doc:
            DiscreteMeasure.from_json(doc)
            kind = "measure"
        else:
            raise ValueError("unknown dump type")
    except (ValueError, KeyError, TypeError) as exc:
        _fail("schema", "%s: %s" % (dump, exc))
    click.echo("ok %s" % kind)


def _validate_quantizer_doc(doc):
    for key in ("alpha", "N", "sites", "assignment", "cost", "per_basin"):
        if key not in doc:
            raise ValueError("missing field %r" % key)
    if len(doc["sites"]) != int(doc["N"]):
        raise ValueError("N does not match number of sites")
    if len(doc["per_basin"]) != len(doc["sites"]):
        raise ValueError("per_basin does not match sites")
    n_sites = len(doc["sites"])
    for a in doc["assignment"]:
        if not (0 <= int(a) < n_sites):
            raise ValueError("assignment index out of range")
    for s in doc["sites"]:
        if "x" not in s or "mass" not in s:
            raise ValueError("site missing 'x' or 'mass'")
    total = sum(float(s["mass"]) for s in doc["sites"])
    if not np.isfinite(total):
        raise ValueError("non-finite site mass")


if __name__ == "__main__":
    main()
