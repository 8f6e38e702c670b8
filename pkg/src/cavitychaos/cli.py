"""Command-line front end: validated experiment configs in, data files out.

Every subcommand follows the same shape::

    cavity-chaos <experiment> --config <file> [--threads N] [--out <path>]

The config is a JSON document validated against the bundled schema before
anything runs; a malformed config exits nonzero without touching the output
path.  Outputs carry the full resolved configuration and its hash.
"""
from __future__ import annotations

import importlib.resources
import json
import math
import sys

import click
import jsonschema
import numpy as np

from . import __version__, _kernels as _k
from .chaos import (AxisSpec, LyapunovConfig, lyapunov_map, poincare_section,
                    zout_zin_scan)
from .dynamics import RhsKind
from .integrator import system_arrays
from .io import config_hash, write_records
from .model import (AtomPreparation, FieldPreparation, ModelParams,
                    default_n_max, prepare_initial_state)
from .scattering import (exit_scan, exit_time_histogram, tail_exponent,
                         tail_exponential)


def load_schema():
    text = importlib.resources.files("cavitychaos").joinpath("schema.json")
    return json.loads(text.read_text())


def load_config(path):
    """Parse and validate; raises click.ClickException with location context."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise click.ClickException(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}")
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        where = "/".join(str(part) for part in err.absolute_path) or "(root)"
        raise click.ClickException(f"{path}: invalid config at {where}: "
                                   f"{err.message}")
    kind = cfg["experiment"]
    if kind not in cfg:
        raise click.ClickException(
            f"{path}: invalid config: missing the {kind!r} block required by "
            f"experiment={kind!r}")
    return cfg


def _field(cfg):
    block = cfg["field"]
    if block["kind"] == "fock":
        return FieldPreparation.fock(block["n"])
    if block["kind"] == "coherent":
        return FieldPreparation.coherent(block["mean"])
    return FieldPreparation.bose_einstein(block["mean"])


def _atom(cfg):
    block = cfg["atom"]
    if block["kind"] == "excited":
        return AtomPreparation.excited()
    return AtomPreparation.superposition(block["z_in"])


def _resolve(cfg):
    """Model objects plus the resolved defaults echoed into metadata."""
    field = _field(cfg)
    if "n_max" in cfg["model"]:
        n_max = cfg["model"]["n_max"]
    elif field.kind == "fock":
        n_max = max(field.n, 1)
    else:
        n_max = default_n_max(field)
    params = ModelParams(delta=cfg["model"]["delta"],
                         alpha=cfg["model"]["alpha"], n_max=n_max)
    integ = cfg.get("integrator", {})
    tol = {"rel_tol": integ.get("rel_tol", 1e-10),
           "abs_tol": integ.get("abs_tol", 1e-12),
           "max_step": integ.get("max_step")}
    return params, field, _atom(cfg), tol


def _metadata(cfg, params, tol, extra=None):
    meta = {
        "artifact_version": __version__,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "resolved": {"n_max": params.n_max, **tol},
    }
    if extra:
        meta["resolved"].update(extra)
    return meta


def _run_rabi(cfg, params, field, atom, tol, threads):
    block = cfg["rabi"]
    x0 = block.get("x0", 0.0)
    p0 = block.get("p0", 50.0)
    samples = block.get("samples", 2001)
    init = prepare_initial_state(field, atom, x0, p0, params.n_max)
    if field.kind == "fock" and field.n >= 1:
        kind, fock_n = RhsKind.FOCK_REDUCED, field.n
    else:
        kind, fock_n = RhsKind.HYBRID_LADDER, None
    y0, coef, mode, fconst, _ = system_arrays(kind, init, params,
                                              fock_n=fock_n)
    max_step = tol["max_step"] or 0.05 / math.sqrt(init.n_triples)
    t_eval = np.linspace(0.0, block["t_max"], samples)
    out = np.empty((samples, y0.size))
    status = _k.integrate_samples(y0, coef, params.delta, params.alpha, mode,
                                  fconst, tol["rel_tol"], tol["abs_tol"],
                                  max_step, 0.0, t_eval, out)
    if status != _k.STATUS_OK:
        raise click.ClickException("integration failed (step underflow)")
    n_t = coef.size
    table = {"tau": t_eval,
             "x": out[:, 0],
             "p": out[:, 1],
             "z": np.sum(out[:, 2 + 2 * n_t:], axis=1)}
    return table, {"x0": x0, "p0": p0, "samples": samples}


def _run_lyapmap(cfg, params, field, atom, tol, threads):
    block = cfg["lyapmap"]
    axes = tuple(AxisSpec(name=b["name"], lo=b["lo"], hi=b["hi"],
                          count=b["count"], scale=b.get("scale", "linear"))
                 for b in (block["axis1"], block["axis2"]))
    lyap = block.get("lyapunov", {})
    config = LyapunovConfig(d0=lyap.get("d0", 1e-8),
                            renorm_interval=lyap.get("renorm_interval", 1.0),
                            t_total=lyap.get("t_total", 2e4),
                            t_discard=lyap.get("t_discard"),
                            rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"])
    x0 = block.get("x0", 0.0)
    p0 = block.get("p0", 50.0)
    grid = lyapunov_map(axes, params, field, atom, x0, p0, config,
                        threads=threads)
    return grid, {"x0": x0, "p0": p0, "d0": config.d0,
                  "renorm_interval": config.renorm_interval,
                  "t_total": config.t_total,
                  "t_discard": config.resolved_discard()}


def _run_poincare(cfg, params, field, atom, tol, threads):
    block = cfg["poincare"]
    x0 = block.get("x0", 0.0)
    fock_n = field.n if field.kind == "fock" and field.n >= 1 else None
    inits = [prepare_initial_state(field, atom, x0, p, params.n_max)
             for p in block["momenta"]]
    points = poincare_section(inits, params, block["t_max"], fock_n=fock_n,
                              rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"],
                              threads=threads)
    table = {"x": [pt.x for pt in points],
             "p": [pt.p for pt in points],
             "trajectory_id": [pt.trajectory_id for pt in points]}
    return table, {"x0": x0, "t_max": block["t_max"]}


def _run_zoutzin(cfg, params, field, atom, tol, threads):
    block = cfg["zoutzin"]
    if field.kind != "fock" or field.n < 1:
        raise click.ClickException(
            "the inversion transfer scan needs a Fock field with n >= 1")
    x0 = block.get("x0", 0.0)
    p0 = block.get("p0", 50.0)
    z_in = np.linspace(block["z_in_lo"], block["z_in_hi"], block["steps"])
    z_out = zout_zin_scan(z_in, params, field.n, x0, p0, block["tau_obs"],
                          rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"],
                          threads=threads)
    return ({"z_in": z_in, "z_out": z_out},
            {"x0": x0, "p0": p0, "tau_obs": block["tau_obs"]})


def _scan_block(block, params, field, atom, tol, threads):
    grid = np.linspace(block["p_lo"], block["p_hi"],
                       block.get("resolution", block.get("samples", 2000)))
    return exit_scan(grid, params, field, atom,
                     t_max=block.get("t_max", 2e4),
                     rel_tol=tol["rel_tol"], abs_tol=tol["abs_tol"],
                     threads=threads, x0=block.get("x0", 0.0),
                     max_step=tol["max_step"])


def _run_fractal(cfg, params, field, atom, tol, threads):
    block = cfg["fractal"]
    intervals = [(block["p_lo"], block["p_hi"])]
    intervals += [tuple(iv) for iv in block.get("zoom", [])]
    table = {"level": [], "p0": [], "T": [], "detector": [], "m": [],
             "trapped": [], "conservation_ok": [], "w_drift": [],
             "r_drift": [], "failed": []}
    for level, (lo, hi) in enumerate(intervals):
        sub = dict(block, p_lo=lo, p_hi=hi)
        for rec in _scan_block(sub, params, field, atom, tol, threads):
            table["level"].append(level)
            for name in ("p0", "T", "detector", "m", "trapped",
                         "conservation_ok", "w_drift", "r_drift", "failed"):
                table[name].append(getattr(rec, name))
    return table, {"t_max": block.get("t_max", 2e4),
                   "resolution": block.get("resolution", 2000),
                   "intervals": [list(iv) for iv in intervals]}


def _run_exitstats(cfg, params, field, atom, tol, threads):
    block = cfg["exitstats"]
    records = _scan_block(block, params, field, atom, tol, threads)
    hist = exit_time_histogram(records, bins=block.get("bins", 60),
                               scale=block.get("scale", "log"),
                               t_range=(tuple(block["t_range"])
                                        if "t_range" in block else None))
    extra = {"t_max": block.get("t_max", 2e4), "samples": block["samples"],
             "trapped_fraction": hist.trapped_fraction}
    if "fit_range" in block:
        fit_fn = (tail_exponential if block.get("fit_model") == "exponential"
                  else tail_exponent)
        fit = fit_fn(hist, tuple(block["fit_range"]))
        extra["tail_fit"] = {"model": fit.model, "slope": fit.slope,
                             "intercept": fit.intercept,
                             "residual": fit.residual, "n_bins": fit.n_bins}
    return hist, extra


_RUNNERS = {
    "rabi": _run_rabi,
    "lyapmap": _run_lyapmap,
    "poincare": _run_poincare,
    "zoutzin": _run_zoutzin,
    "fractal": _run_fractal,
    "exitstats": _run_exitstats,
}


def run(cfg, threads=1, out_path=None):
    """Dispatch a validated config to its experiment and write the output.

    Returns the written path.  Raises click.ClickException on fatal errors;
    per-point soft failures are recorded inside the output instead.
    """
    kind = cfg["experiment"]
    params, field, atom, tol = _resolve(cfg)
    result, extra = _RUNNERS[kind](cfg, params, field, atom, tol, threads)
    out_block = cfg.get("output", {})
    fmt = out_block.get("format", "csv")
    path = out_path or out_block.get("path") or f"{kind}.{fmt}"
    meta = _metadata(cfg, params, tol, extra)
    if fmt == "json":
        write_records(result, path, fmt="json", metadata=meta)
    else:
        write_records(result, path, fmt="csv")
        with open(f"{path}.meta.json", "w") as fh:
            json.dump(meta, fh, indent=1)
            fh.write("\n")
    return path


@click.group()
@click.version_option(version=__version__)
def main():
    """Chaotic atom-photon dynamics in a single-mode cavity."""


def _experiment_command(kind):
    @click.option("--config", "config_path", required=True,
                  type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment configuration.")
    @click.option("--threads", default=1, show_default=True,
                  help="Worker thread cap; results are thread-count invariant.")
    @click.option("--out", "out_path", default=None, type=click.Path(),
                  help="Output file (overrides the config's output path).")
    def command(config_path, threads, out_path):
        cfg = load_config(config_path)
        if cfg["experiment"] != kind:
            raise click.ClickException(
                f"config declares experiment={cfg['experiment']!r}, "
                f"but the {kind!r} subcommand was invoked")
        path = run(cfg, threads=threads, out_path=out_path)
        click.echo(f"wrote {path}")

    command.__name__ = kind
    return command


main.command(name="rabi",
             help="Atomic inversion z(tau) time series.")(
    _experiment_command("rabi"))
main.command(name="lyapmap",
             help="Maximal Lyapunov exponent over a 2-D parameter grid.")(
    _experiment_command("lyapmap"))
main.command(name="poincare",
             help="Section points of a trajectory bundle.")(
    _experiment_command("poincare"))
main.command(name="zoutzin",
             help="Output inversion versus input inversion.")(
    _experiment_command("zoutzin"))
main.command(name="fractal",
             help="Exit-time scan over an injection-momentum interval.")(
    _experiment_command("fractal"))
main.command(name="exitstats",
             help="Exit-time distribution and tail fits.")(
    _experiment_command("exitstats"))


if __name__ == "__main__":
    sys.exit(main())
