"""Command line front end: speed sweeps, analysis, simulation, export.

Every default comes from the layered config (see ``config.py``); flags given
on the command line win over a ``--config`` file, which wins over the
packaged defaults.  Each subcommand exits nonzero iff the requested action
failed; a sweep persists whatever it solved even when some speeds fail.
"""

import logging
import sys
from pathlib import Path

import click

from . import analysis, plots
from .config import apply_overrides, configure_logging, load_config, solve_options_from
from .gaits import GAITS, gait_by_name
from .io import (
    GaitLibrary,
    LibraryError,
    write_metrics_csv,
    write_momentum_csv,
    write_trajectory_csv,
)
from .model import default_model, load_model

log = logging.getLogger(__name__)

GAIT_CHOICES = click.Choice(sorted(GAITS), case_sensitive=False)


def _model_from(cfg):
    path = cfg.get("model")
    return load_model(path) if path else default_model()


def _metrics_rows(lib, model):
    rows = []
    for gait_name, speed in lib.entries():
        sol = lib.get(gait_name, speed)
        rows.append(analysis.compute_metrics(model, sol).as_row())
    return rows


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="YAML file overriding the built-in defaults.")
@click.pass_context
def main(ctx, config_path):
    """Energy-optimal pronking and bounding gaits for a planar quadruped."""
    cfg = load_config(config_path)
    ctx.obj = cfg
    configure_logging(cfg)


@main.command()
@click.option("--gait", "gaits", type=GAIT_CHOICES, multiple=True,
              help="Gait family to sweep (repeatable). Default from config.")
@click.option("--v-min", type=float, default=None, help="Lowest speed, m/s.")
@click.option("--v-max", type=float, default=None, help="Highest speed, m/s.")
@click.option("--step", type=float, default=None, help="Speed grid spacing, m/s.")
@click.option("--seed-speed", type=float, default=None,
              help="Speed the continuation starts from.")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Robot parameter YAML (default: packaged data).")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Output directory for the library and metrics.")
@click.pass_obj
def sweep(cfg, gaits, v_min, v_max, step, seed_speed, model_path, out_dir):
    """Solve a gait family across a speed range and persist the results.

    Writes ``library.json`` and ``metrics.csv`` into the output directory,
    updating them after every solved speed so partial results survive an
    interrupted run.  Exits nonzero only if no requested speed solved.
    """
    from .sweep import speed_sweep

    cfg = apply_overrides(cfg, {
        "sweep.v_min": v_min, "sweep.v_max": v_max, "sweep.step": step,
        "sweep.seed_speed": seed_speed, "model": model_path,
        "output.directory": out_dir,
    })
    sw = cfg["sweep"]
    gait_names = [g.lower() for g in gaits] or [str(sw["gait"])]
    model = _model_from(cfg)
    opts = solve_options_from(cfg)

    lo, hi, h = float(sw["v_min"]), float(sw["v_max"]), float(sw["step"])
    if not (h > 0 and hi >= lo):
        raise click.BadParameter("need step > 0 and v-max >= v-min")
    n = int(round((hi - lo) / h))
    speeds = [round(lo + i * h, 10) for i in range(n + 1)]

    out = Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    lib = GaitLibrary(model)
    lib_path, csv_path = out / "library.json", out / "metrics.csv"

    def checkpoint(speed, sol):
        lib.add(sol, opts.transcription)
        lib.save(lib_path)
        write_metrics_csv(csv_path, _metrics_rows(lib, model))

    solved = failed = 0
    for name in gait_names:
        result = speed_sweep(model, name, speeds, opts,
                             seed_speed=float(sw["seed_speed"]),
                             progress=checkpoint)
        solved += len(result.solutions)
        failed += len(result.failures)
        for v, why in sorted(result.failures.items()):
            log.warning("%s @ %.2f m/s failed: %s", name, v, why)
    click.echo(f"solved {solved}/{solved + failed} speed points -> {lib_path}")
    if solved == 0:
        sys.exit(1)


@main.command()
@click.option("--library", "lib_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--speed", type=float, required=True, help="Stored speed, m/s.")
@click.pass_obj
def analyze(cfg, lib_path, speed):
    """Print stride metrics for every gait stored at one speed."""
    model, lib = _load_library(lib_path)
    hits = [(g, s) for g, s in lib.entries() if abs(s - speed) < 1e-9]
    if not hits:
        stored = sorted({s for _, s in lib.entries()})
        click.echo(f"no entry at {speed} m/s; stored speeds: {stored}", err=True)
        sys.exit(1)
    for gait_name, s in sorted(hits):
        sol = lib.get(gait_name, s)
        m = analysis.compute_metrics(model, sol)
        click.echo(f"-- {gait_name} @ {s:g} m/s --")
        for key, val in m.as_row().items():
            if isinstance(val, float):
                click.echo(f"  {key:32s} {val: .6g}")
            else:
                click.echo(f"  {key:32s} {val}")


@main.command()
@click.option("--library", "lib_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--gait", type=GAIT_CHOICES, required=True)
@click.option("--speed", type=float, required=True)
@click.option("--strides", type=int, default=None, help="Strides to integrate.")
@click.pass_obj
def simulate(cfg, lib_path, gait, speed, strides):
    """Replay a stored gait through the event-driven simulator.

    Reports the per-stride return-map residual and whether the realized
    event sequence matches the gait automaton; exits nonzero if the
    integration fails or the sequence disagrees.
    """
    from .simulator import cross_validate

    strides = strides if strides is not None else int(cfg["simulate"]["strides"])
    model, lib = _load_library(lib_path)
    try:
        sol = lib.get(gait.lower(), speed)
    except KeyError:
        click.echo(f"library has no {gait} entry at {speed} m/s", err=True)
        sys.exit(1)
    try:
        report = cross_validate(model, sol, strides=strides)
    except Exception as exc:
        click.echo(f"simulation failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"event sequence ok: {report.events_match}")
    for k, r in enumerate(report.stride_residuals):
        click.echo(f"stride {k + 1}: return-map residual {r:.3e}")
    if not report.events_match:
        sys.exit(1)


@main.command()
@click.option("--library", "lib_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", "kinds", required=True, multiple=True,
              type=click.Choice(["metrics_csv", "trajectories_csv",
                                 "solutions_json", "plots_svg"]))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.pass_obj
def export(cfg, lib_path, kinds, out_dir):
    """Write delimited tables, solution JSON, or SVG figures from a library."""
    cfg = apply_overrides(cfg, {"output.directory": out_dir})
    out = Path(cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    model, lib = _load_library(lib_path)

    failures = []
    for kind in dict.fromkeys(kinds):
        try:
            written = _export_one(kind, lib, model, out)
            for p in written:
                click.echo(f"wrote {p}")
        except Exception as exc:
            log.exception("export %s failed", kind)
            failures.append(f"{kind}: {exc}")
    for msg in failures:
        click.echo(f"export failed -> {msg}", err=True)
    if failures:
        sys.exit(1)


def _load_library(path):
    try:
        lib = GaitLibrary.load(path)
    except LibraryError as exc:
        click.echo(f"library rejected: {exc}", err=True)
        sys.exit(1)
    return lib.model, lib


def _export_one(kind, lib, model, out: Path):
    if kind == "metrics_csv":
        path = out / "metrics.csv"
        write_metrics_csv(path, _metrics_rows(lib, model))
        return [path]
    if kind == "trajectories_csv":
        written = []
        for gait_name, speed in lib.entries():
            path = out / f"trajectory_{gait_name}_{speed:g}.csv"
            write_trajectory_csv(path, lib.get(gait_name, speed))
            written.append(path)
        return written
    if kind == "solutions_json":
        path = out / "solutions.json"
        lib.save(path)
        return [path]
    if kind == "plots_svg":
        return _export_plots(lib, model, out)
    raise ValueError(kind)


def _export_plots(lib, model, out: Path):
    written = []
    rows = _metrics_rows(lib, model)
    if rows:
        written.append(plots.speed_curves(rows, out / "speed_curves.svg"))
    for gait_name in lib.gaits():
        speeds = lib.speeds(gait_name)
        picks = sorted({min(speeds, key=lambda s: abs(s - want))
                        for want in (0.5, 2.0, 3.5)})
        metrics = [analysis.compute_metrics(model, lib.get(gait_name, s))
                   for s in picks]
        written.append(plots.joint_work_bars(
            metrics, out / f"work_joints_{gait_name}.svg"))
        mid = min(speeds, key=lambda s: abs(s - 2.0))
        sol = lib.get(gait_name, mid)
        gait = gait_by_name(gait_name)
        t, groups = analysis.momentum_trace(model, sol, gait)
        boundaries = []
        acc = 0.0
        for traj in sol.domains[:-1]:
            acc += traj.duration
            boundaries.append(acc)
        written.append(plots.momentum_traces(
            t, groups, out / f"momentum_{gait_name}_{mid:g}.svg",
            title=f"{gait_name} @ {mid:g} m/s", boundaries=boundaries))
        path = out / f"tiles_{gait_name}_{mid:g}.svg"
        written.append(plots.gait_tiles(sol, gait, path,
                                        title=f"{gait_name} @ {mid:g} m/s"))
        mom_csv = out / f"momentum_{gait_name}_{mid:g}.csv"
        write_momentum_csv(mom_csv, t, groups)
        written.append(mom_csv)
    return written


if __name__ == "__main__":
    main()
