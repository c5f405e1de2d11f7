"""Main CLI entry point for thzchan."""

import sys
from pathlib import Path

import click
from rich.table import Table

from . import __version__, db
from .analysis import analyze_sweep
from .config import (
    CONFIG_ENV_VAR,
    Settings,
    load_settings,
    resolve_geometry,
    resolve_params,
    run_config,
    system_params,
)
from .executor import run_calibration, run_checks, run_montecarlo, run_tables
from .raytracer import paths_to_rows, trace
from .scenario import ScenarioKind
from .sounding import full_scan, read_sweep_csv, write_sweep_csv
from .stochastic import drop_seeds, generate
from .utils import (
    console,
    format_calibration_detail,
    format_checks_table,
    format_ple_table,
    format_summary_table,
    print_error,
    print_success,
    print_warning,
    setup_logging,
    write_csv,
    write_json,
)


SCENARIOS = click.Choice([k.value for k in ScenarioKind])


def _settings(ctx: click.Context) -> Settings:
    if "settings" not in ctx.obj:
        ctx.obj["settings"] = load_settings(ctx.obj.get("config_path"))
    return ctx.obj["settings"]


def _fail(exc: Exception) -> None:
    print_error(str(exc))
    sys.exit(1)


def _single_drop(ctx: click.Context, scenario: str, seed: int | None, distance: float | None):
    """Geometry, parameters and realization of drop 0 of a run."""
    settings = _settings(ctx)
    cfg = run_config(settings, scenario=scenario, seed=seed, n_drops=1,
                     distances_m=(distance,) if distance is not None else None)
    params = resolve_params(cfg, settings)
    system = system_params(cfg.scenario, settings)
    base = resolve_geometry(cfg, settings)
    geom = base.at_distance(cfg.distances_m[0]) if cfg.distances_m else base
    _, chan_seed, sound_seed = drop_seeds(cfg.seed, 0)
    return cfg, params, system, geom, generate(params, geom, chan_seed, system), sound_seed


@click.group()
@click.version_option(version=__version__)
@click.option("--config", "config_path", type=click.Path(dir_okay=False), envvar=CONFIG_ENV_VAR,
              help=f"YAML config file (default: ${CONFIG_ENV_VAR})")
@click.option("-v", "--verbose", count=True, help="-v for info, -vv for debug logging")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: int):
    """thzchan - 201-209 GHz indoor channel simulator."""
    setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@cli.command()
def init():
    """Initialize a result store in the current directory."""
    if db.store_exists():
        print_warning("Result store already exists in this directory")
        return

    store_path = db.init_store()
    print_success(f"Result store initialized at {store_path}")


@cli.command("generate")
@click.option("-s", "--scenario", type=SCENARIOS, default="meeting_room", show_default=True)
@click.option("--seed", type=int, help="Master seed")
@click.option("-d", "--distance", type=float, help="Tx-Rx distance in m (default: preset placement)")
@click.option("-o", "--out", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.pass_context
def generate_cmd(ctx: click.Context, scenario: str, seed: int | None, distance: float | None, out: str, fmt: str):
    """Generate one channel realization."""
    try:
        _, params, _, geom, realization, _ = _single_drop(ctx, scenario, seed, distance)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    out_dir = Path(out)
    if fmt == "json":
        path = write_json(out_dir / "realization.json", realization.to_dict())
    else:
        path = write_csv(out_dir / "realization.csv", realization.to_rows())
    if params.deterministic:
        write_csv(out_dir / "traced_paths.csv", paths_to_rows(trace(geom, params.max_reflection_order), params.f_ref_ghz))

    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("#", style="dim")
    table.add_column("Origin")
    table.add_column("ToA (ns)", justify="right")
    table.add_column("AoA (°)", justify="right")
    table.add_column("Power share", justify="right")
    for c in realization.clusters:
        table.add_row(str(c.index), c.origin.value, f"{c.toa_ns:.2f}", f"{c.aoa_az_deg:.1f}", f"{c.power_frac:.4f}")
    console.print(table)
    print_success(f"Wrote {len(realization.clusters)} clusters to {path}")


@cli.command()
@click.option("-s", "--scenario", type=SCENARIOS, default="meeting_room", show_default=True)
@click.option("--seed", type=int, help="Master seed")
@click.option("-d", "--distance", type=float, help="Tx-Rx distance in m")
@click.option("-o", "--out", type=click.Path(file_okay=False), default="out", show_default=True)
@click.option("--noise/--no-noise", default=True, show_default=True)
@click.pass_context
def sound(ctx: click.Context, scenario: str, seed: int | None, distance: float | None, out: str, noise: bool):
    """Sound a generated channel over the full rotation grid."""
    try:
        _, _, system, _, realization, sound_seed = _single_drop(ctx, scenario, seed, distance)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    sweep = full_scan(realization, system, sound_seed, noise=noise)
    out_dir = Path(out)
    write_json(out_dir / "realization.json", realization.to_dict())
    path = write_sweep_csv(sweep, out_dir / "sweep.csv")
    print_success(f"Wrote {sweep.n_directions} directions x {system.n_sweep} points to {path}")


@cli.command()
@click.argument("sweep_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--min-pts", type=int, default=5, show_default=True)
@click.option("--eps", type=float, default=0.05, show_default=True)
@click.option("--zeta", type=float, default=5.0, show_default=True)
@click.option("--offset-step", type=float, default=1.0, show_default=True, help="ASA reference offset step in degrees")
@click.option("-o", "--out", type=click.Path(file_okay=False), default="out", show_default=True)
def analyze(sweep_file: str, min_pts: int, eps: float, zeta: float, offset_step: float, out: str):
    """Analyze a sweep file: PDAP, MPCs, clusters and spreads."""
    try:
        sweep = read_sweep_csv(Path(sweep_file))
        result = analyze_sweep(sweep, min_pts=min_pts, eps=eps, zeta=zeta, offset_step=offset_step)
    except ValueError as e:
        _fail(e)

    out_dir = Path(out)
    write_csv(out_dir / "pdap.csv", result.pdap.to_rows(), ["delay_ns", "az_deg", "el_deg", "power_db"])
    write_csv(out_dir / "mpcs.csv", result.mpcs.to_rows(), ["toa_ns", "aoa_az_deg", "aoa_el_deg", "power_db", "label"])
    stats = result.stats.to_dict() if result.stats else {}
    write_json(out_dir / "stats.json", stats)

    if result.stats is None:
        print_warning("No MPCs above the noise threshold")
        return
    console.print(f"[bold cyan]MPCs:[/] {result.stats.n_mpcs}  [bold cyan]Clusters:[/] {result.stats.n_clusters}")
    console.print(f"[bold cyan]RMS DS:[/] {result.stats.ds_ns:.3f} ns  [bold cyan]RMS ASA:[/] {result.stats.asa_deg:.2f}°")


@cli.command("fit-pl")
@click.option("-s", "--scenario", type=SCENARIOS, default="meeting_room", show_default=True)
@click.option("-d", "--distance", "distances", type=float, multiple=True, help="Distances in m (repeatable)")
@click.option("--seed", type=int, help="Master seed")
@click.option("-o", "--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("--free-space", is_flag=True, help="Sound LoS-only channels")
@click.option("-j", "--jobs", type=int, help="Worker processes")
@click.pass_context
def fit_pl(ctx: click.Context, scenario: str, distances: tuple[float, ...], seed: int | None,
           out: str | None, free_space: bool, jobs: int | None):
    """Fit best-direction and omni-directional CI models over a distance sweep."""
    try:
        settings = _settings(ctx)
        cfg = run_config(settings, scenario=scenario, seed=seed, distances_m=distances or None,
                         out_dir=out, free_space=free_space or None, jobs=jobs)
        rows = run_tables(cfg, settings, show_progress=True)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    console.print(format_ple_table(rows))
    print_success(f"Path loss data written to {cfg.out_dir}")


@cli.command()
@click.option("-s", "--scenario", "scenarios", type=SCENARIOS, multiple=True, help="Scenario (repeatable; default: all)")
@click.option("-n", "--drops", type=int, default=500, show_default=True, help="Monte-Carlo drops per evaluation")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=0.03, show_default=True, help="Tolerance on mean log DS/ASA")
@click.option("--reset", is_flag=True, help="Delete stored calibrations of each scenario first")
@click.pass_context
def calibrate(ctx: click.Context, scenarios: tuple[str, ...], drops: int, seed: int, tol: float, reset: bool):
    """Calibrate the free parameters against the scenario spread targets."""
    if not db.store_exists():
        print_error("No result store found. Run 'thzchan init' to create one.")
        sys.exit(1)

    for scenario in scenarios or [k.value for k in ScenarioKind]:
        if reset:
            removed = db.delete_calibrations(scenario)
            console.print(f"Removed {removed} stored calibration(s) of {scenario}")
        try:
            result = run_calibration(ScenarioKind(scenario), _settings(ctx), n_mc=drops, seed=seed,
                                     tol=tol, show_progress=True)
        except (ValueError, FileNotFoundError) as e:
            _fail(e)
        console.print(format_calibration_detail(result.to_dict()))
        if not result.converged:
            print_warning(f"{scenario}: best parameters stored, but targets were not reached")


@cli.command()
@click.option("-s", "--scenario", type=SCENARIOS, help="Scenario")
@click.option("-n", "--drops", type=int, help="Number of drops")
@click.option("--seed", type=int, help="Master seed")
@click.option("-d", "--distance", "distances", type=float, multiple=True, help="Fixed distances in m (repeatable)")
@click.option("-o", "--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("-j", "--jobs", type=int, help="Worker processes")
@click.option("--check", is_flag=True, help="Exit with status 2 when acceptance tolerances are violated")
@click.option("--calibrated", is_flag=True, help="Use the latest stored calibration")
@click.option("--sounding", is_flag=True, help="Analyze sounded sweeps instead of ideal subpaths")
@click.option("--free-space", is_flag=True, help="LoS-only channels")
@click.option("--deterministic/--no-deterministic", default=None, help="Override the ray-traced part")
@click.pass_context
def montecarlo(ctx: click.Context, scenario, drops, seed, distances, out, jobs, check, calibrated,
               sounding, free_space, deterministic):
    """Run a Monte-Carlo batch and summarize spreads, cluster statistics and PLEs."""
    try:
        settings = _settings(ctx)
        cfg = run_config(
            settings, scenario=scenario, n_drops=drops, seed=seed, distances_m=distances or None,
            out_dir=out, jobs=jobs, check=check or None, calibrated=calibrated or None,
            sounding=sounding or None, free_space=free_space or None, deterministic=deterministic,
        )
        summary = run_montecarlo(cfg, settings, show_progress=True)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    console.print(format_summary_table(summary))
    print_success(f"Results written to {Path(cfg.out_dir) / cfg.scenario.value}")
    if cfg.check:
        console.print(format_checks_table(summary["checks"]))
        if not summary["passed"]:
            sys.exit(2)


@cli.command()
@click.option("-s", "--scenario", "scenarios", type=SCENARIOS, multiple=True, help="Scenario (repeatable; default: all)")
@click.option("-d", "--distance", "distances", type=float, multiple=True, help="Distances in m (repeatable)")
@click.option("--seed", type=int, help="Master seed")
@click.option("-o", "--out", type=click.Path(file_okay=False), help="Output directory")
@click.option("-j", "--jobs", type=int, help="Worker processes")
@click.option("--free-space", is_flag=True, help="LoS-only channels")
@click.pass_context
def tables(ctx: click.Context, scenarios, distances, seed, out, jobs, free_space):
    """Write the PLE table and the per-scenario parameter table."""
    kinds = [ScenarioKind(s) for s in scenarios] or list(ScenarioKind)
    try:
        settings = _settings(ctx)
        cfg = run_config(settings, scenario=kinds[0], seed=seed, distances_m=distances or None,
                         out_dir=out, jobs=jobs, free_space=free_space or None)
        rows = run_tables(cfg, settings, scenarios=kinds, show_progress=True)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    console.print(format_ple_table(rows))
    print_success(f"Tables written to {cfg.out_dir}")


@cli.command()
@click.option("-n", "--drops", type=int, help="Drops per stored calibration")
@click.option("--draws", type=int, default=100_000, show_default=True, help="Samples per distribution check")
@click.option("--seed", type=int, help="Master seed")
@click.option("-o", "--out", type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def check(ctx: click.Context, drops: int | None, draws: int, seed: int | None, out: str | None):
    """Run the acceptance checks; exits with status 2 on any failure."""
    try:
        settings = _settings(ctx)
        cfg = run_config(settings, n_drops=drops, seed=seed, out_dir=out)
        checks = run_checks(cfg, settings, n_draws=draws, show_progress=True)
    except (ValueError, FileNotFoundError) as e:
        _fail(e)

    console.print(format_checks_table(checks))
    failed = [c for c in checks if not c["passed"]]
    if failed:
        print_error(f"{len(failed)} of {len(checks)} checks failed")
        sys.exit(2)
    print_success(f"All {len(checks)} checks passed")


if __name__ == "__main__":
    cli()
