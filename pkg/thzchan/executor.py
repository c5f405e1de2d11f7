"""Execution engine for thzchan runs: Monte-Carlo batches, path-loss tables and checks."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from . import __version__, db
from .analysis import (
    CNL_CATEGORIES,
    MpcSet,
    analyze_realization,
    analyze_sweep,
    ctf_to_cir,
    fit_cnl_points,
    fit_exponential,
    inter_cluster_delays,
    rms_asa,
)
from .config import (
    RunConfig,
    Settings,
    resolve_geometry,
    resolve_params,
    room_geometry,
    scenario_params,
    system_params,
)
from .models import create_record
from .pathloss import (
    CiModel,
    ci_eval,
    ci_fit,
    fit_reflection_loss,
    pl_best_los,
    pl_best_nlos,
    pl_omni,
    realization_reflection_losses,
    sweep_reflection_losses,
)
from .raytracer import RoomGeometry, hallway_geometry_check, sample_drop_geometry
from .scenario import (
    VALIDATION_LOG_ASA,
    VALIDATION_LOG_DS,
    ScenarioKind,
    ScenarioParams,
    SystemParams,
)
from .sounding import full_scan
from .stochastic import (
    CalibrationResult,
    CalibrationTargets,
    calibrate,
    drop_seeds,
    free_space_realization,
    generate,
    sample_cluster_delays,
    sample_num_clusters,
)
from .utils import err_console, write_csv, write_json, write_ndjson


logger = logging.getLogger(__name__)

DROP_FIELDS = [
    "index", "seed", "distance_m", "ds_ns", "asa_deg", "log_ds", "log_asa",
    "n_clusters", "n_mpcs", "pl_model_db", "pl_best_db", "pl_omni_db",
]


@dataclass(frozen=True)
class DropJob:
    """Everything a worker needs to simulate one drop."""

    params: ScenarioParams
    system: SystemParams
    base: RoomGeometry
    master_seed: int
    index: int
    distance_m: float | None = None
    sounding: bool = False
    free_space: bool = False
    analyze: bool = True


def simulate_drop(job: DropJob) -> dict[str, Any]:
    """Generate, optionally sound, and analyze one drop."""
    params = job.params
    geo_seed, chan_seed, sound_seed = drop_seeds(job.master_seed, job.index)
    if job.distance_m is None:
        geom = sample_drop_geometry(job.base, params.distance_range_m, np.random.default_rng(geo_seed))
    else:
        geom = job.base.at_distance(job.distance_m)

    if job.free_space:
        realization = free_space_realization(params, geom, chan_seed)
    else:
        realization = generate(params, geom, chan_seed, job.system)

    record: dict[str, Any] = {
        "index": job.index,
        "seed": chan_seed,
        "distance_m": realization.distance_m,
        "pl_model_db": realization.pl_omni_db,
        "pl_best_db": None,
        "pl_omni_db": None,
        "rl_db": [],
    }

    stats = None
    if job.sounding:
        sweep = full_scan(realization, job.system, sound_seed)
        record["pl_best_db"] = pl_best_los(sweep) if params.los else pl_best_nlos(sweep)
        record["pl_omni_db"] = pl_omni(sweep)
        if job.analyze:
            result = analyze_sweep(sweep)
            stats = result.stats
            record["rl_db"] = sweep_reflection_losses(result, realization, job.system.rx_hpbw_deg)
    elif job.analyze:
        stats = analyze_realization(realization, params.dynamic_range_db)
        record["rl_db"] = realization_reflection_losses(realization)

    if stats is None:
        record.update(ds_ns=None, asa_deg=None, log_ds=None, log_asa=None, n_clusters=0, n_mpcs=0,
                      gaps_ns=[], cnl_points=[])
    else:
        record.update(stats.to_dict())
        record["log_ds"] = stats.log_ds if stats.ds_ns > 0 else None
        record["log_asa"] = stats.log_asa if stats.asa_deg > 0 else None
    return record


def execute_drops(jobs: list[DropJob], n_jobs: int = 1, show_progress: bool = False) -> list[dict[str, Any]]:
    """Run drop jobs, in worker processes when n_jobs > 1; results keep job order."""
    columns = (TextColumn("{task.description}"), BarColumn(), MofNCompleteColumn(), TimeElapsedColumn())
    results: list[dict[str, Any]] = []
    with Progress(*columns, console=err_console, transient=True, disable=not show_progress) as progress:
        task = progress.add_task("Simulating drops", total=len(jobs))
        if n_jobs == 1:
            for job in jobs:
                results.append(simulate_drop(job))
                progress.advance(task)
        else:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                chunk = max(1, len(jobs) // (n_jobs * 8))
                for record in pool.map(simulate_drop, jobs, chunksize=chunk):
                    results.append(record)
                    progress.advance(task)
    return results


def _stat(values: list[float], target: float | None = None) -> dict[str, Any]:
    x = np.asarray([v for v in values if v is not None], dtype=float)
    out: dict[str, Any] = {
        "n": int(x.size),
        "mean": float(x.mean()) if x.size else None,
        "std": float(x.std()) if x.size else None,
    }
    if target is not None:
        out["target"] = target
    return out


def _cnl_summary(records: list[dict[str, Any]]) -> dict[str, Any]:
    points = [p for r in records for p in r["cnl_points"]]
    summary: dict[str, Any] = {}
    for category in ("all", *CNL_CATEGORIES):
        selected = [p for p in points if category == "all" or p[2] == category]
        x = [p[0] for p in selected]
        if len(set(x)) < 2:
            continue
        slope, intercept, corr = fit_cnl_points(x, [p[1] for p in selected])
        summary[category] = {"slope_db_per_ns": slope, "intercept_db": intercept, "corr": corr, "n": len(selected)}
    return summary


def aggregate(records: list[dict[str, Any]], params: ScenarioParams) -> dict[str, Any]:
    """Mean/std of per-drop statistics plus fitted PLEs, CNL lines and the RL log-normal."""
    kind = params.kind
    gaps = [g for r in records for g in r["gaps_ns"]]
    summary: dict[str, Any] = {
        "scenario": kind.value,
        "n_drops": len(records),
        "n_valid": sum(1 for r in records if r["ds_ns"] is not None),
        "statistics": {
            "log_ds": _stat([r["log_ds"] for r in records], VALIDATION_LOG_DS[kind]),
            "log_asa": _stat([r["log_asa"] for r in records], VALIDATION_LOG_ASA[kind]),
            "n_clusters": _stat([r["n_clusters"] for r in records], params.lambda_n),
            "gap_ns": _stat(gaps, params.mu_dtau),
        },
        "cnl": _cnl_summary(records),
    }

    if len(gaps) >= 2:
        _, pvalue = fit_exponential(gaps)
        summary["statistics"]["gap_ns"]["ks_pvalue"] = pvalue

    with_pl = [r for r in records if r["pl_best_db"] is not None]
    if len({r["distance_m"] for r in with_pl}) >= 2:
        summary["ple"] = {}
        for name in ("best", "omni"):
            model = ci_fit([(r["distance_m"], r[f"pl_{name}_db"]) for r in with_pl], params.f_ref_ghz)
            summary["ple"][name] = {"ple": model.ple, "sigma_sf_db": model.sigma_sf_db}

    rl = [v for r in records for v in r["rl_db"]]
    if len(rl) >= 2:
        mu, sigma = fit_reflection_loss(rl)
        summary["reflection_loss"] = {"mu_ln": mu, "sigma_ln": sigma, "n": len(rl)}
    return summary


def _check(name: str, value: float | None, expected: str, passed: bool) -> dict[str, Any]:
    return {"name": name, "value": value, "expected": expected, "passed": bool(passed)}


def check_summary(summary: dict[str, Any], tolerance: float = 0.07) -> list[dict[str, Any]]:
    """Acceptance of mean log DS/ASA against the validation targets."""
    checks = []
    for name in ("log_ds", "log_asa"):
        stat = summary["statistics"][name]
        mean, target = stat["mean"], stat["target"]
        passed = mean is not None and abs(mean - target) <= tolerance
        checks.append(_check(f"{summary['scenario']} mean {name}", mean, f"{target:.2f} ± {tolerance}", passed))
    return checks


def build_manifest(cfg: RunConfig, command: str, *models: Any, files: list[str] | None = None) -> dict[str, Any]:
    """Everything needed to reproduce a run exactly; no timestamps."""
    return {
        "command": command,
        "config_hash": cfg.config_hash(*models),
        "seed": cfg.seed,
        "scenario": cfg.scenario.value,
        "n_drops": cfg.n_drops,
        "version": __version__,
        "files": sorted(files or []),
    }


def _record_run(manifest: dict[str, Any]) -> None:
    if db.store_exists():
        db.save_run(create_record("run", manifest["scenario"], manifest))


def _stored_params(cfg: RunConfig) -> dict[str, Any] | None:
    if not cfg.calibrated:
        return None
    record = db.get_latest_calibration(cfg.scenario.value)
    if record is None:
        raise ValueError(f"No stored calibration for {cfg.scenario.value}. Run 'thzchan calibrate' first.")
    return record["payload"]["params"]


def run_montecarlo(
    cfg: RunConfig,
    settings: Settings | None = None,
    show_progress: bool = False,
) -> dict[str, Any]:
    """Simulate cfg.n_drops drops, write per-drop records, the summary and the manifest."""
    params = resolve_params(cfg, settings, _stored_params(cfg))
    system = system_params(cfg.scenario, settings)
    base = resolve_geometry(cfg, settings)
    distances = cfg.distances_m
    for d in distances:
        base.at_distance(d)

    jobs = [
        DropJob(params, system, base, cfg.seed, i,
                distances[i % len(distances)] if distances else None, cfg.sounding, cfg.free_space)
        for i in range(cfg.n_drops)
    ]
    logger.info("Running %d %s drops (seed %d)", cfg.n_drops, cfg.scenario.value, cfg.seed)
    records = execute_drops(jobs, cfg.jobs, show_progress)
    summary = aggregate(records, params)
    if cfg.check:
        summary["checks"] = check_summary(summary, cfg.tolerance)
        summary["passed"] = all(c["passed"] for c in summary["checks"])

    out = Path(cfg.out_dir) / cfg.scenario.value
    files = []
    if "ndjson" in cfg.formats:
        files.append(write_ndjson(out / "drops.ndjson", records).name)
    if "csv" in cfg.formats:
        files.append(write_csv(out / "drops.csv", records, DROP_FIELDS).name)
    if "json" in cfg.formats:
        files.append(write_json(out / "summary.json", summary).name)
    manifest = build_manifest(cfg, "montecarlo", params, system, base, files=files)
    write_json(out / "manifest.json", manifest)
    _record_run(manifest)
    return summary


def run_tables(
    cfg: RunConfig,
    settings: Settings | None = None,
    scenarios: list[ScenarioKind] | None = None,
    show_progress: bool = False,
) -> list[dict[str, Any]]:
    """Fit best/omni PLEs from sounded distance sweeps and write the PLE and parameter tables."""
    kinds = scenarios or [cfg.scenario]
    out = Path(cfg.out_dir)
    rows, param_rows, models = [], [], []
    for kind in kinds:
        kind_cfg = cfg.model_copy(update={"scenario": kind})
        params = resolve_params(kind_cfg, settings)
        system = system_params(kind, settings)
        base = resolve_geometry(kind_cfg, settings) if kind == cfg.scenario else room_geometry(kind, settings)
        lo, hi = params.distance_range_m
        distances = cfg.distances_m or tuple(float(d) for d in np.linspace(lo, hi, 8))

        jobs = [
            DropJob(params, system, base, cfg.seed, i, d, sounding=True, free_space=cfg.free_space, analyze=False)
            for i, d in enumerate(distances)
        ]
        records = execute_drops(jobs, cfg.jobs, show_progress)
        best = ci_fit([(r["distance_m"], r["pl_best_db"]) for r in records], params.f_ref_ghz)
        omni = ci_fit([(r["distance_m"], r["pl_omni_db"]) for r in records], params.f_ref_ghz)
        write_csv(out / f"pl_{kind.value}.csv", records, ["distance_m", "pl_best_db", "pl_omni_db"])
        rows.append({
            "scenario": kind.value,
            "ple_best": best.ple,
            "sigma_best_db": best.sigma_sf_db,
            "ple_omni": omni.ple,
            "sigma_omni_db": omni.sigma_sf_db,
        })
        for name in ("lambda_n", "mu_log_ds", "mu_log_asa", "mu_dtau", "rl_mu_ln", "rl_sigma_ln", "ple_best", "ple_omni"):
            param_rows.append({"scenario": kind.value, "parameter": name, "value": getattr(params, name)})
        models.extend([params, system, base])

    write_csv(out / "table_ple.csv", rows)
    write_csv(out / "summary_params.csv", param_rows)
    manifest = build_manifest(cfg, "tables", *models, files=["table_ple.csv", "summary_params.csv"])
    write_json(out / "manifest.json", manifest)
    _record_run(manifest)
    return rows


def run_calibration(
    kind: ScenarioKind,
    settings: Settings | None = None,
    n_mc: int = 500,
    seed: int = 0,
    tol: float = 0.03,
    targets: CalibrationTargets | None = None,
    show_progress: bool = False,
) -> CalibrationResult:
    """Calibrate one scenario and store the result when a store exists."""
    params = scenario_params(kind, settings)
    base = room_geometry(kind, settings)
    system = system_params(kind, settings)
    with Progress(TextColumn("{task.description}"), TextColumn("{task.completed} evaluations"),
                  TimeElapsedColumn(), console=err_console, transient=True, disable=not show_progress) as progress:
        task = progress.add_task(f"Calibrating {kind.value}", total=None)
        result = calibrate(params, base, targets, n_mc=n_mc, seed=seed, system=system, tol=tol,
                           on_eval=lambda n: progress.update(task, completed=n))
    if db.store_exists():
        db.save_calibration(create_record("calibration", kind, result.to_dict(), {"n_mc": n_mc, "seed": seed}))
    return result


def _fidelity_checks(seed: int, n_draws: int) -> list[dict[str, Any]]:
    checks = []
    for kind in ScenarioKind:
        params = scenario_params(kind)
        rng = np.random.default_rng([seed, 0])
        counts = [sample_num_clusters(params.lambda_n, rng) for _ in range(n_draws)]
        mean = float(np.mean(counts))
        checks.append(_check(f"{kind.value} Poisson mean", mean, f"{params.lambda_n} ± 2%",
                             abs(mean - params.lambda_n) <= 0.02 * params.lambda_n))

        gaps = inter_cluster_delays(sample_cluster_delays(n_draws + 1, params.r_tau, params.sigma_tau,
                                                          np.random.default_rng([seed, 1])))
        gap_mean = float(gaps.mean())
        checks.append(_check(f"{kind.value} gap mean (ns)", gap_mean, f"{params.mu_dtau} ± 2%",
                             abs(gap_mean - params.mu_dtau) <= 0.02 * params.mu_dtau))
        _, pvalue = fit_exponential(gaps[:10_000])
        checks.append(_check(f"{kind.value} gap KS p-value", pvalue, "> 0.01", pvalue > 0.01))
    return checks


def _oracle_checks() -> list[dict[str, Any]]:
    checks = []
    model = CiModel(ple=2.13)
    samples = [(d, ci_eval(model, d)) for d in np.linspace(1.5, 30.0, 20)]
    ple = ci_fit(samples).ple
    checks.append(_check("ci_fit noiseless PLE", ple, "2.13 ± 1e-9", abs(ple - 2.13) <= 1e-9))

    system = SystemParams()
    f = system.frequencies_ghz
    cir = ctf_to_cir(np.exp(-2j * np.pi * f * 120.0))
    wrapped = float(np.argmax(np.abs(cir)) * system.delay_resolution_ns)
    checks.append(_check("ToA 120 ns wraps to (ns)", wrapped, "20 ± 0.125", abs(wrapped - 20.0) <= 0.125))

    two = MpcSet(np.zeros(2), np.array([350.0, 10.0]), np.zeros(2), np.zeros(2))
    asa = rms_asa(two)
    checks.append(_check("ASA of 350°/10° pair", asa, "10", abs(asa - 10.0) <= 1e-9))

    delta_l, _ = hallway_geometry_check(3.0, 0.8)
    checks.append(_check("hallway ΔL at 3 m (m)", delta_l, "0.4", abs(delta_l - 0.4) <= 1e-12))
    return checks


def run_checks(
    cfg: RunConfig,
    settings: Settings | None = None,
    n_draws: int = 100_000,
    show_progress: bool = False,
) -> list[dict[str, Any]]:
    """Distribution-fidelity and oracle checks, plus Monte-Carlo acceptance of stored calibrations."""
    checks = _fidelity_checks(cfg.seed, n_draws) + _oracle_checks()
    if db.store_exists():
        for kind in ScenarioKind:
            if db.get_latest_calibration(kind.value) is None:
                continue
            kind_cfg = cfg.model_copy(update={"scenario": kind, "calibrated": True, "check": True})
            summary = run_montecarlo(kind_cfg, settings, show_progress)
            checks.extend(summary["checks"])
    write_json(Path(cfg.out_dir) / "checks.json", checks)
    return checks
