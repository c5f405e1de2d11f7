"""Statistical part of the hybrid channel model, its composition with ray tracing, and calibration.

Generation is split into two stages. draw_drop() consumes the random stream
in a fixed order and returns the raw draws; compose() turns draws plus
parameters into a ChannelRealization without touching the RNG. Calibration
reuses one set of draws per drop while it moves the free parameters.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from numpy.typing import NDArray

from . import analysis
from .models import ChannelRealization, Cluster, PathOrigin, Subpath
from .pathloss import CiModel, ci_eval
from .raytracer import (
    SPEED_OF_LIGHT,
    RoomGeometry,
    TracedPath,
    arrival_angles,
    path_gain,
    resolvable_from_los,
    sample_drop_geometry,
    trace,
    wrap_deg,
)
from .scenario import VALIDATION_LOG_ASA, VALIDATION_LOG_DS, ScenarioKind, ScenarioParams, SystemParams, system_preset
from .sounding import angular_separation_deg, antenna_gain_db


logger = logging.getLogger(__name__)

CALIBRATION_BOUNDS: dict[str, tuple[float, float]] = {
    "k_factor_db": (-10.0, 40.0),
    "xi_db": (0.0, 10.0),
    "r_tau": (1.0, 8.0),
    "r_phi": (0.05, 10.0),
    "r_tau_c": (0.05, 20.0),
    "r_phi_c": (0.5, 120.0),
}
# Delay parameters move the mean log DS; angle parameters only move the mean log ASA.
LOS_DS_AXES = ("k_factor_db", "r_tau_c", "r_tau", "xi_db")
NLOS_DS_AXES = ("r_tau_c", "r_tau", "xi_db")
LOS_ASA_AXES = ("r_phi", "r_phi_c")
NLOS_ASA_AXES = ("r_phi_c", "r_phi")


def drop_seeds(master_seed: int, drop_index: int) -> tuple[int, int, int]:
    """Geometry, channel and sounding seeds of one drop."""
    state = np.random.SeedSequence([master_seed, drop_index]).generate_state(3, np.uint64)
    return tuple(int(s) for s in state)


def _uniform_open(rng: np.random.Generator, size: Any) -> NDArray[np.float64]:
    # (0, 1] so that log() stays finite.
    return 1.0 - rng.random(size)


def _signs(rng: np.random.Generator, size: Any) -> NDArray[np.float64]:
    return rng.integers(0, 2, size=size) * 2.0 - 1.0


def exponential_gaps(x: Any, mean: float) -> NDArray[np.float64]:
    """Inverse-CDF exponential gaps from uniforms x in (0, 1]."""
    return -mean * np.log(x)


def sample_num_clusters(lambda_n: float, rng: np.random.Generator, los: bool = False) -> int:
    """Poisson cluster count; LoS drops always keep at least the LoS cluster."""
    if lambda_n <= 0:
        raise ValueError("lambda_n must be positive")
    n = int(rng.poisson(lambda_n))
    return max(n, 1) if los else n


def cluster_delays(x: Any, mu_dtau: float, anchor_ns: float = 0.0) -> NDArray[np.float64]:
    gaps = exponential_gaps(np.asarray(x, dtype=float), mu_dtau)
    return anchor_ns + np.concatenate(([0.0], np.cumsum(gaps)))


def sample_cluster_delays(
    n: int,
    r_tau: float,
    sigma_tau: float,
    rng: np.random.Generator,
    anchor_ns: float = 0.0,
) -> NDArray[np.float64]:
    """Cluster ToAs starting at anchor_ns with exponential gaps of mean r_tau * sigma_tau."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return cluster_delays(_uniform_open(rng, n - 1), r_tau * sigma_tau, anchor_ns)


def cluster_power_decay(excess_ns: Any, r_tau: float, sigma_tau: float) -> NDArray[np.float64]:
    return np.exp(-np.asarray(excess_ns, dtype=float) * (r_tau - 1) / (r_tau * sigma_tau))


def cluster_powers(
    delays: Any,
    r_tau: float,
    sigma_tau: float,
    shadowing_db: Any,
    k_db: float,
    los: bool,
) -> NDArray[np.float64]:
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        return np.empty(0)
    raw = cluster_power_decay(delays - delays[0], r_tau, sigma_tau) * 10 ** (-np.asarray(shadowing_db) / 10)
    if not los:
        return raw / raw.sum()
    if delays.size == 1:
        return np.ones(1)
    k = 10 ** (k_db / 10)
    out = np.empty_like(raw)
    out[0] = k / (k + 1)
    out[1:] = raw[1:] / raw[1:].sum() / (k + 1)
    return out


def sample_cluster_powers(
    delays: Any,
    r_tau: float,
    sigma_tau: float,
    xi_db: float,
    k_db: float,
    los: bool,
    rng: np.random.Generator,
) -> NDArray[np.float64]:
    """Cluster power fractions with per-cluster log-normal shadowing and the Ricean split."""
    if xi_db < 0:
        raise ValueError("xi_db must be non-negative")
    z = rng.standard_normal(np.size(delays))
    return cluster_powers(delays, r_tau, sigma_tau, xi_db * z, k_db, los)


def inverse_gaussian_offsets(power: Any, scale: float, signs: Any) -> NDArray[np.float64]:
    """Signed offsets scale * sqrt(-ln(P / max P)) in degrees, wrapped to [0, 360)."""
    p = np.asarray(power, dtype=float)
    if p.size == 0 or p.max() <= 0:
        raise ValueError("powers must be non-empty with a positive maximum")
    ratio = np.clip(p / p.max(), np.finfo(float).tiny, 1.0)
    return wrap_deg(np.asarray(signs) * scale * np.sqrt(-np.log(ratio)))


def sample_cluster_aoas(
    power_fracs: Any,
    r_phi: float,
    mu_asa_deg: float,
    rng: np.random.Generator,
) -> NDArray[np.float64]:
    """Cluster AoA offsets from the LoS/boresight direction in degrees."""
    return inverse_gaussian_offsets(power_fracs, r_phi * mu_asa_deg, _signs(rng, np.size(power_fracs)))


def subpath_structure(
    x: NDArray[np.float64],
    signs: NDArray[np.float64],
    r_tau_c: float,
    r_phi_c: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Intra-cluster delay offsets, power shares and AoA offsets."""
    offsets = cluster_delays(x, r_tau_c)
    power = np.exp(-offsets / r_tau_c)
    power = power / power.sum()
    angles = inverse_gaussian_offsets(power, r_phi_c, signs)
    return offsets, power, angles


def sample_subpaths(
    cluster: Cluster,
    m_subpaths: int,
    r_tau_c: float,
    r_phi_c: float,
    rng: np.random.Generator,
    pl_linear: float = 1.0,
    aoa_el_deg: float = 0.0,
) -> list[Subpath]:
    """Subpaths of a cluster with Poisson intra arrivals and exponential intra power."""
    if m_subpaths < 1:
        raise ValueError("m_subpaths must be at least 1")
    x = _uniform_open(rng, m_subpaths - 1)
    signs = _signs(rng, m_subpaths)
    phases = rng.random(m_subpaths) * 2 * math.pi
    return _subpaths(cluster.toa_ns, cluster.aoa_az_deg, aoa_el_deg, cluster.power_frac, pl_linear,
                     *subpath_structure(x, signs, r_tau_c, r_phi_c), phases)


def _subpaths(toa, az, el, cluster_power, pl_linear, offsets, power, angles, phases) -> list[Subpath]:
    amplitude = np.sqrt(cluster_power * power / pl_linear)
    az_sub = wrap_deg(az + angles)
    return [
        Subpath(
            toa_ns=float(toa + offsets[m]),
            aoa_az_deg=float(az_sub[m]),
            aoa_el_deg=float(el),
            amplitude=float(amplitude[m]),
            phase_rad=float(phases[m]),
            power_frac_within_cluster=float(power[m]),
        )
        for m in range(offsets.size)
    ]


@dataclass(frozen=True)
class DropDraws:
    """Every random number one drop consumes, drawn in a fixed order."""

    n_clusters: int
    anchor_u: float
    gap_u: NDArray[np.float64]
    shadow_z: NDArray[np.float64]
    cluster_sign: NDArray[np.float64]
    intra_u: NDArray[np.float64]
    intra_sign: NDArray[np.float64]
    phase: NDArray[np.float64]
    rl_z: NDArray[np.float64]
    traced_phase: NDArray[np.float64]
    sf_z: float


def draw_drop(params: ScenarioParams, rng: np.random.Generator, n_traced: int = 0) -> DropDraws:
    n = sample_num_clusters(params.lambda_n, rng, los=params.los)
    m = params.m_subpaths
    return DropDraws(
        n_clusters=n,
        anchor_u=float(_uniform_open(rng, 1)[0]),
        gap_u=_uniform_open(rng, max(n - 1, 0)),
        shadow_z=rng.standard_normal(n),
        cluster_sign=_signs(rng, n),
        intra_u=_uniform_open(rng, (n, m - 1)),
        intra_sign=_signs(rng, (n, m)),
        phase=rng.random((n, m)) * 2 * math.pi,
        rl_z=rng.standard_normal(n_traced),
        traced_phase=rng.random(n_traced) * 2 * math.pi,
        sf_z=float(rng.standard_normal()),
    )


def _tx_boresight(geom: RoomGeometry) -> NDArray[np.float64]:
    tx = np.asarray(geom.tx_pos, dtype=float)
    target = np.asarray(geom.tx_target if geom.tx_target is not None else geom.rx_pos, dtype=float)
    v = target - tx
    return v / np.linalg.norm(v)


def _deterministic_clusters(
    params: ScenarioParams,
    system: SystemParams,
    geom: RoomGeometry,
    traced: list[TracedPath],
    draws: DropDraws,
) -> list[Cluster]:
    boresight = _tx_boresight(geom)
    clusters = []
    for k, path in enumerate(traced):
        if path.reflection_order == 0:
            continue
        rl_db = float(np.exp(params.rl_mu_ln + params.rl_sigma_ln * draws.rl_z[k]))
        if params.rl_per_bounce:
            rl_db *= path.reflection_order
        psi = angular_separation_deg(np.asarray(path.aod), boresight)
        tx_db = float(antenna_gain_db(psi, system.tx_hpbw_deg, system.sidelobe_db))
        amplitude = path_gain(path, params.f_ref_ghz, rl_db) * 10 ** (tx_db / 20)
        sub = Subpath(path.toa_ns, path.aoa_az_deg, path.aoa_el_deg, amplitude, float(draws.traced_phase[k]), 1.0)
        clusters.append(
            Cluster(
                index=-1, toa_ns=path.toa_ns, power_frac=0.0, aoa_az_deg=path.aoa_az_deg,
                subpaths=(sub,), origin=PathOrigin.DETERMINISTIC, traced=True,
                reflection_order=path.reflection_order, rl_db=rl_db,
            )
        )
    return clusters


def _az_distance(a: float, b: float) -> float:
    return abs((a - b + 180.0) % 360.0 - 180.0)


def resolved_reflections(
    deterministic: list[Cluster],
    los_toa_ns: float,
    los_az_deg: float,
    floor: float,
    system: SystemParams,
) -> int:
    """Number of traced reflections the sounder would report as clusters of their own.

    A reflection counts when it is above floor, inside the elevation scan,
    resolvable in delay from the LoS, and more than one Rx beamwidth away in
    azimuth from the LoS and from every stronger counted reflection.
    """
    el_limit = max(abs(e) for e in system.el_grid_deg) + system.rx_hpbw_deg / 2
    taken = [los_az_deg]
    count = 0
    for cluster in sorted(deterministic, key=lambda c: -c.power):
        if cluster.power < floor:
            continue
        sub = cluster.subpaths[0]
        if abs(sub.aoa_el_deg) > el_limit:
            continue
        excess_m = (sub.toa_ns - los_toa_ns) * SPEED_OF_LIGHT * 1e-9
        if not resolvable_from_los(excess_m, system.bandwidth_ghz):
            continue
        if any(_az_distance(sub.aoa_az_deg, az) <= system.rx_hpbw_deg for az in taken):
            continue
        taken.append(sub.aoa_az_deg)
        count += 1
    return count


def compose(
    params: ScenarioParams,
    geom: RoomGeometry,
    draws: DropDraws,
    seed: int,
    system: SystemParams | None = None,
    traced: list[TracedPath] | None = None,
) -> ChannelRealization:
    """Build a realization from pre-drawn random numbers."""
    system = system if system is not None else system_preset(params.kind)
    traced = traced or []
    tx = np.asarray(geom.tx_pos, dtype=float)
    rx = np.asarray(geom.rx_pos, dtype=float)
    distance = float(np.linalg.norm(rx - tx))
    los_toa = distance / SPEED_OF_LIGHT * 1e9
    los_az, los_el = arrival_angles(rx, tx)

    ci = CiModel(ple=params.ple_omni, f_ref_ghz=params.f_ref_ghz, sigma_sf_db=params.sigma_sf_db)
    pl_omni_db = ci_eval(ci, max(distance, ci.d0_m), params.sigma_sf_db * draws.sf_z)
    pl_linear = 10 ** (pl_omni_db / 10)

    deterministic = _deterministic_clusters(params, system, geom, traced, draws) if params.deterministic else []
    los_path = next((p for p in traced if p.reflection_order == 0), None) if params.deterministic else None

    n_resolved = 0
    if deterministic and params.double_count_guard:
        free_space = (1 / (4 * math.pi * params.f_ref_ghz * los_toa)) ** 2
        floor = free_space * 10 ** (-params.dynamic_range_db / 10)
        n_resolved = resolved_reflections(deterministic, los_toa, los_az, floor, system)

    # Resolved reflections stand in for drawn non-LoS clusters, at most half of them.
    n_drawn = draws.n_clusters - 1 if params.los else draws.n_clusters
    n_other = n_drawn - min(n_resolved, n_drawn // 2)
    if params.los:
        n_stat = 1 + n_other
        anchor = los_toa
    else:
        n_stat = n_other
        anchor = los_toa + float(exponential_gaps(draws.anchor_u, params.mu_dtau))

    clusters: list[Cluster] = list(deterministic)
    if n_stat > 0:
        delays = cluster_delays(draws.gap_u[: n_stat - 1], params.mu_dtau, anchor)
        powers = cluster_powers(
            delays, params.r_tau, params.sigma_tau, params.xi_db * draws.shadow_z[:n_stat],
            params.k_factor_db, params.los,
        )
        offsets = inverse_gaussian_offsets(powers, params.r_phi * params.mu_asa_deg, draws.cluster_sign[:n_stat])
        if params.los:
            offsets[0] = 0.0

        for n in range(n_stat):
            is_los = params.los and n == 0
            parts = subpath_structure(draws.intra_u[n], draws.intra_sign[n], params.r_tau_c, params.r_phi_c)
            if is_los and los_path is not None:
                # Strongest subpath is the traced ray at its Friis power.
                friis = path_gain(los_path, params.f_ref_ghz) ** 2
                phases = draws.phase[n].copy()
                phases[0] = 0.0
                subs = _subpaths(los_path.toa_ns, los_az, los_el, friis / parts[1][0], 1.0, *parts, phases)
                clusters.append(
                    Cluster(-1, los_path.toa_ns, 0.0, los_az, tuple(subs), PathOrigin.LOS,
                            traced=True, reflection_order=0)
                )
                continue
            az = wrap_deg(los_az + offsets[n])
            subs = _subpaths(delays[n], az, los_el, powers[n], pl_linear, *parts, draws.phase[n])
            origin = PathOrigin.LOS if is_los else PathOrigin.STATISTICAL
            clusters.append(Cluster(-1, float(delays[n]), 0.0, az, tuple(subs), origin))

    clusters.sort(key=lambda c: (c.toa_ns, c.origin is not PathOrigin.LOS))
    total = sum(c.power for c in clusters)
    final = tuple(
        Cluster(
            index=i, toa_ns=c.toa_ns, power_frac=c.power / total if total > 0 else 0.0,
            aoa_az_deg=c.aoa_az_deg, subpaths=c.subpaths, origin=c.origin, traced=c.traced,
            reflection_order=c.reflection_order, rl_db=c.rl_db,
        )
        for i, c in enumerate(clusters)
    )
    return ChannelRealization(
        scenario=params.kind,
        distance_m=distance,
        clusters=final,
        seed=seed,
        pl_omni_db=pl_omni_db,
        f_ref_ghz=params.f_ref_ghz,
        tx_pos=tuple(float(v) for v in tx),
        rx_pos=tuple(float(v) for v in rx),
        los_az_deg=los_az,
        los_el_deg=los_el,
    )


def generate(
    params: ScenarioParams,
    geom: RoomGeometry,
    seed: int,
    system: SystemParams | None = None,
    traced: list[TracedPath] | None = None,
) -> ChannelRealization:
    """One channel realization; the same (params, geometry, seed) always gives the same result."""
    if params.deterministic and traced is None:
        traced = trace(geom, params.max_reflection_order)
    traced = traced or []
    rng = np.random.default_rng(seed)
    draws = draw_drop(params, rng, len(traced))
    return compose(params, geom, draws, seed, system, traced)


def free_space_realization(params: ScenarioParams, geom: RoomGeometry, seed: int = 0) -> ChannelRealization:
    """LoS path alone with its Friis amplitude."""
    los = trace(geom, 0)[0]
    amplitude = path_gain(los, params.f_ref_ghz)
    sub = Subpath(los.toa_ns, los.aoa_az_deg, los.aoa_el_deg, amplitude, 0.0, 1.0)
    cluster = Cluster(0, los.toa_ns, 1.0, los.aoa_az_deg, (sub,), PathOrigin.LOS, traced=True, reflection_order=0)
    return ChannelRealization(
        scenario=params.kind,
        distance_m=los.length_m,
        clusters=(cluster,),
        seed=seed,
        pl_omni_db=20 * math.log10(1 / amplitude),
        f_ref_ghz=params.f_ref_ghz,
        tx_pos=geom.tx_pos,
        rx_pos=geom.rx_pos,
        los_az_deg=los.aoa_az_deg,
        los_el_deg=los.aoa_el_deg,
    )


@dataclass(frozen=True)
class PreparedDrop:
    index: int
    seed: int
    geometry: RoomGeometry
    traced: list[TracedPath]
    draws: DropDraws


def prepare_drops(
    params: ScenarioParams,
    base: RoomGeometry,
    n_drops: int,
    master_seed: int,
) -> list[PreparedDrop]:
    """Geometries, traced paths and random draws of the Monte-Carlo drops."""
    drops = []
    for i in range(n_drops):
        geo_seed, chan_seed, _ = drop_seeds(master_seed, i)
        geom = sample_drop_geometry(base, params.distance_range_m, np.random.default_rng(geo_seed))
        traced = trace(geom, params.max_reflection_order) if params.deterministic else []
        draws = draw_drop(params, np.random.default_rng(chan_seed), len(traced))
        drops.append(PreparedDrop(i, chan_seed, geom, traced, draws))
    return drops


def ensemble_spreads(
    params: ScenarioParams,
    drops: list[PreparedDrop],
    system: SystemParams | None = None,
    offset_step: float = 1.0,
) -> tuple[float, float]:
    """Mean log DS and mean log ASA over drops; drops with zero spread are left out."""
    log_ds, log_asa = [], []
    for drop in drops:
        realization = compose(params, drop.geometry, drop.draws, drop.seed, system, drop.traced)
        stats = analysis.analyze_realization(realization, params.dynamic_range_db, offset_step)
        if stats is None:
            continue
        log_ds.append(stats.log_ds)
        log_asa.append(stats.log_asa)
    if not log_ds:
        return math.nan, math.nan
    return float(np.nanmean(log_ds)), float(np.nanmean(log_asa))


@dataclass(frozen=True)
class CalibrationTargets:
    mu_log_ds: float
    mu_log_asa: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu_log_ds) and math.isfinite(self.mu_log_asa)):
            raise ValueError("calibration targets must be finite log spreads")

    @classmethod
    def from_spreads(cls, ds_ns: float, asa_deg: float) -> "CalibrationTargets":
        if ds_ns <= 0 or asa_deg <= 0:
            raise ValueError("target spreads must be positive; a multi-cluster channel cannot have zero spread")
        return cls(math.log(ds_ns), math.log(asa_deg))


@dataclass
class CalibrationResult:
    params: ScenarioParams
    targets: CalibrationTargets
    achieved_log_ds: float
    achieved_log_asa: float
    converged: bool
    n_evals: int
    history: list[dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": self.params.model_dump(mode="json"),
            "targets": {"mu_log_ds": self.targets.mu_log_ds, "mu_log_asa": self.targets.mu_log_asa},
            "achieved_log_ds": self.achieved_log_ds,
            "achieved_log_asa": self.achieved_log_asa,
            "converged": self.converged,
            "n_evals": self.n_evals,
        }


def validation_targets(kind: ScenarioKind | str) -> CalibrationTargets:
    """Mean log DS/ASA a calibrated scenario has to reproduce."""
    kind = ScenarioKind(kind)
    return CalibrationTargets(VALIDATION_LOG_DS[kind], VALIDATION_LOG_ASA[kind])


def calibrate(
    params: ScenarioParams,
    base: RoomGeometry,
    targets: CalibrationTargets | None = None,
    n_mc: int = 500,
    seed: int = 0,
    system: SystemParams | None = None,
    tol: float = 0.05,
    grid_points: int = 7,
    max_bisections: int = 12,
    ds_axes: tuple[str, ...] | None = None,
    asa_axes: tuple[str, ...] | None = None,
    on_eval: Callable[[int], None] | None = None,
) -> CalibrationResult:
    """Two-stage search of the free parameters against mean log DS/ASA targets.

    The delay axes are searched against the DS target first, then the angle
    axes against the ASA target; angles never move the DS. Each axis is
    scanned over its bounds and a crossing of the target is bisected. Without
    a crossing the closest grid point is kept and the next axis is tried.

    Every evaluation reuses the same drops (geometry and random draws), so the
    objective is a deterministic function of the parameters.
    """
    if n_mc < 500:
        raise ValueError("calibration needs n_mc >= 500 drops")
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    if targets is None:
        targets = validation_targets(params.kind)
    if ds_axes is None:
        ds_axes = LOS_DS_AXES if params.los else NLOS_DS_AXES
    if asa_axes is None:
        asa_axes = LOS_ASA_AXES if params.los else NLOS_ASA_AXES
    axes = ds_axes + asa_axes
    drops = prepare_drops(params, base, n_mc, seed)
    history: list[dict[str, float]] = []

    def evaluate(candidate: ScenarioParams) -> tuple[float, float]:
        ds, asa = ensemble_spreads(candidate, drops, system)
        history.append({axis: getattr(candidate, axis) for axis in axes} | {"log_ds": ds, "log_asa": asa})
        if on_eval is not None:
            on_eval(len(history))
        return ds, asa

    def search_axis(
        start: ScenarioParams, spreads: tuple[float, float], axis: str, metric: int, target: float,
    ) -> tuple[ScenarioParams, tuple[float, float]]:
        def miss(values: tuple[float, float]) -> float:
            return abs(values[metric] - target) if math.isfinite(values[metric]) else math.inf

        def side(values: tuple[float, float]) -> float:
            return math.copysign(1.0, values[metric] - target) if math.isfinite(values[metric]) else 0.0

        lo, hi = CALIBRATION_BOUNDS[axis]
        points = {float(getattr(start, axis)): (start, spreads)}
        for value in np.linspace(lo, hi, grid_points):
            value = float(value)
            if value not in points:
                candidate = start.model_copy(update={axis: value})
                points[value] = (candidate, evaluate(candidate))
        ordered = sorted(points.items())
        chosen = min((p for _, p in ordered), key=lambda p: miss(p[1]))
        if miss(chosen[1]) <= tol:
            return chosen

        brackets = [(a, b) for a, b in zip(ordered, ordered[1:]) if side(a[1][1]) * side(b[1][1]) < 0]
        if not brackets:
            return chosen
        (a, (_, a_spreads)), (b, _) = min(brackets, key=lambda ab: min(miss(ab[0][1][1]), miss(ab[1][1][1])))
        for _ in range(max_bisections):
            mid = 0.5 * (a + b)
            candidate = start.model_copy(update={axis: mid})
            mid_spreads = evaluate(candidate)
            if miss(mid_spreads) < miss(chosen[1]):
                chosen = (candidate, mid_spreads)
            if miss(mid_spreads) <= tol or side(mid_spreads) == 0.0:
                break
            if side(mid_spreads) == side(a_spreads):
                a, a_spreads = mid, mid_spreads
            else:
                b = mid
        return chosen

    best, spreads = params, evaluate(params)
    stages = ((ds_axes, 0, targets.mu_log_ds), (asa_axes, 1, targets.mu_log_asa))
    for stage_axes, metric, target in stages:
        for axis in stage_axes:
            if abs(spreads[metric] - target) <= tol:
                break
            best, spreads = search_axis(best, spreads, axis, metric, target)
            logger.info("Axis %s -> %.4g (log DS %.3f, log ASA %.3f)", axis, getattr(best, axis), *spreads)

    best_ds, best_asa = spreads
    converged = abs(best_ds - targets.mu_log_ds) <= tol and abs(best_asa - targets.mu_log_asa) <= tol
    if not converged:
        logger.warning(
            "Calibration of %s did not converge: log DS %.3f (target %.3f), log ASA %.3f (target %.3f)",
            params.kind.value, best_ds, targets.mu_log_ds, best_asa, targets.mu_log_asa,
        )
    return CalibrationResult(
        params=ScenarioParams.model_validate(best.model_dump()),
        targets=targets,
        achieved_log_ds=best_ds,
        achieved_log_asa=best_asa,
        converged=converged,
        n_evals=len(history),
        history=history,
    )
