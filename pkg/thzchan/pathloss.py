"""Close-in path loss model and the best-direction / omni-directional estimators."""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .analysis import SweepAnalysis, ctf_to_cir, fit_lognormal
from .models import ChannelRealization, PathOrigin
from .raytracer import direction_vector

if TYPE_CHECKING:
    from .sounding import SoundingSweep


logger = logging.getLogger(__name__)

F_REF_GHZ = 205.0


def fspl(d0_m: float, f_ghz: float) -> float:
    """Free-space path loss in dB at distance d0_m."""
    if d0_m <= 0 or f_ghz <= 0:
        raise ValueError("distance and frequency must be positive")
    return -20 * math.log10(SPEED_OF_LIGHT / (4 * math.pi * f_ghz * 1e9 * d0_m))


@dataclass(frozen=True)
class CiModel:
    ple: float
    d0_m: float = 1.0
    sigma_sf_db: float = 0.0
    f_ref_ghz: float = F_REF_GHZ

    def __post_init__(self) -> None:
        if self.d0_m <= 0:
            raise ValueError("d0_m must be positive")
        if self.sigma_sf_db < 0:
            raise ValueError("sigma_sf_db must be non-negative")


def ci_eval(model: CiModel, d_m: float, shadowing_db: float = 0.0) -> float:
    """Path loss in dB at d_m under the close-in model."""
    if d_m < model.d0_m:
        raise ValueError(f"distance {d_m} m is below the reference distance {model.d0_m} m")
    return 10 * model.ple * math.log10(d_m / model.d0_m) + fspl(model.d0_m, model.f_ref_ghz) + shadowing_db


def ci_fit(
    samples: Iterable[tuple[float, float]],
    f_ghz: float = F_REF_GHZ,
    d0_m: float = 1.0,
) -> CiModel:
    """Least-squares PLE anchored at FSPL(d0); sigma_sf is the RMS residual."""
    data = np.asarray(list(samples), dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("ci_fit needs at least two (distance, path loss) samples")
    d, pl = data[:, 0], data[:, 1]
    if np.any(d < d0_m):
        raise ValueError(f"all distances must be >= d0 ({d0_m} m)")
    if np.unique(d).size < 2:
        raise ValueError("all distances are equal; PLE is unidentifiable")

    x = 10 * np.log10(d / d0_m)
    y = pl - fspl(d0_m, f_ghz)
    ple = float(np.dot(x, y) / np.dot(x, x))
    residual = y - ple * x
    sigma = float(np.sqrt(np.mean(residual**2)))
    return CiModel(ple=ple, d0_m=d0_m, sigma_sf_db=sigma, f_ref_ghz=f_ghz)


def _to_db_loss(power: float) -> float:
    if power <= 0:
        return math.inf
    return -10 * math.log10(power)


def pl_best_los(sweep: "SoundingSweep") -> float:
    """Path loss of the direction with the largest band-averaged |H|^2."""
    mean_power = np.mean(np.abs(sweep.ctf) ** 2, axis=-1)
    return _to_db_loss(float(mean_power.max()))


def direction_powers(sweep: "SoundingSweep", w: int | None = None) -> np.ndarray:
    """Per-direction power of the w strongest CIR taps, shape (n_az, n_el)."""
    w = sweep.system.window_w if w is None else w
    n_taps = sweep.ctf.shape[-1]
    if not 1 <= w <= n_taps:
        raise ValueError(f"window must be in [1, {n_taps}], got {w}")
    taps = np.abs(ctf_to_cir(sweep.ctf)) ** 2
    strongest = -np.partition(-taps, w - 1, axis=-1)[..., :w]
    return strongest.sum(axis=-1)


def pl_best_nlos(sweep: "SoundingSweep", w: int | None = None) -> float:
    """Path loss of the best direction using the windowed sorted-CIR power."""
    return _to_db_loss(float(direction_powers(sweep, w).max()))


def pl_omni(sweep: "SoundingSweep", w: int | None = None) -> float:
    """Path loss from the windowed power summed over every scanned direction."""
    return _to_db_loss(float(direction_powers(sweep, w).sum()))


def reflection_loss(cluster_power: float, tx_power: float, f_ghz: float, toa_ns: float) -> float:
    """Cluster loss in dB minus the Friis spreading loss at the cluster delay."""
    if toa_ns <= 0:
        raise ValueError("cluster delay must be positive")
    if cluster_power <= 0 or tx_power <= 0:
        raise ValueError("powers must be positive")
    return -10 * math.log10(cluster_power / tx_power) - 20 * math.log10(4 * math.pi * f_ghz * toa_ns)


def realization_reflection_losses(realization: ChannelRealization) -> list[float]:
    """Reflection loss of every deterministic cluster of a realization at its reference frequency."""
    losses = []
    for cluster in realization.clusters:
        if cluster.origin is not PathOrigin.DETERMINISTIC:
            continue
        strongest = max(cluster.subpaths, key=lambda s: s.amplitude)
        losses.append(reflection_loss(cluster.power, 1.0, realization.f_ref_ghz, strongest.toa_ns))
    return losses


def sweep_reflection_losses(
    result: SweepAnalysis,
    realization: ChannelRealization,
    rx_hpbw_deg: float = 10.0,
    tx_power: float = 1.0,
) -> list[float]:
    """Reflection losses of measured clusters matched to the traced wall reflections.

    A measured cluster matches a reflection when its strongest MPC lies within
    two delay bins of the reflection ToA (modulo the unambiguous delay) and
    within one Rx beamwidth of its direction. The strongest matching cluster
    is used, each cluster at most once; its power is the sum over its MPCs and
    its delay that of its strongest MPC, unwrapped next to the reflection ToA.
    """
    table = result.clusters
    axis = result.pdap.delay_axis_ns
    if len(table) == 0 or axis.size < 2:
        return []
    step = float(axis[1] - axis[0])
    period = step * axis.size
    measured = direction_vector(table.aoa_az_deg, table.aoa_el_deg)

    reflections = [c for c in realization.clusters if c.origin is PathOrigin.DETERMINISTIC]
    used: set[int] = set()
    losses = []
    for cluster in sorted(reflections, key=lambda c: -c.power):
        ray = max(cluster.subpaths, key=lambda s: s.amplitude)
        lag = np.mod(table.toa_ns - ray.toa_ns, period)
        lag = np.minimum(lag, period - lag)
        cos = np.clip(measured @ direction_vector(ray.aoa_az_deg, ray.aoa_el_deg), -1.0, 1.0)
        match = (lag <= 2 * step) & (np.degrees(np.arccos(cos)) <= rx_hpbw_deg)
        candidates = [i for i in np.flatnonzero(match) if i not in used]
        if not candidates:
            continue
        best = max(candidates, key=lambda i: table.power[i])
        used.add(best)
        toa = float(table.toa_ns[best]) + period * round((ray.toa_ns - float(table.toa_ns[best])) / period)
        losses.append(reflection_loss(float(table.power[best]), tx_power, realization.f_ref_ghz, toa))
    logger.debug("Matched %d of %d traced reflections to measured clusters", len(losses), len(reflections))
    return losses


def fit_reflection_loss(rl_db: Iterable[float]) -> tuple[float, float]:
    """Log-normal (mu_ln, sigma_ln) of reflection losses in dB."""
    values = np.asarray(list(rl_db), dtype=float)
    if np.any(values <= 0):
        logger.warning("Dropping %d non-positive reflection losses before the log-normal fit", int(np.sum(values <= 0)))
        values = values[values > 0]
    return fit_lognormal(values)
