"""Measurement-analysis chain: PDAP, MPC extraction, clustering and spread statistics."""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np
from numpy.typing import NDArray
from scipy import stats
from sklearn.cluster import DBSCAN
from sklearn.metrics.pairwise import euclidean_distances

from .models import ChannelRealization
from .raytracer import direction_vector

if TYPE_CHECKING:
    from .sounding import SoundingSweep


logger = logging.getLogger(__name__)

DYNAMIC_RANGE_DB = 40.0
NOISE_MARGIN_DB = 10.0
MIN_PTS = 5
EPS = 0.05
ZETA = 5.0
CNL_CATEGORIES = ("strongest", "second", "weak")


@dataclass(frozen=True)
class MpcSet:
    """Multipath components; labels is None before clustering, -1 marks outliers."""

    toa_ns: NDArray[np.float64]
    aoa_az_deg: NDArray[np.float64]
    aoa_el_deg: NDArray[np.float64]
    power_db: NDArray[np.float64]
    labels: NDArray[np.int64] | None = None

    def __len__(self) -> int:
        return int(self.toa_ns.size)

    @property
    def power_linear(self) -> NDArray[np.float64]:
        return 10 ** (self.power_db / 10)

    def with_labels(self, labels: NDArray[np.int64]) -> "MpcSet":
        return MpcSet(self.toa_ns, self.aoa_az_deg, self.aoa_el_deg, self.power_db, np.asarray(labels))

    def subset(self, mask: NDArray[np.bool_]) -> "MpcSet":
        labels = None if self.labels is None else self.labels[mask]
        return MpcSet(self.toa_ns[mask], self.aoa_az_deg[mask], self.aoa_el_deg[mask], self.power_db[mask], labels)

    def to_rows(self) -> list[dict[str, Any]]:
        labels = self.labels if self.labels is not None else np.full(len(self), -1)
        return [
            {"toa_ns": t, "aoa_az_deg": a, "aoa_el_deg": e, "power_db": p, "label": int(lab)}
            for t, a, e, p, lab in zip(
                self.toa_ns.tolist(), self.aoa_az_deg.tolist(), self.aoa_el_deg.tolist(),
                self.power_db.tolist(), labels.tolist(),
            )
        ]


@dataclass(frozen=True)
class Pdap:
    """Power-delay-angular profile; power_db is NaN below the threshold."""

    delay_axis_ns: NDArray[np.float64]
    az_axis_deg: NDArray[np.float64]
    el_axis_deg: NDArray[np.float64]
    power_db: NDArray[np.float64]
    noise_floor_db: float
    threshold_db: float

    def mpcs(self) -> MpcSet:
        k, i, j = np.nonzero(~np.isnan(self.power_db))
        return MpcSet(
            toa_ns=self.delay_axis_ns[k],
            aoa_az_deg=self.az_axis_deg[i],
            aoa_el_deg=self.el_axis_deg[j],
            power_db=self.power_db[k, i, j],
        )

    def to_rows(self) -> list[dict[str, float]]:
        """Retained entries for heatmap export."""
        m = self.mpcs()
        return [
            {"delay_ns": t, "az_deg": a, "el_deg": e, "power_db": p}
            for t, a, e, p in zip(m.toa_ns.tolist(), m.aoa_az_deg.tolist(), m.aoa_el_deg.tolist(), m.power_db.tolist())
        ]


@dataclass(frozen=True)
class CnlFit:
    slope_db_per_ns: float
    intercept_db: float
    corr: float
    excess_ns: NDArray[np.float64]
    cnl_db: NDArray[np.float64]
    categories: tuple[str, ...]


@dataclass(frozen=True)
class ClusterTable:
    """Per-cluster summary sorted by ToA; toa and angles are those of the strongest MPC."""

    label: NDArray[np.int64]
    toa_ns: NDArray[np.float64]
    aoa_az_deg: NDArray[np.float64]
    aoa_el_deg: NDArray[np.float64]
    power: NDArray[np.float64]
    size: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.label.size)


@dataclass(frozen=True)
class DropStats:
    ds_ns: float
    asa_deg: float
    n_clusters: int
    n_mpcs: int
    gaps_ns: tuple[float, ...] = ()
    cnl_points: tuple[tuple[float, float, str], ...] = ()

    @property
    def log_ds(self) -> float:
        return math.log(self.ds_ns) if self.ds_ns > 0 else math.nan

    @property
    def log_asa(self) -> float:
        return math.log(self.asa_deg) if self.asa_deg > 0 else math.nan

    def to_dict(self) -> dict[str, Any]:
        return {
            "ds_ns": self.ds_ns,
            "asa_deg": self.asa_deg,
            "n_clusters": self.n_clusters,
            "n_mpcs": self.n_mpcs,
            "gaps_ns": list(self.gaps_ns),
            "cnl_points": [list(p) for p in self.cnl_points],
        }


@dataclass(frozen=True)
class SweepAnalysis:
    pdap: Pdap
    mpcs: MpcSet
    clusters: ClusterTable
    stats: DropStats | None = field(default=None)


def noise_threshold(
    p_max_db: float,
    nf_db: float,
    dynamic_range_db: float = DYNAMIC_RANGE_DB,
    noise_margin_db: float = NOISE_MARGIN_DB,
) -> float:
    """Noise-elimination threshold in dB."""
    return max(p_max_db - dynamic_range_db, nf_db + noise_margin_db)


def ctf_to_cir(ctf: NDArray[np.complex128], axis: int = -1) -> NDArray[np.complex128]:
    """Inverse DFT along the frequency axis; tap k sits at delay k / (N * df)."""
    return np.fft.ifft(ctf, axis=axis)


def cir_to_ctf(cir: NDArray[np.complex128], axis: int = -1) -> NDArray[np.complex128]:
    return np.fft.fft(cir, axis=axis)


def delay_axis(n_taps: int, sweep_interval_ghz: float) -> NDArray[np.float64]:
    return np.arange(n_taps) / (n_taps * sweep_interval_ghz)


def estimate_noise_floor(tap_power: NDArray[np.float64]) -> float:
    """Noise floor in dB from the median tap power of exponentially distributed noise."""
    median = float(np.median(tap_power))
    return 10 * math.log10(max(median / math.log(2), 1e-300))


def build_pdap(
    sweep: "SoundingSweep",
    noise_floor_db: float | None = None,
    dynamic_range_db: float = DYNAMIC_RANGE_DB,
    noise_margin_db: float = NOISE_MARGIN_DB,
) -> Pdap:
    system = sweep.system
    cir = ctf_to_cir(sweep.ctf)
    tap_power = np.moveaxis(np.abs(cir) ** 2, -1, 0)
    if noise_floor_db is None:
        noise_floor_db = estimate_noise_floor(tap_power)
    p_max = float(tap_power.max())
    p_max_db = 10 * math.log10(p_max) if p_max > 0 else -math.inf
    threshold = noise_threshold(p_max_db, noise_floor_db, dynamic_range_db, noise_margin_db)

    with np.errstate(divide="ignore"):
        power_db = 10 * np.log10(tap_power)
    power_db = np.where(power_db >= threshold, power_db, np.nan)
    logger.debug("PDAP threshold %.1f dB (peak %.1f dB, floor %.1f dB)", threshold, p_max_db, noise_floor_db)
    return Pdap(
        delay_axis_ns=delay_axis(cir.shape[-1], system.sweep_interval_ghz),
        az_axis_deg=np.asarray(system.az_grid_deg, dtype=float),
        el_axis_deg=np.asarray(system.el_grid_deg, dtype=float),
        power_db=power_db,
        noise_floor_db=noise_floor_db,
        threshold_db=threshold,
    )


def mcd_features(mpcs: MpcSet, zeta: float = ZETA) -> NDArray[np.float64]:
    """Embedding whose Euclidean distances equal the multipath component distance."""
    angular = 0.5 * direction_vector(mpcs.aoa_az_deg, mpcs.aoa_el_deg)
    toa = mpcs.toa_ns
    spread = float(toa.max() - toa.min()) if toa.size else 0.0
    scale = zeta * float(np.std(toa)) / spread**2 if spread > 0 else 0.0
    return np.column_stack([angular, scale * toa])


def mcd_matrix(mpcs: MpcSet, zeta: float = ZETA) -> NDArray[np.float64]:
    features = mcd_features(mpcs, zeta)
    return euclidean_distances(features, features)


def dbscan_mcd(mpcs: MpcSet, min_pts: int = MIN_PTS, eps: float = EPS, zeta: float = ZETA) -> MpcSet:
    """Label MPCs with DBSCAN over the MCD metric; outliers get -1."""
    if len(mpcs) == 0:
        raise ValueError("dbscan_mcd needs at least one MPC")
    labels = DBSCAN(eps=eps, min_samples=min_pts).fit_predict(mcd_features(mpcs, zeta))
    logger.debug("DBSCAN found %d clusters among %d MPCs", len(set(labels) - {-1}), len(mpcs))
    return mpcs.with_labels(labels)


def delay_spread(toa_ns: NDArray[np.float64], weights: NDArray[np.float64]) -> float:
    w = weights / weights.sum()
    mean = float(np.dot(w, toa_ns))
    return math.sqrt(max(float(np.dot(w, (toa_ns - mean) ** 2)), 0.0))


def offset_grid(offset_step: float) -> NDArray[np.float64]:
    """Reference-direction offsets covering the full circle; the step must divide 360."""
    if offset_step <= 0:
        raise ValueError("offset_step must be positive")
    n = 360.0 / offset_step
    if not math.isclose(n, round(n), rel_tol=0.0, abs_tol=1e-9):
        raise ValueError(f"offset_step must divide 360 degrees, got {offset_step}")
    return np.arange(round(n)) * offset_step


def angular_spread(az_deg: NDArray[np.float64], weights: NDArray[np.float64], offset_step: float = 1.0) -> float:
    offsets = offset_grid(offset_step)
    rotated = np.mod(az_deg[None, :] + offsets[:, None], 360.0)
    w = weights / weights.sum()
    mean = rotated @ w
    var = ((rotated - mean[:, None]) ** 2) @ w
    return math.sqrt(max(float(var.min()), 0.0))


def _check_nonempty(mpcs: MpcSet) -> NDArray[np.float64]:
    if len(mpcs) == 0:
        raise ValueError("at least one MPC is required")
    return mpcs.power_linear


def rms_delay_spread(mpcs: MpcSet) -> float:
    """Power-weighted RMS delay spread in ns."""
    return delay_spread(mpcs.toa_ns, _check_nonempty(mpcs))


def rms_asa(mpcs: MpcSet, offset_step: float = 1.0) -> float:
    """Power-weighted RMS azimuth spread, minimized over reference-direction offsets."""
    return angular_spread(mpcs.aoa_az_deg, _check_nonempty(mpcs), offset_step)


def inter_cluster_delays(toa_ns: Any) -> NDArray[np.float64]:
    toa = np.sort(np.asarray(toa_ns, dtype=float))
    if toa.size < 2:
        raise ValueError("at least two clusters are required")
    return np.diff(toa)


def fit_cnl_points(excess_ns: Any, cnl_db: Any) -> tuple[float, float, float]:
    """Least-squares line and Pearson correlation of CNL versus excess delay."""
    x = np.asarray(excess_ns, dtype=float)
    y = np.asarray(cnl_db, dtype=float)
    if x.size < 2:
        raise ValueError("at least two points are required")
    fit = stats.linregress(x, y)
    corr = float(fit.rvalue) if np.isfinite(fit.rvalue) else 0.0
    return float(fit.slope), float(fit.intercept), corr


def cnl_regression(toa_ns: Any, power: Any, reference: int | None = None) -> CnlFit:
    """Normalized cluster loss of every non-reference cluster against its excess delay.

    The reference is the LoS cluster, defaulting to the first arrival.
    """
    toa = np.asarray(toa_ns, dtype=float)
    p = np.asarray(power, dtype=float)
    if reference is None:
        reference = int(np.argmin(toa))
    others = np.delete(np.arange(toa.size), reference)
    if others.size < 2:
        raise ValueError("at least two NLoS clusters are required")

    excess = toa[others] - toa[reference]
    cnl = 10 * np.log10(p[reference] / p[others])
    rank = np.argsort(-p[others], kind="stable")
    categories = np.full(others.size, CNL_CATEGORIES[2], dtype=object)
    categories[rank[0]] = CNL_CATEGORIES[0]
    categories[rank[1]] = CNL_CATEGORIES[1]

    slope, intercept, corr = fit_cnl_points(excess, cnl)
    return CnlFit(slope, intercept, corr, excess, cnl, tuple(categories.tolist()))


def summarize_clusters(mpcs: MpcSet) -> ClusterTable:
    """Collapse labeled MPCs to one row per cluster, dropping outliers."""
    if mpcs.labels is None:
        raise ValueError("MPCs must be labeled")
    labels = np.unique(mpcs.labels[mpcs.labels >= 0])
    rows = []
    power = mpcs.power_linear
    for label in labels:
        idx = np.flatnonzero(mpcs.labels == label)
        top = idx[np.argmax(power[idx])]
        rows.append((label, mpcs.toa_ns[top], mpcs.aoa_az_deg[top], mpcs.aoa_el_deg[top], power[idx].sum(), idx.size))
    rows.sort(key=lambda r: (r[1], r[0]))
    cols = list(zip(*rows)) if rows else [()] * 6
    return ClusterTable(
        label=np.asarray(cols[0], dtype=int),
        toa_ns=np.asarray(cols[1], dtype=float),
        aoa_az_deg=np.asarray(cols[2], dtype=float),
        aoa_el_deg=np.asarray(cols[3], dtype=float),
        power=np.asarray(cols[4], dtype=float),
        size=np.asarray(cols[5], dtype=int),
    )


def spread_stats(mpcs: MpcSet, offset_step: float = 1.0) -> DropStats | None:
    """DS, ASA, cluster gaps and CNL points of a labeled MPC set; None when empty."""
    if len(mpcs) == 0:
        return None
    clusters = summarize_clusters(mpcs)
    gaps: tuple[float, ...] = ()
    cnl_points: tuple[tuple[float, float, str], ...] = ()
    if len(clusters) >= 2:
        gaps = tuple(inter_cluster_delays(clusters.toa_ns).tolist())
    if len(clusters) >= 3:
        fit = cnl_regression(clusters.toa_ns, clusters.power, reference=0)
        cnl_points = tuple(zip(fit.excess_ns.tolist(), fit.cnl_db.tolist(), fit.categories))
    return DropStats(
        ds_ns=rms_delay_spread(mpcs),
        asa_deg=rms_asa(mpcs, offset_step),
        n_clusters=len(clusters),
        n_mpcs=len(mpcs),
        gaps_ns=gaps,
        cnl_points=cnl_points,
    )


def realization_mpcs(realization: ChannelRealization, dynamic_range_db: float = DYNAMIC_RANGE_DB) -> MpcSet:
    """Subpaths within dynamic_range_db of the strongest one, labeled by generating cluster."""
    cols = realization.arrays()
    amp = np.abs(cols["amplitude"])
    keep = amp > 0
    if not np.any(keep):
        return MpcSet(*(np.empty(0) for _ in range(4)), labels=np.empty(0, dtype=int))
    with np.errstate(divide="ignore"):
        power_db = 20 * np.log10(amp)
    keep &= power_db >= power_db[keep].max() - dynamic_range_db
    return MpcSet(
        toa_ns=cols["toa_ns"][keep],
        aoa_az_deg=cols["aoa_az_deg"][keep],
        aoa_el_deg=cols["aoa_el_deg"][keep],
        power_db=power_db[keep],
        labels=cols["cluster"][keep],
    )


def analyze_realization(
    realization: ChannelRealization,
    dynamic_range_db: float = DYNAMIC_RANGE_DB,
    offset_step: float = 1.0,
) -> DropStats | None:
    """Statistics of a realization read directly from its subpaths."""
    return spread_stats(realization_mpcs(realization, dynamic_range_db), offset_step)


def analyze_sweep(
    sweep: "SoundingSweep",
    min_pts: int = MIN_PTS,
    eps: float = EPS,
    zeta: float = ZETA,
    offset_step: float = 1.0,
    noise_floor_db: float | None = None,
) -> SweepAnalysis:
    """PDAP, thresholded MPCs, DBSCAN-MCD clusters and spread statistics of a sweep."""
    pdap = build_pdap(sweep, noise_floor_db)
    mpcs = pdap.mpcs()
    if len(mpcs) == 0:
        empty = mpcs.with_labels(np.empty(0, dtype=int))
        return SweepAnalysis(pdap, empty, summarize_clusters(empty), None)
    mpcs = dbscan_mcd(mpcs, min_pts, eps, zeta)
    return SweepAnalysis(pdap, mpcs, summarize_clusters(mpcs), spread_stats(mpcs, offset_step))


def fit_lognormal(values: Any) -> tuple[float, float]:
    """(mu, sigma) of the natural log of positive samples."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 or np.any(x <= 0):
        raise ValueError("log-normal fit needs at least two positive samples")
    shape, _, scale = stats.lognorm.fit(x, floc=0)
    return float(math.log(scale)), float(shape)


def fit_poisson(counts: Any) -> float:
    """Maximum-likelihood Poisson mean."""
    x = np.asarray(counts, dtype=float)
    if x.size == 0:
        raise ValueError("no counts to fit")
    return float(x.mean())


def fit_exponential(gaps_ns: Any) -> tuple[float, float]:
    """Exponential mean of inter-cluster delays and the KS p-value against it."""
    x = np.asarray(gaps_ns, dtype=float)
    if x.size < 2:
        raise ValueError("exponential fit needs at least two gaps")
    _, scale = stats.expon.fit(x, floc=0)
    pvalue = stats.kstest(x, "expon", args=(0, scale)).pvalue
    return float(scale), float(pvalue)
