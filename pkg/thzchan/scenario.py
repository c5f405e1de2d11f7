"""Per-scenario model parameters and measurement-system presets."""

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class ScenarioKind(str, Enum):
    """The four measured indoor scenarios."""

    MEETING_ROOM = "meeting_room"
    CUBICLE_AREA = "cubicle_area"
    HALLWAY = "hallway"
    NLOS = "nlos"


# Cross-scenario log-normal fit of the reflection loss in dB.
RL_MU_LN = 2.71
RL_SIGMA_LN = 0.50

# Mean log DS / ASA produced by the hybrid model in the published validation.
VALIDATION_LOG_DS = {
    ScenarioKind.MEETING_ROOM: 1.50,
    ScenarioKind.CUBICLE_AREA: 1.91,
    ScenarioKind.HALLWAY: 1.18,
    ScenarioKind.NLOS: 2.79,
}
VALIDATION_LOG_ASA = {
    ScenarioKind.MEETING_ROOM: 3.39,
    ScenarioKind.CUBICLE_AREA: 3.55,
    ScenarioKind.HALLWAY: 2.99,
    ScenarioKind.NLOS: 4.06,
}


class ScenarioParams(BaseModel):
    """Fitted and calibratable parameters of one scenario.

    mu_log_ds and mu_log_asa are natural logs of the RMS delay spread in ns and
    of the RMS azimuth spread in degrees.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ScenarioKind
    ple_best: float = Field(gt=0)
    ple_omni: float = Field(gt=0)
    lambda_n: float = Field(gt=0)
    mu_log_ds: float
    mu_log_asa: float
    mu_dtau: float = Field(gt=0)
    rl_mu_ln: float = RL_MU_LN
    rl_sigma_ln: float = Field(default=RL_SIGMA_LN, gt=0)

    # Free parameters, overwritten by calibration.
    k_factor_db: float = 10.0
    xi_db: float = Field(default=3.0, ge=0)
    r_tau: float = Field(default=2.0, ge=1)
    r_phi: float = Field(default=1.0, gt=0)
    r_tau_c: float = Field(default=0.5, gt=0)
    r_phi_c: float = Field(default=5.0, gt=0)
    m_subpaths: int = Field(default=20, ge=1)

    # Generator switches.
    los: bool = True
    deterministic: bool = False
    max_reflection_order: int = Field(default=2, ge=0)
    rl_per_bounce: bool = False
    double_count_guard: bool = True
    dynamic_range_db: float = Field(default=40.0, gt=0)
    sigma_sf_db: float = Field(default=0.0, ge=0)
    f_ref_ghz: float = Field(default=205.0, gt=0)
    distance_range_m: tuple[float, float] = (1.0, 10.0)

    @model_validator(mode="after")
    def _check_distance_range(self) -> "ScenarioParams":
        lo, hi = self.distance_range_m
        if lo < 1.0 or hi < lo:
            raise ValueError(f"distance_range_m must satisfy 1 <= lo <= hi, got {self.distance_range_m}")
        return self

    @property
    def sigma_tau(self) -> float:
        """Delay proportionality factor paired with r_tau (r_tau * sigma_tau = mu_dtau)."""
        return self.mu_dtau / self.r_tau

    @property
    def mu_asa_deg(self) -> float:
        return math.exp(self.mu_log_asa)


_PRESETS = {
    ScenarioKind.MEETING_ROOM: dict(
        ple_best=2.13, ple_omni=1.68, lambda_n=5.94, mu_log_ds=1.50, mu_log_asa=3.38,
        mu_dtau=11.89, los=True, deterministic=True, distance_range_m=(1.5, 9.0),
    ),
    ScenarioKind.CUBICLE_AREA: dict(
        ple_best=2.22, ple_omni=1.79, lambda_n=3.79, mu_log_ds=1.91, mu_log_asa=3.61,
        mu_dtau=12.68, los=True, deterministic=False, distance_range_m=(3.5, 14.0),
    ),
    ScenarioKind.HALLWAY: dict(
        ple_best=1.98, ple_omni=1.50, lambda_n=2.57, mu_log_ds=1.20, mu_log_asa=3.00,
        mu_dtau=40.68, los=True, deterministic=True, distance_range_m=(2.0, 30.0),
    ),
    ScenarioKind.NLOS: dict(
        ple_best=3.59, ple_omni=2.82, lambda_n=2.10, mu_log_ds=2.83, mu_log_asa=4.01,
        mu_dtau=18.48, los=False, deterministic=False, distance_range_m=(3.75, 20.0),
    ),
}


def preset(kind: ScenarioKind | str) -> ScenarioParams:
    """Return the fitted parameters of a scenario with default free parameters."""
    kind = ScenarioKind(kind)
    return ScenarioParams(kind=kind, **_PRESETS[kind])


def reflection_loss_params() -> tuple[float, float]:
    """Log-normal (mu_ln, sigma_ln) of the reflection loss in dB over all scenarios."""
    return RL_MU_LN, RL_SIGMA_LN


class SystemParams(BaseModel):
    """Frequency-domain sounder: VNA sweep, horn antennas and rotation grid."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    f_start_ghz: float = Field(default=201.0, gt=0)
    f_end_ghz: float = Field(default=209.0, gt=0)
    n_sweep: int = Field(default=801, ge=2)
    noise_floor_dbm: float = -140.0
    tx_power_dbm: float = 0.0
    tx_hpbw_deg: float = Field(default=60.0, gt=0)
    rx_hpbw_deg: float = Field(default=10.0, gt=0)
    tx_gain_dbi: float = 8.0
    rx_gain_dbi: float = 25.0
    sidelobe_db: float = Field(default=-30.0, le=0)
    az_grid_deg: tuple[float, ...] = tuple(float(a) for a in range(0, 360, 10))
    el_grid_deg: tuple[float, ...] = (-20.0, -10.0, 0.0, 10.0, 20.0)
    window_w: int = Field(default=50, ge=1)
    deembed_antenna_gain: bool = True

    @model_validator(mode="after")
    def _check_band(self) -> "SystemParams":
        if self.f_end_ghz <= self.f_start_ghz:
            raise ValueError("f_end_ghz must exceed f_start_ghz")
        if self.window_w > self.n_sweep:
            raise ValueError(f"window_w ({self.window_w}) cannot exceed n_sweep ({self.n_sweep})")
        if not self.az_grid_deg or not self.el_grid_deg:
            raise ValueError("rotation grids must not be empty")
        return self

    @property
    def bandwidth_ghz(self) -> float:
        return self.f_end_ghz - self.f_start_ghz

    @property
    def sweep_interval_ghz(self) -> float:
        return self.bandwidth_ghz / (self.n_sweep - 1)

    @property
    def max_excess_delay_ns(self) -> float:
        return 1.0 / self.sweep_interval_ghz

    @property
    def delay_resolution_ns(self) -> float:
        """Spacing of the IDFT delay bins (about 125 ps for the preset band)."""
        return self.max_excess_delay_ns / self.n_sweep

    @property
    def frequencies_ghz(self) -> np.ndarray:
        return np.linspace(self.f_start_ghz, self.f_end_ghz, self.n_sweep)

    @property
    def effective_noise_floor_db(self) -> float:
        """Noise floor of the CIR in channel units, after antenna gain de-embedding."""
        floor = self.noise_floor_dbm - self.tx_power_dbm
        if self.deembed_antenna_gain:
            floor -= self.tx_gain_dbi + self.rx_gain_dbi
        return floor


def system_preset(kind: ScenarioKind | str) -> SystemParams:
    """Sounder settings of a scenario: the meeting room had a 20 dB lower noise floor."""
    kind = ScenarioKind(kind)
    floor = -160.0 if kind is ScenarioKind.MEETING_ROOM else -140.0
    return SystemParams(noise_floor_dbm=floor)
