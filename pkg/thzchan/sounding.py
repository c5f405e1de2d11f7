"""Synthetic frequency-domain channel sounding with a rotating directional receiver."""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .models import ChannelRealization
from .raytracer import direction_vector
from .scenario import SystemParams


logger = logging.getLogger(__name__)

SWEEP_FORMAT = "thzchan-sweep v1"


def antenna_gain_db(psi_deg: NDArray[np.float64] | float, hpbw_deg: float, sidelobe_db: float = -30.0):
    """Gaussian main lobe relative to the peak, floored at the side-lobe level."""
    psi = np.asarray(psi_deg, dtype=float)
    main = 10 * np.log10(np.e) * (-4 * np.log(2) * (psi / hpbw_deg) ** 2)
    return np.maximum(main, sidelobe_db)


def angular_separation_deg(u: NDArray[np.float64], v: NDArray[np.float64]) -> NDArray[np.float64]:
    """Great-circle angle between unit vectors stacked on the last axis."""
    cos = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(cos))


@dataclass(frozen=True)
class SoundingSweep:
    """Complex CTF samples with shape (n_az, n_el, n_sweep)."""

    system: SystemParams
    ctf: NDArray[np.complex128]
    seed: int | None = None
    truth: ChannelRealization | None = None

    @property
    def frequencies_ghz(self) -> NDArray[np.float64]:
        return self.system.frequencies_ghz

    @property
    def n_directions(self) -> int:
        return self.ctf.shape[0] * self.ctf.shape[1]


def _frequency_response(realization: ChannelRealization, system: SystemParams) -> tuple[NDArray, NDArray]:
    """Per-subpath response over the band (P x N) and arrival unit vectors (P x 3)."""
    cols = realization.arrays()
    f = system.frequencies_ghz
    scale = np.where(cols["traced"][:, None], realization.f_ref_ghz / f[None, :], 1.0)
    response = (
        (cols["amplitude"] * np.exp(1j * cols["phase_rad"]))[:, None]
        * scale
        * np.exp(-2j * np.pi * f[None, :] * cols["toa_ns"][:, None])
    )
    arrivals = direction_vector(cols["aoa_az_deg"], cols["aoa_el_deg"]).reshape(-1, 3)
    return response, arrivals


def _rx_weights(system: SystemParams, arrivals: NDArray, rx_dirs: NDArray) -> NDArray[np.float64]:
    psi = angular_separation_deg(rx_dirs[:, None, :], arrivals[None, :, :])
    gain_db = antenna_gain_db(psi, system.rx_hpbw_deg, system.sidelobe_db)
    return 10 ** (gain_db / 20)


def _noise(system: SystemParams, rng: np.random.Generator) -> NDArray[np.complex128]:
    # Per-sample variance that puts the mean IDFT tap power at the effective floor.
    variance = system.n_sweep * 10 ** (system.effective_noise_floor_db / 10)
    sigma = math.sqrt(variance / 2)
    return sigma * (rng.standard_normal(system.n_sweep) + 1j * rng.standard_normal(system.n_sweep))


def synthesize_ctf(
    realization: ChannelRealization,
    system: SystemParams,
    rx_dir: tuple[float, float],
    rng: np.random.Generator | None = None,
    noise: bool = True,
) -> NDArray[np.complex128]:
    """CTF seen by the Rx horn pointed at rx_dir = (az, el) in degrees.

    Antenna peak gains are de-embedded, so only the relative Rx pattern
    weights the subpaths; the Tx pattern is already part of the amplitudes.
    """
    response, arrivals = _frequency_response(realization, system)
    pointing = direction_vector(np.array([rx_dir[0]]), np.array([rx_dir[1]]))
    weights = _rx_weights(system, arrivals, pointing)
    ctf = (weights @ response)[0]
    if noise:
        rng = rng if rng is not None else np.random.default_rng(realization.seed)
        ctf = ctf + _noise(system, rng)
    return ctf


def full_scan(
    realization: ChannelRealization,
    system: SystemParams,
    seed: int | None = None,
    noise: bool = True,
) -> SoundingSweep:
    """Synthesize the CTF for every (az, el) direction of the rotation grid."""
    seed = realization.seed if seed is None else seed
    az = np.asarray(system.az_grid_deg, dtype=float)
    el = np.asarray(system.el_grid_deg, dtype=float)
    az_mesh, el_mesh = np.meshgrid(az, el, indexing="ij")
    pointing = direction_vector(az_mesh.ravel(), el_mesh.ravel())

    response, arrivals = _frequency_response(realization, system)
    weights = _rx_weights(system, arrivals, pointing)
    ctf = (weights @ response).reshape(az.size, el.size, system.n_sweep)

    if noise:
        for i in range(az.size):
            for j in range(el.size):
                ctf[i, j] += _noise(system, np.random.default_rng([seed, i, j]))
    logger.debug("Scanned %d directions of %d subpaths", az.size * el.size, response.shape[0])
    return SoundingSweep(system=system, ctf=ctf, seed=seed, truth=realization)


def calibrate_ctf(
    s_measured: NDArray[np.complex128],
    s_calibration: NDArray[np.complex128],
    h_attenuator: NDArray[np.complex128],
) -> NDArray[np.complex128]:
    """De-embed the system response: H = S_measured * H_attenuator / S_calibration."""
    s_calibration = np.asarray(s_calibration)
    if np.any(s_calibration == 0):
        raise ValueError("calibration response has zeros; cannot de-embed")
    return np.asarray(s_measured) * np.asarray(h_attenuator) / s_calibration


def write_sweep_csv(sweep: SoundingSweep, path: Path) -> Path:
    """Write a versioned sweep file; identical sweeps give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    f = sweep.frequencies_ghz
    with path.open("w", newline="") as fh:
        fh.write(f"# {SWEEP_FORMAT}\n")
        fh.write(f"# system: {json.dumps(sweep.system.model_dump(mode='json'), sort_keys=True)}\n")
        fh.write(f"# seed: {'' if sweep.seed is None else sweep.seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["az_deg", "el_deg", "f_ghz", "re", "im"])
        for i, az in enumerate(sweep.system.az_grid_deg):
            for j, el in enumerate(sweep.system.el_grid_deg):
                for s, value in enumerate(sweep.ctf[i, j].tolist()):
                    writer.writerow([repr(az), repr(el), repr(float(f[s])), repr(value.real), repr(value.imag)])
    return path


def read_sweep_csv(path: Path) -> SoundingSweep:
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if header != f"# {SWEEP_FORMAT}":
            raise ValueError(f"{path}: not a {SWEEP_FORMAT} file")
        system_line = fh.readline().strip()
        seed_line = fh.readline().strip()
        system = SystemParams.model_validate(json.loads(system_line.split(":", 1)[1]))
        seed_text = seed_line.split(":", 1)[1].strip()
        reader = csv.DictReader(fh)
        values = np.array([complex(float(r["re"]), float(r["im"])) for r in reader], dtype=complex)

    shape = (len(system.az_grid_deg), len(system.el_grid_deg), system.n_sweep)
    if values.size != math.prod(shape):
        raise ValueError(f"{path}: expected {math.prod(shape)} samples, found {values.size}")
    return SoundingSweep(system=system, ctf=values.reshape(shape), seed=int(seed_text) if seed_text else None)
