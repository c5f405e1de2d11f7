"""Channel realization types and store record schemas for thzchan."""

import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

import numpy as np

from .scenario import ScenarioKind


REALIZATION_SCHEMA = "thzchan-realization/1"
RECORD_TYPES = ["calibration", "run"]


class PathOrigin(str, Enum):
    LOS = "los"
    DETERMINISTIC = "deterministic"
    STATISTICAL = "statistical"


@dataclass(frozen=True)
class Subpath:
    """One ray of a cluster. amplitude is linear at the reference frequency."""

    toa_ns: float
    aoa_az_deg: float
    aoa_el_deg: float
    amplitude: float
    phase_rad: float
    power_frac_within_cluster: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "toa_ns": self.toa_ns,
            "aoa_az_deg": self.aoa_az_deg,
            "aoa_el_deg": self.aoa_el_deg,
            "amp": self.amplitude,
            "phase_rad": self.phase_rad,
            "power_frac_within_cluster": self.power_frac_within_cluster,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Subpath":
        return cls(
            toa_ns=data["toa_ns"],
            aoa_az_deg=data["aoa_az_deg"],
            aoa_el_deg=data["aoa_el_deg"],
            amplitude=data["amp"],
            phase_rad=data["phase_rad"],
            power_frac_within_cluster=data["power_frac_within_cluster"],
        )


@dataclass(frozen=True)
class Cluster:
    """A group of subpaths.

    power_frac is the cluster's share of the total realization power. Traced
    clusters (the ray-traced LoS and wall reflections) follow Friis and scale
    as 1/f across the band; statistical ones are flat.
    """

    index: int
    toa_ns: float
    power_frac: float
    aoa_az_deg: float
    subpaths: tuple[Subpath, ...]
    origin: PathOrigin
    traced: bool = False
    reflection_order: int | None = None
    rl_db: float | None = None

    @property
    def power(self) -> float:
        return float(sum(s.amplitude**2 for s in self.subpaths))

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "toa_ns": self.toa_ns,
            "power_frac": self.power_frac,
            "aoa_az_deg": self.aoa_az_deg,
            "origin": self.origin.value,
            "traced": self.traced,
            "reflection_order": self.reflection_order,
            "rl_db": self.rl_db,
            "subpaths": [s.to_dict() for s in self.subpaths],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Cluster":
        return cls(
            index=data["index"],
            toa_ns=data["toa_ns"],
            power_frac=data["power_frac"],
            aoa_az_deg=data["aoa_az_deg"],
            subpaths=tuple(Subpath.from_dict(s) for s in data["subpaths"]),
            origin=PathOrigin(data["origin"]),
            traced=data.get("traced", False),
            reflection_order=data.get("reflection_order"),
            rl_db=data.get("rl_db"),
        )


@dataclass(frozen=True)
class ChannelRealization:
    """One drop of the channel: clusters sorted by ToA plus the drop context."""

    scenario: ScenarioKind
    distance_m: float
    clusters: tuple[Cluster, ...]
    seed: int
    pl_omni_db: float
    f_ref_ghz: float
    tx_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rx_pos: tuple[float, float, float] = (0.0, 0.0, 0.0)
    los_az_deg: float = 0.0
    los_el_deg: float = 0.0

    @property
    def subpaths(self) -> list[Subpath]:
        return [s for c in self.clusters for s in c.subpaths]

    @property
    def total_power(self) -> float:
        return float(sum(c.power for c in self.clusters))

    def arrays(self) -> dict[str, np.ndarray]:
        """Per-subpath columns: toa, az, el, amplitude, phase, cluster index, traced flag."""
        rows = [(c, s) for c in self.clusters for s in c.subpaths]
        return {
            "toa_ns": np.array([s.toa_ns for _, s in rows], dtype=float),
            "aoa_az_deg": np.array([s.aoa_az_deg for _, s in rows], dtype=float),
            "aoa_el_deg": np.array([s.aoa_el_deg for _, s in rows], dtype=float),
            "amplitude": np.array([s.amplitude for _, s in rows], dtype=float),
            "phase_rad": np.array([s.phase_rad for _, s in rows], dtype=float),
            "cluster": np.array([c.index for c, _ in rows], dtype=int),
            "traced": np.array([c.traced for c, _ in rows], dtype=bool),
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REALIZATION_SCHEMA,
            "scenario": self.scenario.value,
            "distance_m": self.distance_m,
            "seed": self.seed,
            "pl_omni_db": self.pl_omni_db,
            "f_ref_ghz": self.f_ref_ghz,
            "tx_pos": list(self.tx_pos),
            "rx_pos": list(self.rx_pos),
            "los_az_deg": self.los_az_deg,
            "los_el_deg": self.los_el_deg,
            "clusters": [c.to_dict() for c in self.clusters],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChannelRealization":
        schema = data.get("schema")
        if schema != REALIZATION_SCHEMA:
            raise ValueError(f"Unsupported realization schema: {schema!r}")
        return cls(
            scenario=ScenarioKind(data["scenario"]),
            distance_m=data["distance_m"],
            clusters=tuple(Cluster.from_dict(c) for c in data["clusters"]),
            seed=data["seed"],
            pl_omni_db=data["pl_omni_db"],
            f_ref_ghz=data["f_ref_ghz"],
            tx_pos=tuple(data["tx_pos"]),
            rx_pos=tuple(data["rx_pos"]),
            los_az_deg=data["los_az_deg"],
            los_el_deg=data["los_el_deg"],
        )

    def to_rows(self) -> list[dict[str, Any]]:
        """Flat per-subpath rows for CSV export."""
        return [
            {"cluster": c.index, "origin": c.origin.value, **s.to_dict()}
            for c in self.clusters
            for s in c.subpaths
        ]


def generate_id() -> str:
    """Generate a unique ID for a store record."""
    return str(uuid.uuid4())[:8]


def create_record(
    record_type: str,
    scenario: ScenarioKind | str,
    payload: dict[str, Any],
    metadata: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Create a new store document."""
    if record_type not in RECORD_TYPES:
        raise ValueError(f"Invalid record type: {record_type}. Must be one of {RECORD_TYPES}")

    return {
        "id": generate_id(),
        "type": record_type,
        "scenario": ScenarioKind(scenario).value,
        "payload": payload,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "metadata": metadata or {},
    }
