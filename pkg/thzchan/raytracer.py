"""Image-method ray tracing inside an axis-aligned rectangular room."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.constants import c as SPEED_OF_LIGHT

from .scenario import ScenarioKind, preset


logger = logging.getLogger(__name__)

# Surface name -> (axis, True for the far face at length/width/height).
SURFACES: dict[str, tuple[int, bool]] = {
    "west": (0, False),
    "east": (0, True),
    "south": (1, False),
    "north": (1, True),
    "floor": (2, False),
    "ceiling": (2, True),
}

EDGE_TOLERANCE = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate rooms or antenna placements outside the room."""


def wrap_deg(angle: Any) -> Any:
    """Wrap angles in degrees into [0, 360)."""
    wrapped = np.mod(angle, 360.0)
    wrapped = np.where(wrapped >= 360.0, 0.0, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def direction_vector(az_deg: Any, el_deg: Any) -> NDArray[np.float64]:
    """Unit vector(s) for azimuth/elevation pairs in degrees, stacked on the last axis."""
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    return np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el) * np.ones_like(az)],
        axis=-1,
    )


def arrival_angles(rx: NDArray[np.float64], source: NDArray[np.float64]) -> tuple[float, float]:
    """Azimuth and elevation at rx of a ray arriving from source."""
    d = np.asarray(source, dtype=float) - np.asarray(rx, dtype=float)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise GeometryError("arrival direction undefined for coincident points")
    az = wrap_deg(math.degrees(math.atan2(d[1], d[0])))
    el = math.degrees(math.asin(max(-1.0, min(1.0, d[2] / norm))))
    return az, el


class RoomGeometry(BaseModel):
    """Room box with origin at the south-west floor corner, plus Tx/Rx positions."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    length: float = Field(gt=0)
    width: float = Field(gt=0)
    height: float = Field(gt=0)
    tx_pos: tuple[float, float, float]
    rx_pos: tuple[float, float, float]
    active_surfaces: tuple[str, ...] = tuple(SURFACES)
    max_reflection_order: int = Field(default=2, ge=0)
    tx_target: tuple[float, float, float] | None = None
    drop_azimuth_deg: float = 0.0
    drop_azimuth_span_deg: float = Field(default=0.0, ge=0)

    @field_validator("active_surfaces")
    @classmethod
    def _known_surfaces(cls, value: tuple[str, ...]) -> tuple[str, ...]:
        unknown = [s for s in value if s not in SURFACES]
        if unknown:
            raise ValueError(f"Unknown surfaces: {', '.join(unknown)}. Must be one of: {', '.join(SURFACES)}")
        return value

    @model_validator(mode="after")
    def _inside(self) -> "RoomGeometry":
        for label, pos in (("tx_pos", self.tx_pos), ("rx_pos", self.rx_pos)):
            if not self.contains(pos):
                raise GeometryError(f"{label} {pos} lies outside the room")
        return self

    @property
    def dims(self) -> tuple[float, float, float]:
        return (self.length, self.width, self.height)

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.rx_pos, self.tx_pos)))

    def contains(self, pos: Iterable[float]) -> bool:
        """Whether a point is strictly inside the room."""
        return all(0.0 < p < dim for p, dim in zip(pos, self.dims))

    def plane(self, surface: str) -> tuple[int, float]:
        axis, far = SURFACES[surface]
        return axis, (self.dims[axis] if far else 0.0)

    def with_rx(self, rx_pos: Iterable[float]) -> "RoomGeometry":
        rx = tuple(float(v) for v in rx_pos)
        if not self.contains(rx):
            raise GeometryError(f"rx_pos {rx} lies outside the room")
        return self.model_copy(update={"rx_pos": rx})

    def at_distance(self, distance_m: float, azimuth_deg: float | None = None) -> "RoomGeometry":
        """Place the Rx on the Tx height plane at a horizontal distance from the Tx."""
        if distance_m <= 0:
            raise GeometryError(f"distance must be positive, got {distance_m}")
        az = math.radians(self.drop_azimuth_deg if azimuth_deg is None else azimuth_deg)
        tx = self.tx_pos
        rx = (tx[0] + distance_m * math.cos(az), tx[1] + distance_m * math.sin(az), tx[2])
        return self.with_rx(rx)


def sample_drop_geometry(
    base: RoomGeometry,
    distance_range_m: tuple[float, float],
    rng: np.random.Generator,
    max_tries: int = 200,
) -> RoomGeometry:
    """Draw a random Rx placement inside the room, rejecting placements outside it."""
    lo, hi = distance_range_m
    span = base.drop_azimuth_span_deg
    for _ in range(max_tries):
        distance = float(rng.uniform(lo, hi))
        azimuth = base.drop_azimuth_deg + float(rng.uniform(-span, span))
        try:
            return base.at_distance(distance, azimuth)
        except GeometryError:
            continue
    raise GeometryError(
        f"no Rx placement inside the room after {max_tries} tries for distances {lo}-{hi} m"
    )


@dataclass(frozen=True)
class TracedPath:
    """A specular path from Tx to Rx.

    vertices are the reflection points in propagation order; aod is the unit
    departure vector at the Tx.
    """

    toa_ns: float
    aoa_az_deg: float
    aoa_el_deg: float
    aod: tuple[float, float, float]
    reflection_order: int
    surfaces_hit: tuple[str, ...]
    vertices: tuple[tuple[float, float, float], ...]
    length_m: float

    def gain(self, f_ghz: float, rl_db: float = 0.0) -> float:
        return path_gain(self, f_ghz, rl_db)


def path_gain(path: TracedPath, f_ghz: float, rl_db: float = 0.0) -> float:
    """Friis amplitude of a path with the total reflection loss rl_db applied once."""
    if path.toa_ns <= 0:
        raise ValueError("path delay must be positive")
    if f_ghz <= 0:
        raise ValueError("frequency must be positive")
    return 10 ** (-rl_db / 20) / (4 * math.pi * f_ghz * path.toa_ns)


def _mirror(point: NDArray[np.float64], axis: int, coord: float) -> NDArray[np.float64]:
    image = point.copy()
    image[axis] = 2 * coord - image[axis]
    return image


def _unfold(geom: RoomGeometry, tx: NDArray, rx: NDArray, sequence: tuple[str, ...]) -> list[NDArray] | None:
    planes = [geom.plane(s) for s in sequence]
    images = [tx]
    for axis, coord in planes:
        images.append(_mirror(images[-1], axis, coord))

    vertices: list[NDArray] = []
    current = rx
    for k in range(len(planes), 0, -1):
        axis, coord = planes[k - 1]
        target = images[k]
        denom = target[axis] - current[axis]
        if denom == 0.0:
            return None
        t = (coord - current[axis]) / denom
        if not 0.0 < t < 1.0:
            return None
        point = current + t * (target - current)
        point[axis] = coord
        for other in range(3):
            if other != axis and not -EDGE_TOLERANCE <= point[other] <= geom.dims[other] + EDGE_TOLERANCE:
                return None
        vertices.insert(0, point)
        current = point
    return vertices


def _build_path(tx: NDArray, rx: NDArray, vertices: list[NDArray], sequence: tuple[str, ...]) -> TracedPath:
    points = [tx, *vertices, rx]
    length = float(sum(np.linalg.norm(b - a) for a, b in zip(points, points[1:])))
    az, el = arrival_angles(rx, points[-2])
    departure = points[1] - tx
    departure = departure / np.linalg.norm(departure)
    return TracedPath(
        toa_ns=length / SPEED_OF_LIGHT * 1e9,
        aoa_az_deg=az,
        aoa_el_deg=el,
        aod=tuple(float(v) for v in departure),
        reflection_order=len(sequence),
        surfaces_hit=sequence,
        vertices=tuple(tuple(float(v) for v in p) for p in vertices),
        length_m=length,
    )


def trace(geom: RoomGeometry, max_order: int | None = None) -> list[TracedPath]:
    """Enumerate the LoS and all specular paths up to max_order, sorted by ToA."""
    max_order = geom.max_reflection_order if max_order is None else max_order
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    tx = np.asarray(geom.tx_pos, dtype=float)
    rx = np.asarray(geom.rx_pos, dtype=float)
    if np.allclose(tx, rx, rtol=0.0, atol=1e-12):
        raise GeometryError("Tx and Rx coincide")

    paths = [_build_path(tx, rx, [], ())]
    for order in range(1, max_order + 1):
        for sequence in itertools.product(geom.active_surfaces, repeat=order):
            if any(a == b for a, b in zip(sequence, sequence[1:])):
                continue
            vertices = _unfold(geom, tx, rx, sequence)
            if vertices is not None:
                paths.append(_build_path(tx, rx, vertices, sequence))

    paths.sort(key=lambda p: (p.toa_ns, p.surfaces_hit))
    logger.debug("Traced %d paths up to order %d", len(paths), max_order)
    return paths


def hallway_geometry_check(los_length_m: float, wall_offset_m: float) -> tuple[float, float]:
    """Excess length and angular separation of the first side-wall reflection in a hallway."""
    if los_length_m <= 0 or wall_offset_m <= 0:
        raise ValueError("lengths must be positive")
    # sqrt(L^2 + 4 Lr^2) - L, rearranged to avoid cancellation for long hallways.
    delta_l = 4 * wall_offset_m**2 / (math.hypot(los_length_m, 2 * wall_offset_m) + los_length_m)
    delta_phi = math.degrees(math.atan(2 * wall_offset_m / los_length_m))
    return delta_l, delta_phi


def resolvable_from_los(delta_l_m: float, bandwidth_ghz: float = 8.0) -> bool:
    """Whether an excess path length exceeds the delay resolution c/B."""
    return delta_l_m > SPEED_OF_LIGHT / (bandwidth_ghz * 1e9)


def paths_to_rows(paths: list[TracedPath], f_ref_ghz: float) -> list[dict[str, Any]]:
    """Flatten traced paths for CSV export, with the free-space gain at f_ref_ghz."""
    return [
        {
            "toa_ns": p.toa_ns,
            "aoa_az_deg": p.aoa_az_deg,
            "aoa_el_deg": p.aoa_el_deg,
            "order": p.reflection_order,
            "surfaces": "+".join(p.surfaces_hit),
            "gain_db": 20 * math.log10(p.gain(f_ref_ghz)),
        }
        for p in paths
    ]


_OFFICE = dict(length=30.0, width=20.0, height=3.0)
_WALLS = ("west", "east", "south", "north")

_GEOMETRY_PRESETS: dict[ScenarioKind, dict[str, Any]] = {
    ScenarioKind.MEETING_ROOM: dict(
        length=10.15, width=7.9, height=5.8, tx_pos=(0.8, 0.8, 1.5),
        active_surfaces=_WALLS, drop_azimuth_deg=36.0, drop_azimuth_span_deg=25.0,
    ),
    ScenarioKind.CUBICLE_AREA: dict(
        **_OFFICE, tx_pos=(2.0, 2.0, 1.5), drop_azimuth_deg=30.0, drop_azimuth_span_deg=20.0,
    ),
    # End walls are left out: the corridor opens into the office at both ends.
    ScenarioKind.HALLWAY: dict(
        length=31.0, width=2.5, height=3.0, tx_pos=(0.5, 0.8, 1.2),
        active_surfaces=("south", "north", "floor", "ceiling"),
    ),
    ScenarioKind.NLOS: dict(
        **_OFFICE, tx_pos=(2.0, 18.0, 1.5), drop_azimuth_deg=-20.0, drop_azimuth_span_deg=20.0,
    ),
}


def geometry_preset(kind: ScenarioKind | str, distance_m: float | None = None) -> RoomGeometry:
    """Room of a scenario with the Rx at distance_m (default: lower end of the drop range)."""
    kind = ScenarioKind(kind)
    fields = dict(_GEOMETRY_PRESETS[kind])
    if distance_m is None:
        distance_m = preset(kind).distance_range_m[0]
    tx = fields["tx_pos"]
    az = math.radians(fields.get("drop_azimuth_deg", 0.0))
    fields["rx_pos"] = (tx[0] + distance_m * math.cos(az), tx[1] + distance_m * math.sin(az), tx[2])
    try:
        return RoomGeometry(**fields)
    except ValueError as exc:
        raise GeometryError(f"{kind.value}: Rx at {distance_m} m does not fit in the room") from exc
