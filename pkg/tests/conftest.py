"""Pytest fixtures for thzchan tests."""

import os
import tempfile
from pathlib import Path

import pytest

from thzchan import db
from thzchan.models import ChannelRealization, Cluster, PathOrigin, Subpath
from thzchan.raytracer import RoomGeometry, geometry_preset
from thzchan.scenario import ScenarioKind, SystemParams, preset


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def store_dir(temp_dir):
    """Create a temporary result store and change to its directory."""
    original_cwd = os.getcwd()
    os.chdir(temp_dir)

    try:
        db.init_store()
        yield temp_dir
    finally:
        os.chdir(original_cwd)


@pytest.fixture
def meeting_params():
    return preset(ScenarioKind.MEETING_ROOM)


@pytest.fixture
def hallway_params():
    return preset(ScenarioKind.HALLWAY)


@pytest.fixture
def nlos_params():
    return preset(ScenarioKind.NLOS)


@pytest.fixture
def meeting_geometry():
    """Meeting room with the Rx 5 m from the Tx."""
    return geometry_preset(ScenarioKind.MEETING_ROOM, 5.0)


@pytest.fixture
def hallway_geometry():
    """Hallway with the Rx 10 m down the corridor; the LoS arrives from azimuth 180."""
    return geometry_preset(ScenarioKind.HALLWAY, 10.0)


@pytest.fixture
def box_room():
    """Plain 10 x 10 x 5 m room with one active wall at y = 0."""
    return RoomGeometry(
        length=10.0,
        width=10.0,
        height=5.0,
        tx_pos=(1.0, 1.0, 1.0),
        rx_pos=(4.0, 1.0, 1.0),
        active_surfaces=("south",),
        max_reflection_order=1,
    )


@pytest.fixture
def flat_system():
    """Azimuth-only scan grid with a floor low enough to leave paths untouched."""
    return SystemParams(el_grid_deg=(0.0,), noise_floor_dbm=-250.0)


@pytest.fixture
def make_realization():
    """Build a realization with one single-subpath cluster per (toa_ns, az_deg, amplitude)."""

    def _make(paths, traced=False, scenario=ScenarioKind.MEETING_ROOM, seed=7):
        clusters = []
        for index, (toa, az, amp) in enumerate(paths):
            sub = Subpath(toa, az, 0.0, amp, 0.0, 1.0)
            clusters.append(
                Cluster(index, toa, 0.0, az, (sub,), PathOrigin.STATISTICAL, traced=traced)
            )
        return ChannelRealization(
            scenario=scenario,
            distance_m=5.0,
            clusters=tuple(clusters),
            seed=seed,
            pl_omni_db=0.0,
            f_ref_ghz=205.0,
        )

    return _make
