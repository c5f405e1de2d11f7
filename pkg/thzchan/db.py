"""TinyDB result store for thzchan."""

from pathlib import Path
from typing import Any

from tinydb import Query, TinyDB


STORE_DIR = "data"
STORE_FILE = "store.json"
CALIBRATIONS = "calibrations"
RUNS = "runs"


def get_store_path() -> Path:
    """Get the path to the store database file."""
    return Path.cwd() / STORE_DIR / STORE_FILE


def store_exists() -> bool:
    """Check if a store has been initialized in the current directory."""
    return get_store_path().exists()


def init_store() -> Path:
    """Initialize a new store in the current directory."""
    store_dir = Path.cwd() / STORE_DIR
    store_dir.mkdir(exist_ok=True)
    store_path = store_dir / STORE_FILE

    db = TinyDB(store_path)
    db.close()

    return store_path


def get_db() -> TinyDB:
    """Get a connection to the store database."""
    store_path = get_store_path()
    if not store_path.exists():
        raise FileNotFoundError(
            "No result store found. Run 'thzchan init' to create one."
        )
    return TinyDB(store_path)


def _insert(table: str, record: dict[str, Any]) -> int:
    db = get_db()
    try:
        return db.table(table).insert(record)
    finally:
        db.close()


def _search(table: str, scenario: str | None) -> list[dict[str, Any]]:
    db = get_db()
    try:
        records = db.table(table)
        if scenario is None:
            return records.all()
        Record = Query()
        return records.search(Record.scenario == scenario)
    finally:
        db.close()


def save_calibration(record: dict[str, Any]) -> int:
    """Store a calibration record."""
    return _insert(CALIBRATIONS, record)


def get_calibrations(scenario: str | None = None) -> list[dict[str, Any]]:
    """Get all calibration records, optionally for one scenario."""
    return _search(CALIBRATIONS, scenario)


def get_latest_calibration(scenario: str) -> dict[str, Any] | None:
    """Get the most recently stored calibration of a scenario."""
    records = get_calibrations(scenario)
    if not records:
        return None
    return max(records, key=lambda r: r.doc_id)


def delete_calibrations(scenario: str) -> int:
    """Delete every calibration of a scenario; returns how many were removed."""
    db = get_db()
    try:
        Record = Query()
        return len(db.table(CALIBRATIONS).remove(Record.scenario == scenario))
    finally:
        db.close()


def save_run(record: dict[str, Any]) -> int:
    """Store a run manifest record."""
    return _insert(RUNS, record)


def get_runs(scenario: str | None = None) -> list[dict[str, Any]]:
    """Get all run records, optionally for one scenario."""
    return _search(RUNS, scenario)
