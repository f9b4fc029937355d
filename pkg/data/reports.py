"""
CSV / JSON report writers and the readers that re-parse them.

Floats are written with 17 significant digits so every file round-trips exactly.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd

from analysis.metrics import InsertionRecord
from exceptions import ConfigError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

CONTACT_COLUMNS = ["time", "depth", "contacts", "on_axis", "min_clearance"]
FIELD_COLUMNS = ["x", "y", "z", "dx", "dy", "dz"]
TRACE_COLUMNS = [
    "index", "phase", "cluster_spacing", "cluster_radius", "cluster_stiffness",
    "link_radius", "link_stiffness", "score", "rmse", "stable", "message",
]
VALIDATION_COLUMNS = ["plane", "side", "index", "x", "y", "z", "sim_disp", "ref_disp", "rel_error"]

PathLike = Union[str, Path]


def _write(df: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(df)} rows to {path}")
    return path


def _read(path: PathLike, columns: List[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        df = pd.read_csv(path, comment="#", float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise ConfigError(f"file is empty: {path}")
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    return df


# =============================================================================
# RECORD
# =============================================================================

def write_record(record: InsertionRecord, path: PathLike) -> Path:
    return _write(record.to_dataframe(), path)


def read_record(path: PathLike) -> InsertionRecord:
    return InsertionRecord.from_dataframe(_read(path, ["time", "depth", "slab_avg_disp", "com_disp"]))


# =============================================================================
# CONTACTS
# =============================================================================

def write_contacts(frames, path: PathLike) -> Path:
    """One row per solver step."""
    df = pd.DataFrame(
        [[f.time, f.depth, f.contacts, f.on_axis, f.min_clearance] for f in frames],
        columns=CONTACT_COLUMNS,
    )
    return _write(df, path)


def read_contacts(path: PathLike) -> pd.DataFrame:
    return _read(path, CONTACT_COLUMNS)


# =============================================================================
# DISPLACEMENT FIELD
# =============================================================================

def write_field(rest: np.ndarray, positions: np.ndarray, path: PathLike) -> Path:
    """Rest position and final displacement per particle."""
    rest = np.asarray(rest, dtype=float)
    disp = np.asarray(positions, dtype=float) - rest
    return _write(pd.DataFrame(np.hstack([rest, disp]), columns=FIELD_COLUMNS), path)


# =============================================================================
# HEATMAP
# =============================================================================

def write_heatmap(heatmap: pd.DataFrame, path: PathLike) -> Path:
    """Per-structure CoM displacement: one row per depth, one column per structure."""
    return _write(heatmap.reset_index(), path)


def read_heatmap(path: PathLike) -> pd.DataFrame:
    return _read(path, ["depth"]).set_index("depth")


# =============================================================================
# SUMMARY
# =============================================================================

def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_summary(summary: Dict, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(summary, f, indent=2, default=_json_default)
    return path


def read_summary(path: PathLike) -> Dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    with open(path, "r") as f:
        return json.load(f)


# =============================================================================
# CALIBRATION / VALIDATION
# =============================================================================

def write_trace(trace_df: pd.DataFrame, path: PathLike) -> Path:
    return _write(trace_df.reindex(columns=TRACE_COLUMNS), path)


def read_trace(path: PathLike) -> pd.DataFrame:
    df = _read(path, TRACE_COLUMNS)
    df["message"] = df["message"].fillna("")
    return df


def write_validation(df: pd.DataFrame, path: PathLike) -> Path:
    return _write(df.reindex(columns=VALIDATION_COLUMNS), path)


def read_validation(path: PathLike) -> pd.DataFrame:
    return _read(path, VALIDATION_COLUMNS)
