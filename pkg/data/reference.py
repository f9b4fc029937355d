"""
Reference data produced outside the simulator: displacement curves and fields.
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from analysis.metrics import DisplacementCurve
from data.reports import FIELD_COLUMNS, _read
from exceptions import ConfigError, MeasurementError

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["depth_m", "displacement_m"]


def load_reference_curve(path: Union[str, Path]) -> DisplacementCurve:
    """
    Two-column CSV (depth_m, displacement_m), '#' comments allowed.

    Raises:
        ConfigError: missing file/columns, non-numeric values, fewer than 2 rows
    """
    df = _read(path, CURVE_COLUMNS)
    values = df[CURVE_COLUMNS].apply(pd.to_numeric, errors="coerce")
    if values.isna().any().any():
        raise ConfigError(f"{path}: non-numeric or missing values")
    if len(values) < 2:
        raise ConfigError(f"{path}: a reference curve needs at least 2 rows, got {len(values)}")
    try:
        curve = DisplacementCurve.from_points(values["depth_m"], values["displacement_m"])
    except MeasurementError as e:
        raise ConfigError(f"{path}: {e}") from e
    logger.info(f"Reference curve {Path(path).name}: {len(curve.depth)} points, depth up to {curve.depth[-1]:g} m")
    return curve


def load_reference_field(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Rows of x, y, z, dx, dy, dz in meters -> (points, displacements)."""
    df = _read(path, FIELD_COLUMNS)
    values = df[FIELD_COLUMNS].apply(pd.to_numeric, errors="coerce")
    if values.empty:
        raise ConfigError(f"{path}: reference field has no rows")
    if values.isna().any().any():
        raise ConfigError(f"{path}: non-numeric or missing values")
    arr = values.to_numpy(dtype=float)
    return arr[:, :3], arr[:, 3:]
