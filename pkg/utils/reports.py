"""CSV report tables: schemas and locked append/write helpers."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from utils.file_lock import locked_csv_write

logger = logging.getLogger(__name__)

RUN_COLUMNS = [
    'input', 'output', 'wall_ms', 'r', 'epsilon', 'weight_fn',
    'theta_hat', 'overflow_fraction', 'psnr_db', 'ssim', 'ciede2000',
]
EVAL_COLUMNS = ['image', 'psnr_db', 'ssim', 'ciede2000']
ANALYZE_COLUMNS = ['image_id', 'r', 'rho', 'n_pixels']
PROFILE_COLUMNS = ['row_index', 'mean_theta_r']
EPSILON_COLUMNS = ['epsilon', 'theta_eps']

# batch runs add a status column after the schema columns
STATUS_COLUMN = 'status'


def _frame(rows: Iterable[Dict[str, object]], columns: Sequence[str]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows))
    for column in columns:
        if column not in frame.columns:
            frame[column] = None
    extra = [c for c in frame.columns if c not in columns]
    return frame[list(columns) + extra]


def append_rows(path: Path, rows: Iterable[Dict[str, object]], columns: Sequence[str]) -> int:
    """
    Append rows to a CSV report, creating it with a header if missing.

    Existing rows are kept; new rows follow in the order given. Columns
    missing from a row are left empty.

    Returns:
        Number of rows appended
    """
    path = Path(path)
    new = _frame(rows, columns)
    if new.empty:
        return 0

    path.parent.mkdir(parents=True, exist_ok=True)
    with locked_csv_write(path) as temp_path:
        if path.exists() and path.stat().st_size > 0:
            existing = pd.read_csv(path)
            combined = pd.concat([existing, new], ignore_index=True)
        else:
            combined = new
        combined.to_csv(temp_path, index=False)

    logger.info(f"Appended {len(new)} row(s) to {path}")
    return len(new)


def write_table(path: Path, rows: Iterable[Dict[str, object]], columns: Sequence[str]) -> int:
    """Replace a CSV file with exactly these rows."""
    path = Path(path)
    frame = _frame(rows, columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    with locked_csv_write(path) as temp_path:
        frame.to_csv(temp_path, index=False)
    logger.info(f"Wrote {len(frame)} row(s) to {path}")
    return len(frame)


def profile_rows(profile: Sequence[float]) -> List[Dict[str, object]]:
    """Row-profile table rows, row_index 0 = bottom row."""
    return [{'row_index': i, 'mean_theta_r': float(v)} for i, v in enumerate(profile)]


def epsilon_rows(epsilons: Sequence[float], values: Sequence[float]) -> List[Dict[str, object]]:
    return [{'epsilon': float(e), 'theta_eps': float(v)} for e, v in zip(epsilons, values)]
