"""
Flat-file output: CSV tables, JSON documents and the canonical config hash.

Floats are written with 17 significant digits so values survive a round
trip through text exactly.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def format_value(value: Any) -> str:
    """Render a CSV cell; None becomes an empty cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_csv(
    rows: Iterable[Dict[str, Any]], filepath: Union[str, Path], fieldnames: Sequence[str]
) -> int:
    """
    Write dictionaries as CSV rows.

    Returns:
        Number of data rows written
    """
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(filepath, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_value(row.get(k)) for k in fieldnames})
            count += 1
    logger.debug(f"Wrote {count} rows to {filepath}")
    return count


def read_csv(filepath: Union[str, Path]) -> List[Dict[str, str]]:
    with open(filepath, "r", newline="", encoding="utf-8") as csvfile:
        return list(csv.DictReader(csvfile))


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays (recursively) to JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None if np.isnan(value) else ("inf" if value > 0 else "-inf")
    return value


def write_json(data: Dict[str, Any], filepath: Union[str, Path]) -> None:
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2, ensure_ascii=False)
        f.write("\n")


def canonical_json(data: Dict[str, Any]) -> str:
    """Key-sorted compact JSON used for hashing."""
    return json.dumps(to_jsonable(data), sort_keys=True, separators=(",", ":"))


def config_hash(data: Dict[str, Any]) -> str:
    """SHA-256 hex digest of the canonical JSON of a config dictionary."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def path_rows(
    times: np.ndarray, dW: np.ndarray, dN: np.ndarray, X: Optional[np.ndarray], limit: int
) -> Iterable[Dict[str, Any]]:
    """Rows (path, step, t, dW, dN, X) for the first ``limit`` paths; increments blank at t_0."""
    n = min(limit, dW.shape[0])
    M = dW.shape[1]
    for p in range(n):
        for i in range(M + 1):
            yield {
                "path": p,
                "step": i,
                "t": float(times[i]),
                "dW": float(dW[p, i - 1]) if i else None,
                "dN": int(dN[p, i - 1]) if i else None,
                "X": float(X[p, i]) if X is not None else None,
            }
