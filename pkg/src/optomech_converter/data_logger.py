import hashlib
import io
import json
import logging
import math
import os
import tempfile
from datetime import datetime, timezone
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .errors import DataFileError

logger = logging.getLogger(__name__)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def build_provenance(version: str, argv: Sequence[str], device_path: Optional[str] = None,
                     seed: Optional[int] = None) -> Dict[str, Any]:
    return {
        "tool": "optomech-converter",
        "version": version,
        "command_line": list(argv),
        "device_file": device_path,
        "device_sha256": file_sha256(device_path) if device_path else None,
        "seed": seed,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }


class DataLogger:
    """Writes result tables as CSV with a JSON provenance sidecar."""

    def __init__(self, log_dir="results", provenance: Optional[Dict[str, Any]] = None):
        self.log_dir = log_dir
        self.provenance = provenance or {}
        try:
            os.makedirs(log_dir, exist_ok=True)
        except OSError as e:
            raise DataFileError(f"Failed to create output directory {log_dir}: {e}") from e

    def generate_filename(self, name: str, suffix: str) -> str:
        return os.path.join(self.log_dir, f"{name}{suffix}")

    def _atomic_write(self, path: str, text: str) -> None:
        """Write through a temporary file in the same directory, then rename."""
        fd, tmp_path = tempfile.mkstemp(dir=self.log_dir, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
            os.replace(tmp_path, path)
        except OSError as e:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise DataFileError(f"Failed to write {path}: {e}") from e

    def write_json(self, name: str, payload: Dict[str, Any]) -> str:
        path = self.generate_filename(name, ".json")
        self._atomic_write(path, json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
        return path

    def write_table(self, name: str, frame: pd.DataFrame, metadata: Dict[str, Any]) -> Tuple[str, str]:
        """Write ``name.csv`` and its ``name.json`` sidecar.

        The CSV holds data only, so identical inputs give identical bytes.
        """
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
        csv_path = self.generate_filename(name, ".csv")
        self._atomic_write(csv_path, buffer.getvalue())
        sidecar = self.write_json(name, {"provenance": self.provenance, "metadata": metadata,
                                         "columns": list(frame.columns)})
        logger.info(f"Wrote {len(frame)} rows to {csv_path}")
        return csv_path, sidecar


def read_table(csv_path: str, required: Sequence[str] = ()) -> Tuple[pd.DataFrame, Optional[Dict[str, Any]]]:
    """Read a CSV written by DataLogger together with its sidecar, if any.

    Required columns must exist and be numeric.
    """
    try:
        frame = pd.read_csv(csv_path)
    except (OSError, ValueError, pd.errors.ParserError) as e:
        raise DataFileError(f"Failed to read {csv_path}: {e}") from e
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise DataFileError(f"{csv_path} lacks columns {missing}")
    for column in required:
        try:
            frame[column] = pd.to_numeric(frame[column])
        except (TypeError, ValueError) as e:
            raise DataFileError(f"{csv_path} column '{column}' is not numeric: {e}") from e
    sidecar_path = os.path.splitext(csv_path)[0] + ".json"
    sidecar = None
    if os.path.exists(sidecar_path):
        try:
            with open(sidecar_path, "r") as f:
                sidecar = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DataFileError(f"Failed to read sidecar {sidecar_path}: {e}") from e
    return frame, sidecar
