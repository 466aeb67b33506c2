import os
import json
import tempfile
from pathlib import Path
from typing import Any, Iterable, List, Mapping

import pandas as pd

from utils.logging_config import get_logger

logger = get_logger(__name__)


def write_json_atomic(file_path: Path, data: Any) -> Path:
    """
    Write JSON next to its destination and rename it into place.

    Readers never observe a half-written file; a crash leaves either the old
    content or the new one.
    """
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=file_path.parent, prefix=f".{file_path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, sort_keys=True)
        os.replace(tmp, file_path)
    except Exception:
        Path(tmp).unlink(missing_ok=True)
        raise
    return file_path


def read_json(file_path: Path) -> Any:
    with open(file_path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_rows_csv(file_path: Path, rows: Iterable[Mapping[str, Any]]) -> Path:
    """Write a list of flat dict rows (loss logs, metric rows) as CSV."""
    file_path = Path(file_path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(list(rows)).to_csv(file_path, index=False)
    logger.debug(f"Wrote CSV: {file_path}")
    return file_path


def read_rows_csv(file_path: Path) -> List[dict]:
    return pd.read_csv(file_path).to_dict(orient="records")


def validate_file_path(file_path: Path, file_type: str) -> None:
    """Validate that a file path exists and is a regular file.

    Raises:
        FileNotFoundError: If file doesn't exist
        ValueError: If the path is not a regular file
    """
    if not file_path.exists():
        raise FileNotFoundError(f"{file_type} not found: {file_path}")
    if not file_path.is_file():
        raise ValueError(f"{file_type} is not a regular file: {file_path}")
