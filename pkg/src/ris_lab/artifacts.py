"""Reading and writing CSV/JSON artifacts.

Writers are deterministic (fixed float format, sorted JSON keys, LF line
endings) and atomic: content goes to a temporary file next to the target
and is moved into place with `os.replace`.
"""

from __future__ import annotations

import io
import os
import re
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import pandas as pd
import structlog

from .errors import DataParseError

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.17g"
REFERENCE_COLUMNS = ["theta_el_deg", "value"]
MATRIX_COLUMNS = ["row", "col", "re", "im"]


def atomic_write_bytes(path: Path | str, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.info("Artifact written", path=str(path), bytes=len(data))
    return path


def write_csv(frame: pd.DataFrame, path: Path | str) -> Path:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def dumps_json(document: Any) -> bytes:
    options = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY
    return orjson.dumps(document, option=options) + b"\n"


def write_json(document: Any, path: Path | str) -> Path:
    return atomic_write_bytes(path, dumps_json(document))


def _read_table(path: Path, columns: list[str]) -> pd.DataFrame:
    """Read a CSV as strings, checking the header. Frame index i sits on file line i + 2."""
    try:
        raw = path.read_bytes()
    except FileNotFoundError as e:
        raise DataParseError(path, None, "file not found") from e
    except OSError as e:
        raise DataParseError(path, None, f"cannot read file ({e.strerror or type(e).__name__})") from e
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataParseError(path, raw[: e.start].count(b"\n") + 1, "not valid UTF-8 text") from e

    try:
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError as e:
        raise DataParseError(path, 1, "file is empty") from e
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        raise DataParseError(path, int(match.group(1)) if match else None, "malformed row") from e

    if [column.strip() for column in frame.columns] != columns:
        raise DataParseError(path, 1, f"expected header {','.join(columns)}, got {','.join(frame.columns)}")
    frame.columns = columns
    return frame


def _numeric(frame: pd.DataFrame, path: Path, integer_columns: tuple[str, ...] = ()) -> pd.DataFrame:
    parsed = frame.apply(lambda column: pd.to_numeric(column.astype(str).str.strip(), errors="coerce"))
    bad = parsed.isna().any(axis=1) | ~np.isfinite(parsed.to_numpy(dtype=float)).all(axis=1)
    for column in integer_columns:
        values = parsed[column]
        bad |= (values != np.round(values)) | (values < 0)
    if bad.any():
        index = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataParseError(path, index + 2, f"non-numeric or invalid value in row {frame.iloc[index].tolist()}")
    return parsed


def read_reference_csv(path: Path | str) -> pd.DataFrame:
    """Reference pattern table with float columns `theta_el_deg`, `value`."""
    path = Path(path)
    frame = _read_table(path, REFERENCE_COLUMNS)
    if frame.empty:
        raise DataParseError(path, 2, "no samples")
    return _numeric(frame, path)


def read_matrix_csv(path: Path | str) -> np.ndarray:
    """Square complex matrix from `row,col,re,im` rows; omitted entries are zero."""
    path = Path(path)
    frame = _read_table(path, MATRIX_COLUMNS)
    if frame.empty:
        raise DataParseError(path, 2, "no entries")
    frame = _numeric(frame, path, integer_columns=("row", "col"))
    rows = frame["row"].to_numpy(dtype=int)
    cols = frame["col"].to_numpy(dtype=int)
    duplicated = pd.Series(list(zip(rows, cols, strict=True))).duplicated().to_numpy()
    if duplicated.any():
        index = int(np.flatnonzero(duplicated)[0])
        raise DataParseError(path, index + 2, f"duplicate entry ({rows[index]}, {cols[index]})")

    size = int(max(rows.max(), cols.max())) + 1
    matrix = np.zeros((size, size), dtype=complex)
    matrix[rows, cols] = frame["re"].to_numpy() + 1j * frame["im"].to_numpy()
    return matrix


def matrix_to_frame(matrix: np.ndarray) -> pd.DataFrame:
    matrix = np.asarray(matrix, dtype=complex)
    rows, cols = np.indices(matrix.shape)
    return pd.DataFrame(
        {
            "row": rows.ravel(),
            "col": cols.ravel(),
            "re": matrix.real.ravel(),
            "im": matrix.imag.ravel(),
        },
        columns=MATRIX_COLUMNS,
    )


def write_matrix_csv(matrix: np.ndarray, path: Path | str) -> Path:
    return write_csv(matrix_to_frame(matrix), path)
