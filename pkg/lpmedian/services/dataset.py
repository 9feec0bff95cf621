"""
Dataset ingestion and CSV output.

Reads CSV or Excel files into a numeric matrix: optional equality row
filters first, then column selection, then strict numeric parsing. Cells
that are not finite numbers are reported with their row and column.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from lpmedian.engine.errors import DataFileError

ALLOWED_EXTENSIONS = {".csv", ".xlsx", ".xls"}


@dataclass(frozen=True, slots=True)
class Dataset:
    matrix: np.ndarray
    columns: list[str]
    path: str
    sha256: str
    filters: dict[str, str] = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    def describe(self) -> dict:
        return {
            "path": self.path,
            "sha256": self.sha256,
            "rows": self.rows,
            "columns": list(self.columns),
            "filters": dict(self.filters),
        }


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _read_file(path: Path, delimiter: str, has_header: bool) -> pd.DataFrame:
    """Read every cell as text so parsing errors can be located."""
    ext = path.suffix.lower()
    header = 0 if has_header else None
    try:
        if ext in (".xlsx", ".xls"):
            df = pd.read_excel(path, engine="openpyxl", header=header, dtype=str)
        elif ext == ".csv" or ext == "" or ext == ".txt":
            df = pd.read_csv(
                path,
                sep=delimiter,
                header=header,
                dtype=str,
                keep_default_na=False,
                skipinitialspace=True,
            )
        else:
            raise DataFileError(
                f"File type '{ext}' is not supported. Allowed: {sorted(ALLOWED_EXTENSIONS)}"
            )
    except pd.errors.ParserError as exc:
        raise DataFileError(f"ragged rows in {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DataFileError(f"{path} is empty") from exc
    if not has_header:
        df.columns = [str(c) for c in range(df.shape[1])]
    df.columns = [str(c).strip() for c in df.columns]
    if df.isna().to_numpy().any():
        row, col = np.argwhere(df.isna().to_numpy())[0]
        raise DataFileError(
            f"ragged rows in {path}: row {_row_label(row, has_header)} is missing column '{df.columns[col]}'"
        )
    return df


def _row_label(index: int, has_header: bool) -> int:
    """1-based line number in the file."""
    return int(index) + (2 if has_header else 1)


def apply_filters(df: pd.DataFrame, filters: dict[str, str]) -> pd.DataFrame:
    """Keep rows whose column equals the given text value (ANDed)."""
    for col, value in filters.items():
        if col not in df.columns:
            raise DataFileError(f"Filter references missing column: '{col}'")
        df = df.loc[df[col].str.strip() == str(value)]
    return df


def apply_column_selection(df: pd.DataFrame, columns: list[str]) -> pd.DataFrame:
    """Keep the listed columns in order; integers select by position."""
    resolved = []
    for c in columns:
        if c in df.columns:
            resolved.append(c)
        elif str(c).lstrip("-").isdigit() and -df.shape[1] <= int(c) < df.shape[1]:
            resolved.append(df.columns[int(c)])
        else:
            raise DataFileError(f"column selection references missing column: '{c}'")
    return df[resolved]


def _parse_cell(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(text)
    return value


def _to_matrix(df: pd.DataFrame, has_header: bool) -> np.ndarray:
    out = np.empty(df.shape, dtype=float)
    for j, col in enumerate(df.columns):
        for i, (label, text) in enumerate(df[col].items()):
            try:
                out[i, j] = _parse_cell(str(text).strip())
            except ValueError:
                raise DataFileError(
                    f"non-numeric cell '{text}' at row {_row_label(label, has_header)}, column '{col}'",
                    details={"row": _row_label(label, has_header), "column": col, "value": str(text)},
                ) from None
    return out


def ingest_csv(
    path: str | Path,
    *,
    delimiter: str = ",",
    has_header: bool = True,
    select_columns: list[str] | None = None,
    filters: dict[str, str] | None = None,
) -> Dataset:
    """Parse the selected numeric columns of a CSV (or Excel) file."""
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"input file not found: {path}")
    df = _read_file(path, delimiter, has_header)
    if filters:
        df = apply_filters(df, filters)
    if select_columns:
        df = apply_column_selection(df, list(select_columns))
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise DataFileError("selection left no data", details={"shape": list(df.shape)})
    return Dataset(
        matrix=_to_matrix(df, has_header),
        columns=[str(c) for c in df.columns],
        path=str(path),
        sha256=file_sha256(path),
        filters=dict(filters or {}),
    )


def frame(matrix: np.ndarray, columns: list[str] | None = None) -> pd.DataFrame:
    matrix = np.asarray(matrix, dtype=float)
    if columns is None:
        columns = [f"x{j + 1}" for j in range(matrix.shape[1])]
    return pd.DataFrame(matrix, columns=columns)


def csv_text(df: pd.DataFrame) -> str:
    """CSV with 17 significant digits so floats round-trip exactly."""
    return df.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def write_csv(matrix: np.ndarray, path: str | Path, columns: list[str] | None = None) -> Path:
    from lpmedian.services.run_service import atomic_write_text

    return atomic_write_text(Path(path), csv_text(frame(matrix, columns)))


def column_values(path: str | Path, column: str, *, delimiter: str = ",", has_header: bool = True) -> list[str]:
    """Distinct values of a text column, in order of first appearance."""
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"input file not found: {path}")
    df = _read_file(path, delimiter, has_header)
    if column not in df.columns:
        raise DataFileError(f"column '{column}' not found; have {list(df.columns)}")
    return [str(v) for v in df[column].str.strip().drop_duplicates()]
