"""CSV ingestion, parameter files, flat config files, and report writing.

Data files are rectangular comma-separated numeric tables (rows = samples),
with an optional single header row that is auto-detected.  Matrix parameter
files carry a first-line shape comment ``# p m``; vectors are plain one-column
(or one-row) files.  Reports are key,value CSV with full-precision floats so
that identical inputs reproduce byte-identical files.
"""

from __future__ import annotations

import numpy as np


class ValidationError(ValueError):
    """Malformed input files or inconsistent configuration (CLI exit code 2)."""


def format_float(x) -> str:
    """Shortest round-trip decimal representation of a float."""
    return repr(float(x))


def format_vector(v) -> str:
    return ";".join(format_float(x) for x in np.asarray(v, dtype=float).ravel())


def _parse_cell(cell: str, row: int, col: int, path: str) -> float:
    text = cell.strip()
    if not text:
        raise ValidationError(f"{path}: empty cell at row {row}, column {col}")
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"{path}: non-numeric cell at row {row}, column {col}: {text!r}"
        ) from None
    if not np.isfinite(value):
        raise ValidationError(
            f"{path}: non-finite value at row {row}, column {col}: {text!r}"
        )
    return value


def load_csv(path) -> np.ndarray:
    """Load a rectangular numeric CSV table as an (n, d) float array.

    A single header row is skipped when its cells do not all parse as
    numbers.  Ragged rows, non-numeric cells, and non-finite values are
    rejected with their location; missing values are not allowed.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [ln for ln in raw.splitlines() if ln.strip() != ""]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    start = 0
    first_cells = lines[0].split(",")
    try:
        for cell in first_cells:
            float(cell.strip())
    except ValueError:
        start = 1
        if len(lines) == 1:
            raise ValidationError(f"{path}: header row but no data rows") from None
    width = len(lines[start].split(","))
    rows = []
    for i, line in enumerate(lines[start:], start=start + 1):
        cells = line.split(",")
        if len(cells) != width:
            raise ValidationError(
                f"{path}: ragged row {i}: expected {width} columns, found {len(cells)}"
            )
        rows.append([_parse_cell(c, i, j + 1, path) for j, c in enumerate(cells)])
    return np.asarray(rows, dtype=float)


def load_parameter(path) -> np.ndarray:
    """Load a parameter file: a matrix with a '# p m' shape line, or a plain vector."""
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    lines = [ln for ln in raw.splitlines() if ln.strip() != ""]
    if not lines:
        raise ValidationError(f"{path}: empty file")
    if lines[0].lstrip().startswith("#"):
        fields = lines[0].lstrip("#").split()
        if len(fields) != 2:
            raise ValidationError(f"{path}: shape comment must be '# p m', got {lines[0]!r}")
        try:
            p, m = int(fields[0]), int(fields[1])
        except ValueError:
            raise ValidationError(f"{path}: shape comment must be '# p m', got {lines[0]!r}") from None
        body = lines[1:]
        if len(body) != p:
            raise ValidationError(f"{path}: expected {p} data rows per the shape line, found {len(body)}")
        rows = []
        for i, line in enumerate(body, start=2):
            cells = line.split(",")
            if len(cells) != m:
                raise ValidationError(
                    f"{path}: ragged row {i}: expected {m} columns, found {len(cells)}"
                )
            rows.append([_parse_cell(c, i, j + 1, path) for j, c in enumerate(cells)])
        return np.asarray(rows, dtype=float)
    table = load_csv(path)
    if table.shape[1] == 1:
        return table.ravel()
    if table.shape[0] == 1:
        return table.ravel()
    raise ValidationError(
        f"{path}: matrix parameter files need a '# p m' first line (got a "
        f"{table.shape[0]}x{table.shape[1]} table without one)"
    )


def save_parameter(path, arr) -> None:
    """Write a vector (one value per line) or matrix (with '# p m' shape line)."""
    arr = np.asarray(arr, dtype=float)
    with open(str(path), "w", encoding="utf-8") as fh:
        if arr.ndim <= 1:
            for x in np.atleast_1d(arr):
                fh.write(format_float(x) + "\n")
        else:
            p, m = arr.shape
            fh.write(f"# {p} {m}\n")
            for row in arr:
                fh.write(",".join(format_float(x) for x in row) + "\n")


def parse_config_file(path) -> dict[str, str]:
    """Parse a flat key-value config file with one dotted key per line."""
    out: dict[str, str] = {}
    with open(str(path), "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ValidationError(f"{path}: line {i} is not 'key=value': {text!r}")
            key, value = text.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def write_report(path, items) -> None:
    """Write a key,value report; all values must already be deterministic strings."""
    with open(str(path), "w", encoding="utf-8") as fh:
        for key, value in items:
            fh.write(f"{key},{value}\n")


def write_table(path, header, rows) -> None:
    """Write a plain comma-separated table with a header row."""
    with open(str(path), "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")
