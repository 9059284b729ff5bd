"""Observed time series container and CSV ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

__all__ = ["TimeSeries", "load_csv"]


@dataclass
class TimeSeries:
    """Observed values y_1..y_T with optional time labels and metadata.

    ``truth`` carries the generating segmentation and parameters for
    simulated series (None for real data).
    """

    values: np.ndarray
    time_labels: np.ndarray | None = None
    name: str = ""
    truth: object = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise InvalidInputError("values must be a non-empty 1-D array")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("values must be finite")
        self.values = v
        if self.time_labels is not None:
            lab = np.asarray(self.time_labels)
            if lab.shape != v.shape:
                raise InvalidInputError("time labels must match values in length")
            self.time_labels = lab

    @property
    def T(self) -> int:
        return self.values.size

    def standardized(self) -> "TimeSeries":
        """Subtract the sample mean and divide by the sample standard deviation."""
        v = self.values
        sd = v.std()
        if sd == 0:
            raise InvalidInputError("cannot standardize a constant series")
        return TimeSeries(
            (v - v.mean()) / sd,
            time_labels=self.time_labels,
            name=self.name,
            truth=self.truth,
        )


def _parse_float(text, path, lineno, colname):
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(
            f"{path}:{lineno}: cannot parse {colname} value {text!r}"
        ) from None


def load_csv(
    path,
    column=None,
    time_column=None,
    standardize: bool = False,
) -> TimeSeries:
    """Read a comma-separated series: one value column, optional time labels.

    ``column``/``time_column`` may be header names or 0-based indices; with a
    single column and no arguments the whole file is the value column.  A
    header row is detected by failing to parse as a number.  Unparsable data
    rows raise an error naming the line number.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not lines:
        raise InvalidInputError(f"{path}: empty file")
    header = None
    first = [c.strip() for c in lines[0][1].split(",")]
    try:
        [float(c) for c in first]
    except ValueError:
        header = first
        lines = lines[1:]
        if not lines:
            raise InvalidInputError(f"{path}: no data rows")
    ncol = len(first)

    def resolve(spec, default):
        if spec is None:
            return default
        if isinstance(spec, int):
            return spec
        if header is None or spec not in header:
            raise InvalidInputError(f"{path}: no column named {spec!r}")
        return header.index(spec)

    if ncol == 1:
        vcol, tcol = resolve(column, 0), None
    else:
        vcol = resolve(column, 1)
        tcol = resolve(time_column, 0) if (time_column is not None or column is None) else None
    values, labels = [], []
    for lineno, ln in lines:
        cells = [c.strip() for c in ln.split(",")]
        if vcol >= len(cells) or (tcol is not None and tcol >= len(cells)):
            raise InvalidInputError(f"{path}:{lineno}: expected {ncol} columns")
        values.append(_parse_float(cells[vcol], path, lineno, "value"))
        if tcol is not None:
            labels.append(_parse_float(cells[tcol], path, lineno, "time"))
    ts = TimeSeries(
        np.array(values),
        time_labels=np.array(labels) if labels else None,
        name=str(path),
    )
    return ts.standardized() if standardize else ts
