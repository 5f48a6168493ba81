"""Daily flux series: data model, delimited-text parsing and validation."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .exceptions import (
    EmptySeries,
    MalformedRow,
    NonFiniteValue,
    NonUniformSampling,
    QfOutOfRange,
    TooShort,
)

__all__ = [
    "FluxSeries",
    "ColumnSpec",
    "parse_flux_csv",
    "read_flux_csv",
    "write_flux_csv",
    "validate_series",
    "MISSING_TOKENS",
]

MISSING_TOKENS = frozenset({"", "NA", "NAN", "NaN", "nan", "na", "N/A"})
MAX_INTERPOLATED_GAP = 5

Column = Union[str, int]


@dataclass(frozen=True, eq=False)
class FluxSeries:
    """One uniformly sampled daily time series.

    ``qf`` holds per-day confidence in [0, 1] (1 = full confidence) or is
    ``None`` when the source carried no quality flags.
    """

    values: np.ndarray
    start_date: dt.date
    site_id: str = ""
    variable: str = ""
    qf: Optional[np.ndarray] = None
    step_days: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.qf is not None:
            qf = np.asarray(self.qf, dtype=float).copy()
            if qf.shape != values.shape:
                raise ValueError(
                    f"qf length {qf.shape[0]} differs from values length {values.shape[0]}"
                )
            qf.setflags(write=False)
            object.__setattr__(self, "qf", qf)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(self.n)]

    @property
    def label(self) -> str:
        parts = [p for p in (self.site_id, self.variable) if p]
        return "_".join(parts) or "series"

    def with_values(self, values) -> "FluxSeries":
        return FluxSeries(
            values=values,
            start_date=self.start_date,
            site_id=self.site_id,
            variable=self.variable,
            qf=self.qf,
            step_days=self.step_days,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FluxSeries):
            return NotImplemented
        if (self.start_date, self.site_id, self.variable, self.step_days) != (
            other.start_date,
            other.site_id,
            other.variable,
            other.step_days,
        ):
            return False
        if not np.array_equal(self.values, other.values, equal_nan=True):
            return False
        if (self.qf is None) != (other.qf is None):
            return False
        return self.qf is None or np.array_equal(self.qf, other.qf, equal_nan=True)


@dataclass(frozen=True)
class ColumnSpec:
    """Where to find dates, values and quality flags in a delimited file.

    Columns are addressed by header name or by zero-based index.
    """

    date_column: Column = 0
    value_column: Column = 1
    qf_column: Optional[Column] = None
    delimiter: str = ","
    decimal_mark: str = "."
    has_header: Optional[bool] = None

    def __post_init__(self):
        if len(self.delimiter) != 1 or len(self.decimal_mark) != 1:
            raise ValueError("delimiter and decimal_mark must be single characters")
        if self.delimiter == self.decimal_mark:
            raise ValueError("delimiter and decimal_mark must differ")
        if self.qf_column is not None and self.qf_column == self.value_column:
            raise ValueError("value_column and qf_column must differ")

    @property
    def named(self) -> bool:
        cols = [self.date_column, self.value_column, self.qf_column]
        return any(isinstance(c, str) for c in cols)

    @property
    def header(self) -> bool:
        return self.named if self.has_header is None else self.has_header


def _parse_date(text: str) -> dt.date:
    text = text.strip()
    if len(text) == 8 and text.isdigit():
        return dt.date(int(text[:4]), int(text[4:6]), int(text[6:]))
    # tolerate timestamps such as 2007-01-01T00:00
    return dt.date.fromisoformat(text[:10])


def _is_header(first_row: list[str], spec: ColumnSpec) -> bool:
    if spec.has_header is not None or spec.named:
        return spec.header
    # unnamed columns: the first row is a header when its date cell is not a date
    if not isinstance(spec.date_column, int) or spec.date_column >= len(first_row):
        return False
    try:
        _parse_date(first_row[spec.date_column])
    except ValueError:
        return True
    return False


def _parse_number(text: str, decimal_mark: str) -> float:
    text = text.strip()
    if text in MISSING_TOKENS:
        return np.nan
    if decimal_mark != ".":
        text = text.replace(decimal_mark, ".")
    return float(text)


def _resolve(column: Column, header: Optional[list[str]]) -> int:
    if isinstance(column, int):
        return column
    if header is None:
        raise MalformedRow(1, f"column {column!r} named but no header row present")
    stripped = [h.strip() for h in header]
    if column not in stripped:
        raise MalformedRow(1, f"column {column!r} not found in header {stripped}")
    return stripped.index(column)


def _fill_gaps(
    days: np.ndarray, values: np.ndarray, qf: Optional[np.ndarray], max_gap: int
):
    """Linear interpolation over missing days and missing values.

    Interpolated samples get quality flag 0 when flags are present.
    """
    n = int(days[-1] - days[0]) + 1
    grid_values = np.full(n, np.nan)
    grid_values[days - days[0]] = values
    grid_qf = None
    if qf is not None:
        grid_qf = np.zeros(n)
        grid_qf[days - days[0]] = np.where(np.isnan(qf), 0.0, qf)

    missing = ~np.isfinite(grid_values)
    if not missing.any():
        return grid_values, grid_qf
    if missing[0] or missing[-1]:
        raise NonUniformSampling("cannot interpolate a gap at the start or end of the series")
    # run lengths of missing stretches
    edges = np.diff(np.concatenate(([0], missing.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    longest = int((ends - starts).max())
    if longest > max_gap:
        i = int(starts[np.argmax(ends - starts)])
        raise NonUniformSampling(
            f"gap of {longest} days starting at offset {i} exceeds the "
            f"interpolation limit of {max_gap} days"
        )
    idx = np.arange(n)
    grid_values[missing] = np.interp(idx[missing], idx[~missing], grid_values[~missing])
    if grid_qf is not None:
        grid_qf[missing] = 0.0
    return grid_values, grid_qf


def parse_flux_csv(
    source: Union[TextIO, str],
    spec: ColumnSpec = ColumnSpec(),
    *,
    site_id: str = "",
    variable: Optional[str] = None,
    interpolate_gaps: bool = False,
    max_gap: int = MAX_INTERPOLATED_GAP,
) -> FluxSeries:
    """Parse a delimited daily series.

    Rows may come in any order; they are sorted by date. Duplicate dates and
    missing calendar days raise unless ``interpolate_gaps`` is set, in which
    case gaps (missing days or missing values) of at most ``max_gap`` days are
    filled linearly and flagged with quality 0.

    Parameters
    ----------
    source : text stream or str
        Open text stream, or the file content itself.
    spec : ColumnSpec
        Column layout.
    site_id, variable : str
        Labels stored on the result; ``variable`` defaults to the value
        column's header name when columns are named.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=spec.delimiter)

    header = None
    rows: list[tuple[int, list[str]]] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        if header is None and not rows and _is_header(row, spec):
            header = row
            continue
        rows.append((lineno, row))
    if not rows:
        raise EmptySeries("no data rows found")

    i_date = _resolve(spec.date_column, header)
    i_value = _resolve(spec.value_column, header)
    i_qf = None if spec.qf_column is None else _resolve(spec.qf_column, header)
    needed = max(i for i in (i_date, i_value, i_qf) if i is not None)

    dates, values, qfs, lines = [], [], [], []
    for lineno, row in rows:
        if len(row) <= needed:
            raise MalformedRow(lineno, f"expected at least {needed + 1} fields, got {len(row)}")
        try:
            dates.append(_parse_date(row[i_date]))
        except ValueError as exc:
            raise MalformedRow(lineno, f"bad date {row[i_date]!r}") from exc
        try:
            values.append(_parse_number(row[i_value], spec.decimal_mark))
            if i_qf is not None:
                qfs.append(_parse_number(row[i_qf], spec.decimal_mark))
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from exc
        lines.append(lineno)

    days = np.array([d.toordinal() for d in dates], dtype=np.int64)
    order = np.argsort(days, kind="stable")
    days = days[order]
    dup = np.flatnonzero(np.diff(days) == 0)
    if dup.size:
        line = lines[order[dup[0] + 1]]
        raise MalformedRow(line, f"duplicate date {dt.date.fromordinal(int(days[dup[0]]))}")
    values_arr = np.asarray(values, dtype=float)[order]
    qf_arr = np.asarray(qfs, dtype=float)[order] if i_qf is not None else None

    if qf_arr is not None and np.nanmax(qf_arr, initial=0.0) > 1.0:
        qf_arr = qf_arr / 100.0  # percent scale

    if interpolate_gaps:
        values_arr, qf_arr = _fill_gaps(days, values_arr, qf_arr, max_gap)
    elif np.any(np.diff(days) != 1):
        k = int(np.flatnonzero(np.diff(days) != 1)[0])
        missing = dt.date.fromordinal(int(days[k]) + 1)
        raise NonUniformSampling(f"missing calendar day {missing} (no gap policy set)")

    if variable is None:
        variable = header[i_value].strip() if header is not None else ""
    return FluxSeries(
        values=values_arr,
        start_date=dt.date.fromordinal(int(days[0])),
        site_id=site_id,
        variable=variable,
        qf=qf_arr,
    )


def read_flux_csv(path, spec: ColumnSpec = ColumnSpec(), **kwargs) -> FluxSeries:
    """Parse a file; site and variable default to ``SITE_VARIABLE`` in the file stem."""
    path = Path(path)
    stem = path.stem
    if "site_id" not in kwargs:
        kwargs["site_id"] = stem.split("_", 1)[0] if "_" in stem else stem
    if "variable" not in kwargs and "_" in stem:
        kwargs["variable"] = stem.split("_", 1)[1]
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_flux_csv(fh, spec, **kwargs)


def write_flux_csv(series: FluxSeries, dest: Optional[TextIO] = None, delimiter: str = ",") -> str:
    """Serialize to ``date,value[,qf]`` with a header row; returns the text.

    Floats are written with ``repr`` so parsing the output reproduces the
    series exactly.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    header = ["date", series.variable or "value"]
    if series.qf is not None:
        header.append("qf")
    writer.writerow(header)
    for i, day in enumerate(series.dates):
        row = [day.isoformat(), repr(float(series.values[i]))]
        if series.qf is not None:
            row.append(repr(float(series.qf[i])))
        writer.writerow(row)
    text = buf.getvalue()
    if dest is not None:
        dest.write(text)
    return text


def column_spec_for_written(series: FluxSeries, delimiter: str = ",") -> ColumnSpec:
    """ColumnSpec matching the layout produced by :func:`write_flux_csv`."""
    return ColumnSpec(
        date_column="date",
        value_column=series.variable or "value",
        qf_column="qf" if series.qf is not None else None,
        delimiter=delimiter,
    )


def validate_series(s: FluxSeries, min_len: int = 0) -> FluxSeries:
    """Return ``s`` unchanged if it is long enough, finite and has valid flags."""
    if s.n < min_len:
        raise TooShort(f"series has {s.n} samples, at least {min_len} required")
    bad = np.flatnonzero(~np.isfinite(s.values))
    if bad.size:
        raise NonFiniteValue(int(bad[0]), float(s.values[bad[0]]))
    if s.qf is not None:
        out = np.flatnonzero(~((s.qf >= 0.0) & (s.qf <= 1.0)))
        if out.size:
            raise QfOutOfRange(int(out[0]), float(s.qf[out[0]]))
    return s


def iter_series_files(paths: Iterable[Union[str, Path]], patterns=("*.csv", "*.tsv", "*.txt")):
    """Expand directories into sorted data files; plain files pass through."""
    for p in paths:
        p = Path(p)
        if p.is_dir():
            found = sorted({f for pat in patterns for f in p.glob(pat)})
            yield from found
        else:
            yield p
