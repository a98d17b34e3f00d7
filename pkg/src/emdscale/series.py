"""Quarterly time series: parsing, emission, transforms and period slicing."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

_PERIOD_RE = re.compile(r"^(\d{4})Q([1-4])$")


class SeriesError(ValueError):
    """Raised for malformed tables, bad transforms and invalid slices."""


@dataclass(frozen=True, order=True)
class Period:
    """A calendar quarter."""

    year: int
    quarter: int

    def __post_init__(self):
        if not 1 <= self.quarter <= 4:
            raise SeriesError(f"quarter must be in 1..4, got {self.quarter}")

    @classmethod
    def parse(cls, label: str | Period) -> Period:
        if isinstance(label, Period):
            return label
        m = _PERIOD_RE.match(label.strip())
        if m is None:
            raise SeriesError(f"malformed period label {label!r} (expected YYYYQn)")
        return cls(int(m.group(1)), int(m.group(2)))

    @property
    def ordinal(self) -> int:
        return self.year * 4 + (self.quarter - 1)

    @classmethod
    def from_ordinal(cls, n: int) -> Period:
        return cls(n // 4, n % 4 + 1)

    def __add__(self, k: int) -> Period:
        return Period.from_ordinal(self.ordinal + int(k))

    def __sub__(self, other: Period) -> int:
        return self.ordinal - other.ordinal

    def __str__(self) -> str:
        return f"{self.year}Q{self.quarter}"


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Evenly spaced quarterly observations.

    ``values`` is stored as a read-only float64 array; ``frequency`` is the
    number of observations per year.
    """

    name: str
    start: Period
    values: np.ndarray
    frequency: int = 4

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise SeriesError(f"series {self.name!r} must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise SeriesError(f"series {self.name!r} has a missing/non-finite value at index {bad}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start", Period.parse(self.start))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.name == other.name
            and self.start == other.start
            and self.frequency == other.frequency
            and np.array_equal(self.values, other.values)
        )

    @property
    def end(self) -> Period:
        return self.start + (len(self) - 1)

    @property
    def periods(self) -> list[Period]:
        return [self.start + i for i in range(len(self))]

    def with_values(self, values, name: str | None = None) -> TimeSeries:
        return TimeSeries(self.name if name is None else name, self.start, values, self.frequency)


@dataclass(frozen=True)
class SeriesTable:
    """Named columns sharing one quarterly index."""

    columns: Mapping[str, TimeSeries] = field(default_factory=dict)

    def __post_init__(self):
        cols = dict(self.columns)
        starts = {(s.start, len(s)) for s in cols.values()}
        if len(starts) > 1:
            raise SeriesError("all columns of a table must share start period and length")
        object.__setattr__(self, "columns", cols)

    def __getitem__(self, name: str) -> TimeSeries:
        try:
            return self.columns[name]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __eq__(self, other) -> bool:
        if not isinstance(other, SeriesTable):
            return NotImplemented
        return list(self.columns) == list(other.columns) and all(
            self.columns[k] == other.columns[k] for k in self.columns
        )

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def index(self) -> list[Period]:
        if not self.columns:
            return []
        return next(iter(self.columns.values())).periods

    def replace(self, series: TimeSeries, key: str | None = None) -> SeriesTable:
        cols = dict(self.columns)
        cols[key or series.name] = series
        return SeriesTable(cols)

    def slice(self, start, end) -> SeriesTable:
        return SeriesTable({k: slice_period(v, start, end) for k, v in self.columns.items()})


def parse_series_table(
    text: str,
    schema: Sequence[str] | None = None,
    period_column: str = "date",
    delimiter: str = ",",
) -> SeriesTable:
    """Parse delimiter-separated text into a :class:`SeriesTable`.

    Parameters
    ----------
    text : str
        Table text with a mandatory header row.
    schema : sequence of str, optional
        Numeric columns to keep, in output order. Defaults to every column
        other than the period column.
    period_column : str
        Header of the column holding ``YYYYQn`` labels.
    delimiter : str
        Field separator (``","`` or ``"\\t"``).

    Raises
    ------
    SeriesError
        On malformed labels, blank or non-numeric cells, duplicate or
        out-of-order periods and ragged rows.
    """
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise SeriesError("empty table: header row is mandatory")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise SeriesError(f"duplicate column names in header {header}")
    if period_column not in header:
        raise SeriesError(f"period column {period_column!r} not found in header {header}")
    pcol = header.index(period_column)
    wanted = [h for h in header if h != period_column] if schema is None else list(schema)
    for name in wanted:
        if name not in header or name == period_column:
            raise SeriesError(f"declared column {name!r} not found in header")
    positions = [header.index(name) for name in wanted]

    periods: list[Period] = []
    data: list[list[float]] = [[] for _ in wanted]
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SeriesError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            period = Period.parse(row[pcol])
        except SeriesError as exc:
            raise SeriesError(f"line {lineno}: {exc}") from None
        if periods:
            step = period - periods[-1]
            if step <= 0:
                raise SeriesError(f"line {lineno}: period {period} is duplicate or out of order")
            if step != 1:
                raise SeriesError(f"line {lineno}: gap between {periods[-1]} and {period}")
        periods.append(period)
        for j, pos in enumerate(positions):
            cell = row[pos].strip()
            if cell == "":
                raise SeriesError(f"line {lineno}: missing value in column {wanted[j]!r}")
            try:
                value = float(cell)
            except ValueError:
                raise SeriesError(
                    f"line {lineno}: non-numeric cell {cell!r} in column {wanted[j]!r}"
                ) from None
            if not math.isfinite(value):
                raise SeriesError(f"line {lineno}: non-finite value in column {wanted[j]!r}")
            data[j].append(value)
    if not periods:
        raise SeriesError("table has a header but no observations")
    return SeriesTable({name: TimeSeries(name, periods[0], col) for name, col in zip(wanted, data)})


def read_series_table(path, schema=None, period_column="date", delimiter=",") -> SeriesTable:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_series_table(fh.read(), schema, period_column, delimiter)


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def emit_series_table(table: SeriesTable, period_column: str = "date", delimiter: str = ",") -> str:
    """Inverse of :func:`parse_series_table`; values printed with 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow([period_column, *table.names])
    cols = [table[n].values for n in table.names]
    for i, period in enumerate(table.index):
        writer.writerow([str(period), *(format_float(c[i]) for c in cols)])
    return buf.getvalue()


def log_transform(s: TimeSeries) -> TimeSeries:
    """Natural logarithm, element-wise. The output name gains a ``log_`` prefix."""
    bad = np.flatnonzero(s.values <= 0)
    if bad.size:
        i = int(bad[0])
        raise SeriesError(f"log of non-positive value {s.values[i]!r} in {s.name!r} at index {i}")
    return s.with_values(np.log(s.values), name=f"log_{s.name}")


def to_per_capita(s: TimeSeries, population: TimeSeries) -> TimeSeries:
    if len(s) != len(population) or s.start != population.start:
        raise SeriesError(
            f"{s.name!r} ({s.start}, n={len(s)}) and population {population.name!r} "
            f"({population.start}, n={len(population)}) are not aligned"
        )
    bad = np.flatnonzero(population.values <= 0)
    if bad.size:
        raise SeriesError(f"population must be strictly positive (index {int(bad[0])})")
    return s.with_values(s.values / population.values, name=f"{s.name}_per_capita")


def slice_period(s: TimeSeries, start, end) -> TimeSeries:
    """Inclusive sub-series between two quarters."""
    start, end = Period.parse(start), Period.parse(end)
    if end < start:
        raise SeriesError(f"slice end {end} precedes start {start}")
    if start < s.start or end > s.end:
        raise SeriesError(f"slice {start}..{end} outside series range {s.start}..{s.end}")
    i0 = start - s.start
    i1 = end - s.start + 1
    return TimeSeries(s.name, start, s.values[i0:i1], s.frequency)


def table_from_arrays(columns: Mapping[str, Iterable[float]], start="1990Q1") -> SeriesTable:
    return SeriesTable({k: TimeSeries(k, Period.parse(start), list(v)) for k, v in columns.items()})
