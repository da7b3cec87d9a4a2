"""Irradiance ingestion, control-grid resampling, splits and price schedules.

Irradiance CSV files have the header ``timestamp,ghi_w_m2`` with ISO-8601
local timestamps. Price CSV files have either ``hour,cent_per_kwh`` (24 rows)
or ``step,cent_per_kwh`` (one row per control step).
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from helios.units import (
    DEFAULT_CONV_FACTOR,
    DEFAULT_PARAMS,
    PhotosynthesisParams,
    etr_from_ppfd,
    watts_to_ppfd,
)

log = logging.getLogger(__name__)

IRRADIANCE_HEADER = ("timestamp", "ghi_w_m2")
DEFAULT_STEP_SECONDS = 900
DEFAULT_PHOTOPERIOD_START = dt.time(4, 0)
DEFAULT_PHOTOPERIOD_SECONDS = 16 * 3600


class IngestError(ValueError):
    """Problems found while reading an input file.

    ``problems`` holds ``(line, field, message)`` triples; line numbers are
    1-based and count the header.
    """

    def __init__(self, path, problems):
        self.path = str(path)
        self.problems = list(problems)
        shown = "; ".join(f"line {ln} field {fld}: {msg}" for ln, fld, msg in self.problems[:5])
        more = f" (+{len(self.problems) - 5} more)" if len(self.problems) > 5 else ""
        super().__init__(f"{self.path}: {shown}{more}")


class GapError(ValueError):
    def __init__(self, date, missing_steps):
        self.date = date
        self.missing_steps = sorted(set(missing_steps))
        super().__init__(f"{date}: irradiance gap covering steps {self.missing_steps}")


@dataclass(frozen=True)
class IrradianceRecord:
    timestamp: dt.datetime
    ghi: float


def load_irradiance_csv(path) -> list[IrradianceRecord]:
    path = Path(path)
    if not path.is_file():
        raise IngestError(path, [(0, "-", "file not found")])

    records, problems = [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != IRRADIANCE_HEADER:
            raise IngestError(path, [(1, "header", f"expected {','.join(IRRADIANCE_HEADER)}, got {header}")])
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                problems.append((lineno, "row", f"expected 2 columns, got {len(row)}"))
                continue
            ts_raw, ghi_raw = (c.strip() for c in row)
            try:
                ts = dt.datetime.fromisoformat(ts_raw)
            except ValueError:
                problems.append((lineno, "timestamp", f"unparsable timestamp {ts_raw!r}"))
                continue
            if ts.tzinfo is not None:
                ts = ts.replace(tzinfo=None)
            try:
                ghi = float(ghi_raw)
            except ValueError:
                problems.append((lineno, "ghi_w_m2", f"not a number: {ghi_raw!r}"))
                continue
            if not np.isfinite(ghi) or ghi < 0:
                problems.append((lineno, "ghi_w_m2", f"GHI must be finite and >= 0, got {ghi_raw}"))
                continue
            records.append((ts, ghi, lineno))

    records.sort(key=lambda r: r[0])
    for prev, cur in zip(records, records[1:]):
        if cur[0] == prev[0]:
            problems.append((cur[2], "timestamp", f"duplicate timestamp {cur[0].isoformat()}"))
    if problems:
        raise IngestError(path, sorted(problems))
    return [IrradianceRecord(ts, ghi) for ts, ghi, _ in records]


def load_irradiance_dir(path) -> list[IrradianceRecord]:
    """Load one CSV file, or every ``*.csv`` in a directory, merged in time order."""
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    if not files:
        raise IngestError(path, [(0, "-", "no CSV files found")])
    out: list[IrradianceRecord] = []
    for f in files:
        out.extend(load_irradiance_csv(f))
    out.sort(key=lambda r: r.timestamp)
    return out


def distinct_dates(records: Iterable[IrradianceRecord]) -> list[dt.date]:
    return sorted({r.timestamp.date() for r in records})


@dataclass(frozen=True)
class IrradianceData:
    """Column view of a record list, used for fast window lookups."""

    times: np.ndarray  # datetime64[s], strictly increasing
    ghi: np.ndarray

    @classmethod
    def from_records(cls, records: Sequence[IrradianceRecord]) -> "IrradianceData":
        times = np.array([r.timestamp for r in records], dtype="datetime64[s]")
        ghi = np.array([r.ghi for r in records], dtype=float)
        if times.size > 1 and np.any(np.diff(times).astype(np.int64) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        return cls(times, ghi)

    @cached_property
    def resolution(self) -> int:
        """Native sample spacing in seconds (median spacing)."""
        if self.times.size < 2:
            raise ValueError("need at least two samples to infer resolution")
        return int(np.median(np.diff(self.times).astype(np.int64)))

    def dates(self) -> list[dt.date]:
        days = np.unique(self.times.astype("datetime64[D]"))
        return [d.item() for d in days]


@dataclass(frozen=True)
class StepSeries:
    """One day of sunlight on the control grid (step ``t`` is ``values[t-1]``)."""

    date: dt.date
    step_seconds: int
    sun_ppfd: np.ndarray
    sun_etr: np.ndarray

    def __post_init__(self):
        if self.sun_ppfd.shape != self.sun_etr.shape or self.sun_ppfd.ndim != 1:
            raise ValueError("sun_ppfd and sun_etr must be 1-D arrays of equal length")
        for arr in (self.sun_ppfd, self.sun_etr):
            arr.setflags(write=False)

    @property
    def month(self) -> int:
        return self.date.month

    @property
    def T(self) -> int:
        return int(self.sun_ppfd.size)

    @property
    def step_index(self) -> np.ndarray:
        return np.arange(1, self.T + 1)

    @classmethod
    def from_ppfd(cls, date, sun_ppfd, step_seconds=DEFAULT_STEP_SECONDS, params=DEFAULT_PARAMS):
        ppfd = np.array(sun_ppfd, dtype=float)
        return cls(date, int(step_seconds), ppfd, np.asarray(etr_from_ppfd(ppfd, params), dtype=float))


def n_steps(photoperiod_seconds: int, m: int) -> int:
    if m <= 0 or photoperiod_seconds <= 0 or photoperiod_seconds % m:
        raise ValueError(f"photoperiod {photoperiod_seconds}s is not a whole number of {m}s steps")
    return photoperiod_seconds // m


def build_step_series(
    records,
    date: dt.date,
    m: int = DEFAULT_STEP_SECONDS,
    photoperiod_start: dt.time = DEFAULT_PHOTOPERIOD_START,
    photoperiod_seconds: int = DEFAULT_PHOTOPERIOD_SECONDS,
    conv_factor: float = DEFAULT_CONV_FACTOR,
    params: PhotosynthesisParams = DEFAULT_PARAMS,
) -> StepSeries:
    """Average irradiance into ``m``-second steps over the photoperiod of ``date``.

    ``records`` is a record list or an :class:`IrradianceData`. Samples are
    expected on the native grid anchored at the photoperiod start. A missing
    run of samples no longer than one step is linearly interpolated; longer
    gaps raise :class:`GapError`.
    """
    data = records if isinstance(records, IrradianceData) else IrradianceData.from_records(records)
    T = n_steps(photoperiod_seconds, m)
    r = data.resolution
    if r > m or m % r:
        raise ValueError(f"native resolution {r}s must divide the step length {m}s")
    per_step = m // r

    start = np.datetime64(dt.datetime.combine(date, photoperiod_start), "s")
    grid = start + np.arange(T * per_step) * np.timedelta64(r, "s")

    idx = np.searchsorted(data.times, grid)
    idx_c = np.minimum(idx, data.times.size - 1)
    present = data.times[idx_c] == grid
    values = np.where(present, data.ghi[idx_c], np.nan)

    if not present.all():
        missing = np.flatnonzero(~present)
        after = idx[missing]  # first record at or after the missing point
        bad = (after == 0) | (after >= data.times.size)
        ok = ~bad
        prev_t = data.times[np.maximum(after - 1, 0)].astype(np.int64)
        next_t = data.times[np.minimum(after, data.times.size - 1)].astype(np.int64)
        bad |= ok & ((next_t - prev_t - r) > m)
        if bad.any():
            raise GapError(date, (missing[bad] // per_step + 1).tolist())
        t_num = data.times.astype(np.int64)
        values[missing] = np.interp(grid[missing].astype(np.int64), t_num, data.ghi)

    ghi_steps = values.reshape(T, per_step).mean(axis=1)
    ppfd = np.asarray(watts_to_ppfd(ghi_steps, conv_factor), dtype=float)
    return StepSeries(date, int(m), ppfd, np.asarray(etr_from_ppfd(ppfd, params), dtype=float))


def build_all_step_series(records, skip_gaps: bool = True, **kwargs) -> list[StepSeries]:
    """Step series for every date present in the data; gappy days are skipped."""
    data = records if isinstance(records, IrradianceData) else IrradianceData.from_records(records)
    out = []
    for day in data.dates():
        try:
            out.append(build_step_series(data, day, **kwargs))
        except GapError as exc:
            if not skip_gaps:
                raise
            log.warning("skipping %s", exc)
    return out


@dataclass(frozen=True)
class DatasetSplit:
    month: int
    train: list = field(default_factory=list)
    test: list = field(default_factory=list)


def split_by_years(series_list: Iterable[StepSeries], train_years, test_years, month: int) -> DatasetSplit:
    train_years, test_years = set(train_years), set(test_years)
    if not train_years or not test_years:
        raise ValueError("train and test year sets must both be nonempty")
    overlap = train_years & test_years
    if overlap:
        raise ValueError(f"train and test years overlap: {sorted(overlap)}")
    if not 1 <= month <= 12:
        raise ValueError(f"month must be in 1..12, got {month}")
    in_month = [s for s in series_list if s.date.month == month]
    return DatasetSplit(
        month=month,
        train=[s for s in in_month if s.date.year in train_years],
        test=[s for s in in_month if s.date.year in test_years],
    )


@dataclass(frozen=True)
class PriceSchedule:
    """Electricity price per control step, cent/kWh."""

    prices: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        if p.ndim != 1 or p.size == 0 or not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise ValueError("prices must be a nonempty 1-D array of positive values")
        p.setflags(write=False)
        object.__setattr__(self, "prices", p)

    @property
    def T(self) -> int:
        return int(self.prices.size)

    @classmethod
    def from_hourly(cls, hourly, T=None, m=DEFAULT_STEP_SECONDS, photoperiod_start=DEFAULT_PHOTOPERIOD_START):
        """Expand 24 hourly prices onto steps by the clock hour each step starts in."""
        hourly = np.asarray(hourly, dtype=float)
        if hourly.shape != (24,):
            raise ValueError(f"need 24 hourly prices, got {hourly.size}")
        T = n_steps(DEFAULT_PHOTOPERIOD_SECONDS, m) if T is None else T
        start = photoperiod_start.hour * 3600 + photoperiod_start.minute * 60 + photoperiod_start.second
        hours = ((start + np.arange(T) * m) // 3600) % 24
        return cls(hourly[hours])


def load_price_csv(path, T, m=DEFAULT_STEP_SECONDS, photoperiod_start=DEFAULT_PHOTOPERIOD_START) -> PriceSchedule:
    path = Path(path)
    if not path.is_file():
        raise IngestError(path, [(0, "-", "file not found")])
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestError(path, [(1, "header", "empty file")])
    header = tuple(h.strip() for h in rows[0])
    if header not in (("hour", "cent_per_kwh"), ("step", "cent_per_kwh")):
        raise IngestError(path, [(1, "header", f"expected hour,cent_per_kwh or step,cent_per_kwh, got {rows[0]}")])

    keyed, problems = {}, []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            key, price = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            problems.append((lineno, "row", f"cannot parse {row}"))
            continue
        if not price > 0:
            problems.append((lineno, "cent_per_kwh", f"price must be > 0, got {price}"))
        keyed[key] = price

    expected = range(24) if header[0] == "hour" else range(1, T + 1)
    if not problems and sorted(keyed) != list(expected):
        problems.append((1, header[0], f"expected keys {expected.start}..{expected.stop - 1}"))
    if problems:
        raise IngestError(path, problems)
    values = [keyed[k] for k in expected]
    if header[0] == "hour":
        return PriceSchedule.from_hourly(values, T=T, m=m, photoperiod_start=photoperiod_start)
    return PriceSchedule(np.array(values))


def default_price_csv() -> Path:
    return Path(str(resources.files("helios") / "resources" / "default_prices.csv"))


def default_price_schedule(T=None, m=DEFAULT_STEP_SECONDS, photoperiod_start=DEFAULT_PHOTOPERIOD_START) -> PriceSchedule:
    """The shipped two-tier time-of-use profile (see ``resources/default_prices.csv``)."""
    T = n_steps(DEFAULT_PHOTOPERIOD_SECONDS, m) if T is None else T
    return load_price_csv(default_price_csv(), T=T, m=m, photoperiod_start=photoperiod_start)
