"""Synthetic clear-sky / cloudy irradiance for tests and demos.

The clear-sky shape is a half sine between sunrise and sunset around local
noon, with month-dependent day length and peak GHI loosely matching a
mid-latitude (about 36 N) coastal site. Clouds scale each day by a random
factor and add a multiplicative AR(1) flicker.
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

import numpy as np

from helios.data import (
    DEFAULT_PHOTOPERIOD_SECONDS,
    DEFAULT_PHOTOPERIOD_START,
    DEFAULT_STEP_SECONDS,
    IrradianceRecord,
    StepSeries,
)
from helios.units import DEFAULT_CONV_FACTOR, DEFAULT_PARAMS

DAY_LENGTH_H = (9.9, 10.8, 12.0, 13.2, 14.2, 14.7, 14.4, 13.6, 12.4, 11.2, 10.2, 9.7)
PEAK_GHI = (550.0, 650.0, 780.0, 880.0, 930.0, 960.0, 940.0, 880.0, 790.0, 680.0, 580.0, 520.0)
SOLAR_NOON_H = 12.0


def day_length_hours(date: dt.date) -> float:
    """Day length interpolated between mid-month table values."""
    mid = dt.date(date.year, date.month, 15)
    frac = (date - mid).days / 30.4
    other = date.month + (1 if frac >= 0 else -1)
    other_len = DAY_LENGTH_H[(other - 1) % 12]
    return DAY_LENGTH_H[date.month - 1] + abs(frac) * (other_len - DAY_LENGTH_H[date.month - 1])


def clear_sky_ghi(month: int, seconds_of_day: np.ndarray, scale: float = 1.0, day_length_h: float | None = None) -> np.ndarray:
    half = (DAY_LENGTH_H[month - 1] if day_length_h is None else day_length_h) * 1800.0
    phase = (np.asarray(seconds_of_day, dtype=float) - (SOLAR_NOON_H * 3600.0 - half)) / (2.0 * half)
    inside = (phase > 0) & (phase < 1)
    return np.where(inside, scale * PEAK_GHI[month - 1] * np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)


def _day_ghi(month, seconds, rng, cloud, transmittance=1.0):
    ghi = transmittance * clear_sky_ghi(month, seconds)
    if cloud <= 0:
        return ghi
    # per-day attenuation plus AR(1) flicker, clipped to stay physical
    day_factor = rng.uniform(1.0 - cloud, 1.0)
    z = np.empty(seconds.size)
    z[0] = rng.normal()
    for n in range(1, seconds.size):
        z[n] = 0.9 * z[n - 1] + np.sqrt(1 - 0.81) * rng.normal()
    flicker = np.clip(1.0 + 0.5 * cloud * z, 0.0, 1.2)
    return ghi * day_factor * flicker


def generate_records(years, resolution: int = DEFAULT_STEP_SECONDS, cloud: float = 0.0, seed: int = 0,
                     months=None, transmittance: float = 1.0) -> list[IrradianceRecord]:
    """Full-day records at ``resolution`` seconds for every day of ``years``.

    ``cloud`` in [0, 1): 0 gives identical clear-sky days within a month.
    ``transmittance`` scales everything, standing in for the greenhouse cover.
    """
    if not 0 <= cloud < 1:
        raise ValueError("cloud must lie in [0, 1)")
    if not 0 < transmittance <= 1:
        raise ValueError("transmittance must lie in (0, 1]")
    if 86400 % resolution:
        raise ValueError("resolution must divide a day")
    rng = np.random.default_rng(seed)
    seconds = np.arange(0, 86400, resolution)
    months = set(range(1, 13)) if months is None else set(months)
    out = []
    for year in sorted(years):
        day = dt.date(year, 1, 1)
        while day.year == year:
            if day.month in months:
                ghi = _day_ghi(day.month, seconds, rng, cloud, transmittance)
                midnight = dt.datetime.combine(day, dt.time())
                out.extend(
                    IrradianceRecord(midnight + dt.timedelta(seconds=int(s)), round(float(g), 3))
                    for s, g in zip(seconds, ghi)
                )
            day += dt.timedelta(days=1)
    return out


def write_irradiance_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "ghi_w_m2"])
        for r in records:
            w.writerow([r.timestamp.isoformat(timespec="minutes"), f"{r.ghi:g}"])
    return path


def synthetic_day(
    date: dt.date,
    scale: float = 1.0,
    seasonal: bool = False,
    m: int = DEFAULT_STEP_SECONDS,
    photoperiod_start: dt.time = DEFAULT_PHOTOPERIOD_START,
    photoperiod_seconds: int = DEFAULT_PHOTOPERIOD_SECONDS,
    conv_factor: float = DEFAULT_CONV_FACTOR,
    params=DEFAULT_PARAMS,
) -> StepSeries:
    """A clear-sky day sampled at step midpoints, PPFD scaled by ``scale``.

    With ``seasonal`` the day length follows the calendar date instead of
    being constant over the month.
    """
    start = photoperiod_start.hour * 3600 + photoperiod_start.minute * 60
    T = photoperiod_seconds // m
    mids = start + (np.arange(T) + 0.5) * m
    length = day_length_hours(date) if seasonal else None
    ghi = clear_sky_ghi(date.month, mids, scale, length)
    return StepSeries.from_ppfd(date, conv_factor * ghi, m, params)


def synthetic_month(year: int, month: int, n_days: int = 30, amplitude_spread: float = 0.1, seed: int = 0,
                    **kwargs) -> list[StepSeries]:
    """Noiseless clear-sky days of one month with seasonal day length and per-day peak scale.

    Scales are drawn from U(1 - spread, 1 + spread); nothing varies within a day.
    """
    rng = np.random.default_rng(seed)
    first = dt.date(year, month, 1)
    out = []
    for n in range(n_days):
        date = first + dt.timedelta(days=n)
        scale = rng.uniform(1.0 - amplitude_spread, 1.0 + amplitude_spread)
        out.append(synthetic_day(date, scale=scale, seasonal=True, **kwargs))
    return out
