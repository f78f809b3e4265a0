"""Time-series profile ingestion and synthetic reference profiles.

All profile CSVs share the layout ``timestamp_min,<value>`` with strictly
increasing timestamps at any uniform resolution of one minute or coarser.
Profiles are linearly interpolated onto the 1-minute simulation grid and
held constant beyond their last sample.

The synthetic generators produce the bundled reference assets: a clear-sky
irradiance day, a variable-cloud irradiance day (half-sine clear sky with
seeded square-wave cloud dips), multi-day summer outdoor temperature, and a
normalized daily curve for non-residential loads.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import ConfigError
from .rngs import substream

MIN_PER_DAY = 1440


def load_profile_csv(path, value_column: str):
    """Read (timestamps_min, values) from a two-column profile CSV."""
    with open(path, "r", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0] != "timestamp_min":
            raise ConfigError(f"{path}: expected header 'timestamp_min,{value_column}'")
        if header[1] != value_column:
            raise ConfigError(
                f"{path}: expected value column '{value_column}', got '{header[1]}'"
            )
        ts, vals = [], []
        for row in reader:
            if not row:
                continue
            ts.append(float(row[0]))
            vals.append(float(row[1]))
    ts = np.asarray(ts)
    vals = np.asarray(vals)
    if ts.size < 2:
        raise ConfigError(f"{path}: need at least two samples")
    if np.any(np.diff(ts) <= 0):
        raise ConfigError(f"{path}: timestamps must be strictly increasing")
    return ts, vals


def save_profile_csv(path, ts, vals, value_column: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamp_min", value_column])
        for t, v in zip(ts, vals):
            writer.writerow(["%.17g" % t, "%.17g" % v])


def to_minutes(ts, vals, n_minutes: int) -> np.ndarray:
    """Resample a profile onto minutes 0..n_minutes-1 by linear interpolation.

    Values are clamped to the first/last sample outside the covered span.
    """
    grid = np.arange(n_minutes, dtype=np.float64)
    return np.interp(grid, ts, vals)


def load_minutes(path, value_column: str, n_minutes: int) -> np.ndarray:
    ts, vals = load_profile_csv(path, value_column)
    return to_minutes(ts, vals, n_minutes)


# --- synthetic reference profiles -------------------------------------------


def synth_clear_irradiance(step_min: int = 5, n_days: int = 1) -> tuple:
    """Clear-sky irradiance: half-sine between 06:00 and 20:00, else zero."""
    ts = np.arange(0, n_days * MIN_PER_DAY + step_min, step_min, dtype=np.float64)
    m = ts % MIN_PER_DAY
    up, down = 6 * 60.0, 20 * 60.0
    frac = np.where(
        (m >= up) & (m <= down),
        np.sin(np.pi * (m - up) / (down - up)),
        0.0,
    )
    return ts, np.maximum(frac, 0.0)


def synth_cloudy_irradiance(seed: int, step_min: int = 5, n_days: int = 1,
                            gap_min: tuple = (10.0, 45.0),
                            width_min: tuple = (5.0, 20.0),
                            depth: tuple = (0.3, 0.7)) -> tuple:
    """Variable-cloud irradiance: clear-sky day with square-wave cloud dips.

    Dips cut 30-70 % of the clear-sky value for 5-20 minutes by default and
    are drawn from a seeded stream, so a given seed always yields the same
    profile.
    """
    ts, frac = synth_clear_irradiance(step_min=step_min, n_days=n_days)
    frac = frac.copy()
    rng = substream(seed, "irradiance-clouds")
    for day in range(n_days):
        t = day * MIN_PER_DAY + 6 * 60.0
        day_end = day * MIN_PER_DAY + 20 * 60.0
        while True:
            t += rng.uniform(*gap_min)  # clear stretch between clouds
            d = rng.uniform(*depth)
            width = rng.uniform(*width_min)
            if t >= day_end:
                break
            mask = (ts >= t) & (ts < t + width)
            frac[mask] *= 1.0 - d
            t += width
    return ts, frac


def synth_weather_days(seed: int, n_days: int, step_min: int = 5) -> tuple:
    """Summer outdoor temperature, diurnal sine plus per-day random extremes.

    Daily lows fall in roughly 15-20 C and highs in 28-35 C, matching a hot
    July stretch; the minimum lands near 05:00 and the maximum near 16:00.
    """
    if n_days < 1:
        raise ConfigError("need at least one day of weather")
    rng = substream(seed, "weather")
    ts = np.arange(0, n_days * MIN_PER_DAY + step_min, step_min, dtype=np.float64)
    tout = np.empty_like(ts)
    lows = rng.uniform(15.0, 20.0, size=n_days + 1)
    highs = rng.uniform(28.0, 35.0, size=n_days + 1)
    day_idx = np.minimum((ts // MIN_PER_DAY).astype(int), n_days)
    m = ts % MIN_PER_DAY
    lo = lows[day_idx]
    hi = highs[day_idx]
    mid = 0.5 * (lo + hi)
    amp = 0.5 * (hi - lo)
    # Minimum at 05:00, maximum at 16:00 (phase-shifted sine).
    tout = mid + amp * np.sin(2.0 * np.pi * (m - 10.0 * 60.0) / MIN_PER_DAY)
    return ts, tout


def synth_reference_day_weather(step_min: int = 5) -> tuple:
    """The bundled scenario day: 17 C overnight low to a 32 C afternoon high."""
    ts = np.arange(0, MIN_PER_DAY + 31, step_min, dtype=np.float64)
    m = np.minimum(ts, MIN_PER_DAY)
    tout = 24.5 + 7.5 * np.sin(2.0 * np.pi * (m - 600.0) / MIN_PER_DAY)
    return ts, tout


def synth_static_profile(step_min: int = 15) -> tuple:
    """Normalized daily curve for non-residential loads.

    Overnight floor around 0.45 of peak, business-hours plateau near 1.0.
    """
    ts = np.arange(0, MIN_PER_DAY + step_min, step_min, dtype=np.float64)
    m = ts % MIN_PER_DAY
    h = m / 60.0
    ramp_up = np.clip((h - 6.0) / 3.0, 0.0, 1.0)
    ramp_down = np.clip((22.0 - h) / 4.0, 0.0, 1.0)
    frac = 0.45 + 0.55 * np.minimum(ramp_up, ramp_down)
    return ts, frac
