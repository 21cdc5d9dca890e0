"""Hourly weather at a single location, aligned to the profile year."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .profile_store import days_in_year


class WeatherError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WeatherSeries:
    """Hourly 2 m air temperature (deg C) and surface solar radiation downwards (kW/m2)."""

    temperature_c: np.ndarray
    ssrd_kw_m2: np.ndarray
    year: int

    def __post_init__(self):
        n = days_in_year(self.year) * 24
        temp = np.array(self.temperature_c, dtype=np.float64)
        ssrd = np.array(self.ssrd_kw_m2, dtype=np.float64)
        if temp.shape != (n,) or ssrd.shape != (n,):
            raise WeatherError(f"weather for {self.year} needs {n} hourly values, got {temp.shape} and {ssrd.shape}")
        if not (np.all(np.isfinite(temp)) and np.all(np.isfinite(ssrd))):
            raise WeatherError("weather contains NaN or infinite values")
        if (ssrd < 0).any():
            raise WeatherError(f"negative ssrd at hour {int(np.argmax(ssrd < 0))}")
        temp.flags.writeable = False
        ssrd.flags.writeable = False
        object.__setattr__(self, "temperature_c", temp)
        object.__setattr__(self, "ssrd_kw_m2", ssrd)

    @property
    def n_days(self) -> int:
        return days_in_year(self.year)

    @classmethod
    def constant(cls, year: int, temperature_c: float = 10.0, ssrd_kw_m2: float = 0.0) -> "WeatherSeries":
        n = days_in_year(year) * 24
        return cls(np.full(n, temperature_c), np.full(n, ssrd_kw_m2), year)


def _hour_grid(year: int) -> pd.DatetimeIndex:
    return pd.date_range(f"{year}-01-01", periods=days_in_year(year) * 24, freq="h")


def ingest_weather(path: str | Path, year: int, delimiter: str = ",") -> WeatherSeries:
    """Read ``timestamp, temperature_c, ssrd_kw_m2`` rows for one full year.

    Timestamps are naive local hours on a fixed 24-per-day grid. A missing
    or extra hour raises a WeatherError naming the first offending date.
    """
    df = pd.read_csv(path, sep=delimiter, float_precision="round_trip")
    for col in ("timestamp", "temperature_c", "ssrd_kw_m2"):
        if col not in df.columns:
            raise WeatherError(f"{path}: missing column {col!r}")
    stamps = pd.to_datetime(df["timestamp"], format="ISO8601", errors="coerce")
    if stamps.isna().any():
        row = int(np.flatnonzero(stamps.isna().to_numpy())[0])
        raise WeatherError(f"{path}, line {row + 2}: unparseable timestamp {df['timestamp'].iat[row]!r}")
    if stamps.dt.tz is not None:
        stamps = stamps.dt.tz_localize(None)
    if stamps.duplicated().any():
        dup = stamps[stamps.duplicated()].iat[0]
        raise WeatherError(f"{path}: duplicate hour {dup.isoformat()}")

    grid = _hour_grid(year)
    present = pd.DatetimeIndex(stamps)
    missing = grid.difference(present)
    extra = present.difference(grid)
    if len(missing) or len(extra) or len(df) != len(grid):
        detail = []
        if len(missing):
            detail.append(f"{len(missing)} missing hour(s), first on {missing[0].date().isoformat()} ({missing[0]})")
        if len(extra):
            detail.append(f"{len(extra)} hour(s) outside {year}, first {extra[0]}")
        raise WeatherError(f"{path}: expected {len(grid)} hourly rows, got {len(df)}; " + "; ".join(detail))

    df = df.assign(_t=present).set_index("_t").reindex(grid)
    temp = pd.to_numeric(df["temperature_c"], errors="coerce").to_numpy(dtype=np.float64)
    ssrd = pd.to_numeric(df["ssrd_kw_m2"], errors="coerce").to_numpy(dtype=np.float64)
    if (ssrd < 0).any():
        bad = grid[int(np.argmax(ssrd < 0))]
        raise WeatherError(f"{path}: negative ssrd at {bad}")
    return WeatherSeries(temp, ssrd, year)


def export_weather(w: WeatherSeries, path: str | Path, delimiter: str = ",") -> Path:
    df = pd.DataFrame(
        {
            "timestamp": _hour_grid(w.year).strftime("%Y-%m-%dT%H:%M:%S"),
            "temperature_c": w.temperature_c,
            "ssrd_kw_m2": w.ssrd_kw_m2,
        }
    )
    df.to_csv(path, sep=delimiter, index=False, lineterminator="\n")
    return Path(path)


def daily_mean_temperature(w: WeatherSeries) -> np.ndarray:
    return w.temperature_c.reshape(-1, 24).mean(axis=1)


def daily_max_ssrd(w: WeatherSeries) -> np.ndarray:
    return w.ssrd_kw_m2.reshape(-1, 24).max(axis=1)


def expand_to_quarter_hours(hourly: np.ndarray) -> np.ndarray:
    """Repeat each hourly value for the four quarter-hours it covers."""
    return np.repeat(np.asarray(hourly, dtype=np.float64), 4)


def coldest_days(w: WeatherSeries, k: int) -> np.ndarray:
    """Indices of the ``k`` days with the lowest mean temperature, coldest first."""
    return np.argsort(daily_mean_temperature(w), kind="stable")[:k]
