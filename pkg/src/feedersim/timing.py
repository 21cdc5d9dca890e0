"""When feeder peaks happen, and what the feeder load looks like around them."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
import pandas as pd

from .profile_store import DEFAULT_TIMEZONE, QUARTERS_PER_DAY, Direction, ProfileSet, days_in_year
from .sampler import (
    CHUNK_SIZE,
    SampleTable,
    SamplingConfig,
    draw_feeders,
    percentiles,
    resolve_threads,
)
from .subsets import apply_subset
from .weather import WeatherSeries, daily_max_ssrd, daily_mean_temperature, expand_to_quarter_hours

ENVELOPE_LEVELS = ("min", "p5", "p25", "median", "p75", "p95", "max")
_LEVEL_PCT = (0, 5, 25, 50, 75, 95, 100)


@dataclass(frozen=True, eq=False)
class PeakTimeDistribution:
    """Share of sampled feeders peaking on each day and in each local hour."""

    day_histogram: np.ndarray  # (n_days,)
    hour_day_matrix: np.ndarray  # (n_days, 24)
    direction: Direction
    n_connections: int | None
    year: int
    timezone: str
    n_samples: int

    @property
    def hour_histogram(self) -> np.ndarray:
        return self.hour_day_matrix.sum(axis=0)

    def entropy(self) -> float:
        """Shannon entropy (nats) of the hour-by-day distribution."""
        p = self.hour_day_matrix[self.hour_day_matrix > 0]
        return float(-(p * np.log(p)).sum())

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.hour_day_matrix, columns=[f"h{h:02d}" for h in range(24)])
        df.insert(0, "day_probability", self.day_histogram)
        df.insert(0, "date", pd.date_range(f"{self.year}-01-01", periods=len(df), freq="D").strftime("%Y-%m-%d"))
        df.index.name = "day"
        return df


def peak_time_distribution(
    per_sample_peaks: SampleTable | np.ndarray,
    year: int,
    timezone: str = DEFAULT_TIMEZONE,
    direction: Direction | str | None = None,
    n_connections: int | None = None,
) -> PeakTimeDistribution:
    """Map each sample's peak quarter-hour to (day, local hour) and normalise.

    Quarter-hour indices are positions on the DST-normalised local grid, so
    the local hour is simply ``(index % 96) // 4``.
    """
    if isinstance(per_sample_peaks, SampleTable):
        quarters = per_sample_peaks.peak_quarter_index
        direction = direction or per_sample_peaks.direction
        n_connections = n_connections or per_sample_peaks.n_connections
    else:
        quarters = np.asarray(per_sample_peaks, dtype=np.int64)
    if quarters.size == 0:
        raise ValueError("no samples")
    n_days = days_in_year(year)
    if quarters.min() < 0 or quarters.max() >= n_days * QUARTERS_PER_DAY:
        raise ValueError(f"peak quarter index outside year {year}")
    day = quarters // QUARTERS_PER_DAY
    hour = (quarters % QUARTERS_PER_DAY) // 4
    counts = np.bincount(day * 24 + hour, minlength=n_days * 24).reshape(n_days, 24)
    matrix = counts / quarters.size
    return PeakTimeDistribution(
        day_histogram=counts.sum(axis=1) / quarters.size,
        hour_day_matrix=matrix,
        direction=Direction.parse(direction or Direction.OFFTAKE),
        n_connections=n_connections,
        year=year,
        timezone=timezone,
        n_samples=int(quarters.size),
    )


def weather_overlay(dist: PeakTimeDistribution, w: WeatherSeries) -> pd.DataFrame:
    """Day-of-year peak probability next to daily mean temperature and maximum ssrd."""
    if dist.year != w.year:
        raise ValueError(f"distribution is for {dist.year}, weather for {w.year}")
    return pd.DataFrame(
        {
            "day": np.arange(w.n_days),
            "date": pd.date_range(f"{w.year}-01-01", periods=w.n_days, freq="D").strftime("%Y-%m-%d"),
            "peak_probability": dist.day_histogram,
            "temperature_mean_c": daily_mean_temperature(w),
            "ssrd_max_kw_m2": daily_max_ssrd(w),
        }
    )


# --------------------------------------------------------------------------
# Feeder envelope
# --------------------------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _envelope_kernel(power, draws, sign, q0, q1):
    """Per drawn feeder: the summed series inside [q0, q1), the quarter of the
    year-global extreme, and per-day counts of the day-local extreme quarter.

    ``sign`` is +1 for offtake and -1 for injection. A day only counts when
    the feeder actually reaches that direction (sign * value > 0).
    """
    n_samples, n_conn = draws.shape
    n_q = power.shape[1]
    n_days = n_q // 96
    window = np.empty((n_samples, q1 - q0))
    year_peak = np.zeros(n_samples, np.int64)
    counts = np.zeros((n_days, 96), np.int64)
    acc = np.empty(n_q)
    for s in range(n_samples):
        r = draws[s, 0]
        for t in range(n_q):
            acc[t] = power[r, t]
        for j in range(1, n_conn):
            r = draws[s, j]
            for t in range(n_q):
                acc[t] += power[r, t]
        best = -np.inf
        for t in range(n_q):
            v = sign * acc[t]
            if v > best:
                best = v
                year_peak[s] = t
        for d in range(n_days):
            base = d * 96
            k = 0
            dbest = sign * acc[base]
            for t in range(1, 96):
                v = sign * acc[base + t]
                if v > dbest:
                    dbest = v
                    k = t
            if dbest > 0:
                counts[d, k] += 1
        for t in range(q0, q1):
            window[s, t - q0] = acc[t]
    return window, year_peak, counts


def _envelope_pass(power, draws, direction: Direction, q0: int, q1: int, threads: int):
    sign = 1.0 if direction is Direction.OFFTAKE else -1.0
    spans = [(a, min(a + CHUNK_SIZE, len(draws))) for a in range(0, len(draws), CHUNK_SIZE)]

    def work(span):
        a, b = span
        return _envelope_kernel(power, draws[a:b], sign, q0, q1)

    if threads == 1 or len(spans) == 1:
        parts = [work(span) for span in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, spans))
    window = np.concatenate([p[0] for p in parts])
    year_peak = np.concatenate([p[1] for p in parts])
    counts = sum((p[2] for p in parts[1:]), parts[0][2].copy())
    return window, year_peak, counts


def _modal_quarter(counts: np.ndarray) -> np.ndarray:
    """Most frequent quarter per day (first on ties), -1 for days without votes."""
    modal = counts.argmax(axis=1)
    return np.where(counts.sum(axis=1) > 0, modal, -1)


@dataclass(frozen=True, eq=False)
class FeederEnvelope:
    """Distribution of the summed feeder load per quarter-hour over a day range."""

    year: int
    day_range: tuple[int, int]  # [first day, last day + 1), 0-based day of year
    direction: Direction
    n_connections: int
    n_samples: int
    seed: int
    subset_name: str
    bands: dict[str, np.ndarray]  # ENVELOPE_LEVELS plus "mean", each (n_quarters,)
    temperature_c: np.ndarray | None
    ssrd_kw_m2: np.ndarray | None
    day_peak_probability: np.ndarray  # share of samples whose yearly peak falls on that day
    modal_peak_quarter: np.ndarray  # most frequent day-local peak quarter, -1 if none

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        start = pd.Timestamp(f"{self.year}-01-01") + pd.Timedelta(days=self.day_range[0])
        return pd.date_range(start, periods=len(self.bands["mean"]), freq="15min")

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"timestamp": self.timestamps.strftime("%Y-%m-%dT%H:%M:%S")})
        for name in ENVELOPE_LEVELS + ("mean",):
            df[f"{name}_kw"] = self.bands[name]
        if self.temperature_c is not None:
            df["temperature_c"] = self.temperature_c
            df["ssrd_kw_m2"] = self.ssrd_kw_m2
        return df

    def days_frame(self) -> pd.DataFrame:
        d0, d1 = self.day_range
        dates = pd.date_range(f"{self.year}-01-01", periods=days_in_year(self.year), freq="D")[d0:d1]
        modal = self.modal_peak_quarter
        return pd.DataFrame(
            {
                "day": np.arange(d0, d1),
                "date": dates.strftime("%Y-%m-%d"),
                "peak_probability": self.day_peak_probability,
                "modal_peak_quarter": modal,
                "modal_peak_time": [f"{q // 4:02d}:{15 * (q % 4):02d}" if q >= 0 else "" for q in modal],
            }
        )


def _single_size(config: SamplingConfig) -> tuple[int, Direction]:
    if len(config.n_connections) != 1:
        raise ValueError("feeder envelopes need exactly one feeder size")
    if len(config.directions) != 1:
        raise ValueError("feeder envelopes need direction 'offtake' or 'injection'")
    return config.n_connections[0], config.directions[0]


def feeder_envelope(
    profiles: ProfileSet,
    config: SamplingConfig,
    day_range: tuple[int, int],
    w: WeatherSeries | None = None,
    threads: int | None = None,
) -> FeederEnvelope:
    """Quantile bands of the feeder load over ``day_range`` plus peak timing per day.

    Uses the same per-sample random streams as ``run_sampling``, so the
    feeders behind the envelope are exactly the ones behind the sampling
    report for the same seed and size.
    """
    n, direction = _single_size(config)
    if config.subset is not None:
        profiles = apply_subset(profiles, config.subset)
    if n > len(profiles):
        raise ValueError(f"cannot draw {n} connections from {len(profiles)} profiles")
    d0, d1 = day_range
    if not 0 <= d0 < d1 <= profiles.n_days:
        raise ValueError(f"day_range {day_range} outside the {profiles.n_days}-day year")
    if w is not None and w.year != profiles.year:
        raise ValueError(f"weather is for {w.year}, profiles for {profiles.year}")

    draws = draw_feeders(config.seed, n, config.n_samples, len(profiles))
    window, year_peak, counts = _envelope_pass(
        profiles.power, draws, direction, d0 * QUARTERS_PER_DAY, d1 * QUARTERS_PER_DAY, resolve_threads(threads)
    )
    qs = percentiles(window, _LEVEL_PCT, axis=0)
    bands = dict(zip(ENVELOPE_LEVELS, qs))
    bands["mean"] = window.mean(axis=0)
    peak_days = np.bincount(year_peak // QUARTERS_PER_DAY, minlength=profiles.n_days) / len(draws)

    temp = ssrd = None
    if w is not None:
        sl = slice(d0 * QUARTERS_PER_DAY, d1 * QUARTERS_PER_DAY)
        temp = expand_to_quarter_hours(w.temperature_c)[sl]
        ssrd = expand_to_quarter_hours(w.ssrd_kw_m2)[sl]
    return FeederEnvelope(
        year=profiles.year,
        day_range=(d0, d1),
        direction=direction,
        n_connections=n,
        n_samples=config.n_samples,
        seed=config.seed,
        subset_name=config.subset.name if config.subset is not None else "all",
        bands=bands,
        temperature_c=temp,
        ssrd_kw_m2=ssrd,
        day_peak_probability=peak_days[d0:d1],
        modal_peak_quarter=_modal_quarter(counts)[d0:d1],
    )


def daily_modal_peak_quarters(
    profiles: ProfileSet, config: SamplingConfig, threads: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Most frequent day-local peak quarter for every day of the year.

    Returns ``(modal, counts)`` where ``counts[d, q]`` is the number of
    sampled feeders whose day-``d`` peak fell in quarter ``q``.
    """
    n, direction = _single_size(config)
    if config.subset is not None:
        profiles = apply_subset(profiles, config.subset)
    draws = draw_feeders(config.seed, n, config.n_samples, len(profiles))
    _, _, counts = _envelope_pass(profiles.power, draws, direction, 0, 0, resolve_threads(threads))
    return _modal_quarter(counts), counts


def in_hour_window(quarters: np.ndarray, start_hour: float, end_hour: float) -> np.ndarray:
    """Whether each day-local quarter index lies in [start_hour, end_hour].

    Windows wrap around midnight when ``end_hour < start_hour``.
    """
    q = np.asarray(quarters)
    lo, hi = start_hour * 4, end_hour * 4
    if lo <= hi:
        return (q >= lo) & (q <= hi)
    return (q >= lo) | (q <= hi)
