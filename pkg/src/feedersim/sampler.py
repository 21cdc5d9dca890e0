"""
Random profile sampling of low-voltage feeders.

A feeder of ``n`` connections is modelled by drawing ``n`` distinct
year-long profiles, summing them per quarter-hour and taking the extreme
of the sum (maximum for offtake, minimum for injection). The simultaneity
factor divides that extreme by the sum of the individual extremes. Repeating
the draw many times gives the distribution of feeder peaks.

Every sample ``i`` for feeder size ``n`` gets its own random stream derived
from ``(seed, n, i)``, and every sample is summed in draw order, so results
are bit-identical for any number of worker threads.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numba
import numpy as np
import pandas as pd

from .profile_store import Direction, Profile, ProfileSet
from .subsets import SubsetSpec, apply_subset, get_subset

DEFAULT_N_SAMPLES = 10_000
DEFAULT_CONNECTIONS = (10, 20, 40, 70, 100, 150, 250)
PERCENTILE_LEVELS = (5, 25, 75, 95)
# Samples per work unit. Fixed, so chunking never depends on the worker count.
CHUNK_SIZE = 256
# Quarter-hours per cache block in the summation kernel.
TIME_BLOCK = 256

_SEED_MASK = (1 << 64) - 1


def _directions(direction: str | Direction) -> tuple[Direction, ...]:
    if str(getattr(direction, "value", direction)).lower() == "both":
        return (Direction.OFFTAKE, Direction.INJECTION)
    return (Direction.parse(direction),)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, then FEEDERSIM_THREADS, then the CPU count."""
    if threads is None:
        env = os.environ.get("FEEDERSIM_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


@dataclass(frozen=True)
class SamplingConfig:
    n_connections: tuple[int, ...] | int = DEFAULT_CONNECTIONS
    n_samples: int = DEFAULT_N_SAMPLES
    seed: int = 0
    direction: str = "both"
    subset: SubsetSpec | str | None = None

    def __post_init__(self):
        conns = self.n_connections
        conns = (int(conns),) if np.isscalar(conns) else tuple(int(c) for c in conns)
        if not conns or min(conns) < 1:
            raise ValueError("n_connections must be positive")
        if len(set(conns)) != len(conns):
            raise ValueError("duplicate feeder sizes in n_connections")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "n_connections", conns)
        dirs = _directions(self.direction)
        object.__setattr__(self, "direction", "both" if len(dirs) == 2 else dirs[0].value)
        if isinstance(self.subset, str):
            object.__setattr__(self, "subset", get_subset(self.subset))

    @property
    def directions(self) -> tuple[Direction, ...]:
        return _directions(self.direction)

    def to_dict(self) -> dict:
        return {
            "n_connections": list(self.n_connections),
            "n_samples": self.n_samples,
            "seed": self.seed,
            "direction": self.direction,
            "subset": self.subset.name if self.subset is not None else None,
        }


# --------------------------------------------------------------------------
# Drawing feeders
# --------------------------------------------------------------------------


def sample_rng(seed: int, n_connections: int, sample_index: int) -> np.random.Generator:
    """Independent random stream for one sample of one feeder size."""
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(int(n_connections), int(sample_index)))
    return np.random.Generator(np.random.PCG64(ss))


def sample_feeder(profiles: ProfileSet | int, n_connections: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n_connections`` distinct profiles, drawn uniformly."""
    size = profiles if isinstance(profiles, (int, np.integer)) else len(profiles)
    if n_connections < 1:
        raise ValueError("n_connections must be >= 1")
    if n_connections > size:
        raise ValueError(f"cannot draw {n_connections} connections from {size} profiles")
    return rng.choice(size, size=n_connections, replace=False)


def draw_feeders(seed: int, n_connections: int, n_samples: int, n_profiles: int, start: int = 0) -> np.ndarray:
    """``(n_samples, n_connections)`` index matrix for samples ``start .. start+n_samples-1``."""
    out = np.empty((n_samples, n_connections), dtype=np.int64)
    for k in range(n_samples):
        out[k] = sample_feeder(n_profiles, n_connections, sample_rng(seed, n_connections, start + k))
    return out


# --------------------------------------------------------------------------
# Metrics of a single feeder (reference path)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FeederMetrics:
    direction: Direction
    n_connections: int
    peak_kw: float
    peak_quarter_index: int
    simultaneity: float | None
    drawn_ids: tuple = ()

    @property
    def peak_per_connection_kw(self) -> float:
        return self.peak_kw / self.n_connections


def _as_matrix(profiles) -> tuple[np.ndarray, tuple]:
    if isinstance(profiles, ProfileSet):
        return profiles.power, profiles.ids
    if isinstance(profiles, np.ndarray) and profiles.ndim == 2:
        return profiles, tuple(range(len(profiles)))
    rows, ids = [], []
    for k, p in enumerate(profiles):
        if isinstance(p, Profile):
            rows.append(p.power)
            ids.append(p.id)
        else:
            rows.append(np.asarray(p, dtype=np.float64))
            ids.append(k)
    lengths = {len(r) for r in rows}
    if len(lengths) > 1:
        raise ValueError("profiles differ in length")
    return np.asarray(rows, dtype=np.float64).reshape(len(rows), -1), tuple(ids)


def feeder_sum(matrix: np.ndarray, rows: Sequence[int] | None = None) -> np.ndarray:
    """Element-wise sum of the selected rows, added one row at a time in the given order."""
    rows = range(len(matrix)) if rows is None else rows
    it = iter(rows)
    acc = np.array(matrix[next(it)], dtype=np.float64)
    for r in it:
        np.add(acc, matrix[r], out=acc)
    return acc


def _simultaneity(extreme: float, individual: np.ndarray, direction: Direction) -> float | None:
    sign = 1.0 if direction is Direction.OFFTAKE else -1.0
    denominator = 0.0
    for v in individual:
        denominator += max(0.0, sign * float(v))
    if denominator <= 0.0:
        return None
    return max(0.0, sign * extreme) / denominator


def feeder_metrics(profiles, direction: Direction | str = Direction.OFFTAKE) -> FeederMetrics:
    """Peak, peak time and simultaneity of one feeder made of ``profiles``.

    ``profiles`` may be a ProfileSet, a 2-D array (one row per connection),
    or a sequence of Profiles / 1-D arrays of equal length.

    Simultaneity is ``|extreme of sum| / sum(|individual extremes|)`` with
    both taken in the requested direction. Profiles that never reach that
    direction (e.g. no injection at all) add zero to the denominator; if the
    denominator is zero the simultaneity is None.
    """
    direction = Direction.parse(direction)
    matrix, ids = _as_matrix(profiles)
    if len(matrix) == 0:
        raise ValueError("a feeder needs at least one profile")
    total = feeder_sum(matrix)
    if direction is Direction.OFFTAKE:
        q = int(np.argmax(total))
        individual = matrix.max(axis=1)
    else:
        q = int(np.argmin(total))
        individual = matrix.min(axis=1)
    peak = float(total[q])
    return FeederMetrics(
        direction=direction,
        n_connections=len(matrix),
        peak_kw=peak,
        peak_quarter_index=q,
        simultaneity=_simultaneity(peak, individual, direction),
        drawn_ids=ids,
    )


# --------------------------------------------------------------------------
# Batched kernel
# --------------------------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _extremes_kernel(power, draws, pos_max, pos_min, block):
    """Max/argmax, min/argmin of each drawn feeder's summed series, plus the
    offtake and injection simultaneity denominators.

    Loops over time blocks so that the rows touched by a batch of samples
    stay in cache. Per quarter-hour, rows are added in draw order, which
    matches ``feeder_sum`` exactly.
    """
    n_samples, n_conn = draws.shape
    n_q = power.shape[1]
    vmax = np.full(n_samples, -np.inf)
    imax = np.zeros(n_samples, np.int64)
    vmin = np.full(n_samples, np.inf)
    imin = np.zeros(n_samples, np.int64)
    den_max = np.zeros(n_samples)
    den_min = np.zeros(n_samples)
    for s in range(n_samples):
        a = 0.0
        b = 0.0
        for j in range(n_conn):
            a += pos_max[draws[s, j]]
            b += pos_min[draws[s, j]]
        den_max[s] = a
        den_min[s] = b
    acc = np.empty(block)
    for b0 in range(0, n_q, block):
        w = min(block, n_q - b0)
        for s in range(n_samples):
            r = draws[s, 0]
            for t in range(w):
                acc[t] = power[r, b0 + t]
            for j in range(1, n_conn):
                r = draws[s, j]
                for t in range(w):
                    acc[t] += power[r, b0 + t]
            hi = vmax[s]
            lo = vmin[s]
            for t in range(w):
                v = acc[t]
                if v > hi:
                    hi = v
                    imax[s] = b0 + t
                if v < lo:
                    lo = v
                    imin[s] = b0 + t
            vmax[s] = hi
            vmin[s] = lo
    return vmax, imax, vmin, imin, den_max, den_min


def _chunks(n_samples: int) -> list[tuple[int, int]]:
    return [(a, min(a + CHUNK_SIZE, n_samples)) for a in range(0, n_samples, CHUNK_SIZE)]


def _run_extremes(power: np.ndarray, draws: np.ndarray, threads: int):
    pos_max = np.maximum(power.max(axis=1), 0.0)
    pos_min = np.maximum(-power.min(axis=1), 0.0)
    n = len(draws)
    out = [np.empty(n), np.empty(n, np.int64), np.empty(n), np.empty(n, np.int64), np.empty(n), np.empty(n)]

    def work(span):
        a, b = span
        for arr, res in zip(out, _extremes_kernel(power, draws[a:b], pos_max, pos_min, TIME_BLOCK)):
            arr[a:b] = res

    spans = _chunks(n)
    if threads == 1 or len(spans) == 1:
        for span in spans:
            work(span)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, spans))
    return out


# --------------------------------------------------------------------------
# Statistics and reports
# --------------------------------------------------------------------------


def percentiles(values, ps, axis: int | None = None) -> np.ndarray:
    """Linear interpolation between order statistics.

    For sorted ``x`` of length ``n`` the ``p``-th percentile is read at the
    fractional position ``h = (n - 1) * p / 100``:
    ``x[floor(h)] + (h - floor(h)) * (x[floor(h) + 1] - x[floor(h)])``.

    With ``axis=None`` the input is flattened and the result has one entry
    per level; otherwise the levels form the leading output axis.
    """
    x = np.asarray(values, dtype=np.float64)
    if axis is None:
        x = x.ravel()
        axis = 0
    x = np.moveaxis(np.sort(x, axis=axis), axis, 0)
    n = x.shape[0]
    if n == 0:
        raise ValueError("percentiles of an empty sequence")
    ps = np.atleast_1d(np.asarray(ps, dtype=np.float64))
    if ((ps < 0) | (ps > 100)).any():
        raise ValueError("percentile levels must lie in [0, 100]")
    h = (n - 1) * ps / 100.0
    lo = np.floor(h).astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    shape = (-1,) + (1,) * (x.ndim - 1)
    frac = (h - lo).reshape(shape)
    a, b = x[lo], x[hi]
    # interpolate from the nearer end; keeps the result inside [a, b]
    out = np.where(frac < 0.5, a + (b - a) * frac, b - (b - a) * (1.0 - frac))
    return np.clip(out, a, b)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    min: float
    p5: float
    p25: float
    median: float
    p75: float
    p95: float
    max: float

    @classmethod
    def from_values(cls, values) -> "SummaryStats":
        v = np.asarray(values, dtype=np.float64)
        p5, p25, p50, p75, p95 = percentiles(v, (5, 25, 50, 75, 95))
        return cls(float(v.mean()), float(v.min()), p5, p25, p50, p75, p95, float(v.max()))

    def ordered(self) -> bool:
        return self.min <= self.p5 <= self.p25 <= self.median <= self.p75 <= self.p95 <= self.max

    def __sub__(self, other: "SummaryStats") -> dict[str, float]:
        return {k: getattr(self, k) - getattr(other, k) for k in STAT_FIELDS}


STAT_FIELDS = ("mean", "min", "p5", "p25", "median", "p75", "p95", "max")


@dataclass(frozen=True, eq=False)
class SampleTable:
    """Raw per-sample results for one feeder size and direction."""

    n_connections: int
    direction: Direction
    peak_kw: np.ndarray
    peak_quarter_index: np.ndarray
    simultaneity: np.ndarray  # NaN where undefined
    draws: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.peak_kw)

    @property
    def sample_id(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def peak_per_connection_kw(self) -> np.ndarray:
        return self.peak_kw / self.n_connections

    def metrics(self, i: int) -> FeederMetrics:
        s = self.simultaneity[i]
        return FeederMetrics(
            direction=self.direction,
            n_connections=self.n_connections,
            peak_kw=float(self.peak_kw[i]),
            peak_quarter_index=int(self.peak_quarter_index[i]),
            simultaneity=None if np.isnan(s) else float(s),
            drawn_ids=tuple(self.draws[i]) if self.draws is not None else (),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "sample_id": self.sample_id,
                "peak_kw": self.peak_kw,
                "peak_quarter_index": self.peak_quarter_index,
                "simultaneity": self.simultaneity,
            }
        )

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            fh.write(f"# n_connections={self.n_connections} direction={self.direction.value}\n")
            fh.write("sample_id,peak_kw,peak_quarter_index,simultaneity\n")
            for i, (p, q, s) in enumerate(
                zip(self.peak_kw.tolist(), self.peak_quarter_index.tolist(), self.simultaneity.tolist())
            ):
                fh.write(f"{i},{p!r},{q},{'' if math.isnan(s) else repr(s)}\n")
        return path

    @classmethod
    def read_csv(cls, path: str | Path) -> "SampleTable":
        with open(path) as fh:
            header = fh.readline().lstrip("#").split()
        meta = dict(item.split("=", 1) for item in header)
        df = pd.read_csv(path, comment="#", float_precision="round_trip")
        return cls(
            n_connections=int(meta["n_connections"]),
            direction=Direction.parse(meta["direction"]),
            peak_kw=df["peak_kw"].to_numpy(dtype=np.float64),
            peak_quarter_index=df["peak_quarter_index"].to_numpy(dtype=np.int64),
            simultaneity=df["simultaneity"].to_numpy(dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class SizeResult:
    n_connections: int
    direction: Direction
    peak_per_connection: SummaryStats
    simultaneity: SummaryStats | None
    n_undefined_simultaneity: int
    samples: SampleTable

    @classmethod
    def from_samples(cls, table: SampleTable) -> "SizeResult":
        sim = table.simultaneity[~np.isnan(table.simultaneity)]
        return cls(
            n_connections=table.n_connections,
            direction=table.direction,
            peak_per_connection=SummaryStats.from_values(table.peak_per_connection_kw),
            simultaneity=SummaryStats.from_values(sim) if sim.size else None,
            n_undefined_simultaneity=int(len(table) - sim.size),
            samples=table,
        )

    def record(self) -> dict:
        return {
            "n_connections": self.n_connections,
            "direction": self.direction.value,
            "n_samples": len(self.samples),
            "peak_per_connection_kw": asdict(self.peak_per_connection),
            "simultaneity": asdict(self.simultaneity) if self.simultaneity else None,
            "n_undefined_simultaneity": self.n_undefined_simultaneity,
        }


@dataclass(frozen=True, eq=False)
class SamplingReport:
    config: SamplingConfig
    subset_name: str
    n_profiles: int
    year: int
    timezone: str
    results: tuple[SizeResult, ...] = field(default_factory=tuple)

    def __iter__(self) -> Iterator[SizeResult]:
        return iter(self.results)

    @property
    def connections(self) -> tuple[int, ...]:
        return tuple(dict.fromkeys(r.n_connections for r in self.results))

    @property
    def directions(self) -> tuple[Direction, ...]:
        return tuple(dict.fromkeys(r.direction for r in self.results))

    def get(self, n_connections: int, direction: Direction | str = Direction.OFFTAKE) -> SizeResult:
        direction = Direction.parse(direction)
        for r in self.results:
            if r.n_connections == n_connections and r.direction is direction:
                return r
        raise KeyError((n_connections, direction.value))

    def to_dict(self) -> dict:
        return {
            "subset": self.subset_name,
            "n_profiles": self.n_profiles,
            "year": self.year,
            "timezone": self.timezone,
            "config": self.config.to_dict(),
            "results": [r.record() for r in self.results],
        }

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.results:
            row = {"n_connections": r.n_connections, "direction": r.direction.value}
            row.update({f"peak_per_connection_{k}": v for k, v in asdict(r.peak_per_connection).items()})
            if r.simultaneity is not None:
                row.update({f"simultaneity_{k}": v for k, v in asdict(r.simultaneity).items()})
            rows.append(row)
        return pd.DataFrame(rows)

    def write_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    def write_samples(self, directory: str | Path, stem: str = "samples") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        return [
            r.samples.write_csv(directory / f"{stem}_{r.direction.value}_n{r.n_connections}.csv")
            for r in self.results
        ]

    @classmethod
    def from_json(cls, path: str | Path, samples_dir: str | Path | None = None, stem: str = "samples") -> "SamplingReport":
        """Rebuild a report; sample tables are reloaded when ``samples_dir`` is given."""
        data = json.loads(Path(path).read_text())
        cfg = data["config"]
        config = SamplingConfig(
            n_connections=tuple(cfg["n_connections"]),
            n_samples=cfg["n_samples"],
            seed=cfg["seed"],
            direction=cfg["direction"],
            subset=cfg["subset"] and get_subset(cfg["subset"]),
        )
        results = []
        for rec in data["results"]:
            direction = Direction.parse(rec["direction"])
            n = rec["n_connections"]
            if samples_dir is not None:
                table = SampleTable.read_csv(Path(samples_dir) / f"{stem}_{direction.value}_n{n}.csv")
            else:
                empty = np.zeros(0)
                table = SampleTable(n, direction, empty, empty.astype(np.int64), empty)
            sim = rec["simultaneity"]
            results.append(
                SizeResult(
                    n_connections=n,
                    direction=direction,
                    peak_per_connection=SummaryStats(**rec["peak_per_connection_kw"]),
                    simultaneity=SummaryStats(**sim) if sim else None,
                    n_undefined_simultaneity=rec["n_undefined_simultaneity"],
                    samples=table,
                )
            )
        return cls(config, data["subset"], data["n_profiles"], data["year"], data["timezone"], tuple(results))


def run_sampling(
    profiles: ProfileSet,
    config: SamplingConfig,
    threads: int | None = None,
    keep_draws: bool = False,
) -> SamplingReport:
    """Monte Carlo feeder sampling over every feeder size in ``config``.

    Each feeder size is sampled independently (``n_samples`` draws). With
    ``direction="both"`` the same drawn feeders give both the offtake and the
    injection results.
    """
    if config.subset is not None:
        profiles = apply_subset(profiles, config.subset)
    threads = resolve_threads(threads)
    power = profiles.power
    results = []
    for n in config.n_connections:
        if n > len(profiles):
            raise ValueError(f"cannot draw {n} connections from {len(profiles)} profiles")
        draws = draw_feeders(config.seed, n, config.n_samples, len(profiles))
        vmax, imax, vmin, imin, den_max, den_min = _run_extremes(power, draws, threads)
        for direction in config.directions:
            if direction is Direction.OFFTAKE:
                peak, idx, num, den = vmax, imax, np.maximum(vmax, 0.0), den_max
            else:
                peak, idx, num, den = vmin, imin, np.maximum(-vmin, 0.0), den_min
            with np.errstate(divide="ignore", invalid="ignore"):
                sim = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
            table = SampleTable(n, direction, peak, idx, sim, draws if keep_draws else None)
            results.append(SizeResult.from_samples(table))
    name = config.subset.name if config.subset is not None else "all"
    return SamplingReport(config, name, len(profiles), profiles.year, profiles.timezone, tuple(results))


# --------------------------------------------------------------------------
# Contribution of a technology by population differencing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ContributionRow:
    n_connections: int
    direction: Direction
    peak_per_connection_delta: dict[str, float]
    simultaneity_delta: dict[str, float] | None


@dataclass(frozen=True)
class ContributionReport:
    subset_with: str
    subset_without: str
    rows: tuple[ContributionRow, ...]

    def get(self, n_connections: int, direction: Direction | str = Direction.OFFTAKE) -> ContributionRow:
        direction = Direction.parse(direction)
        for r in self.rows:
            if r.n_connections == n_connections and r.direction is direction:
                return r
        raise KeyError((n_connections, direction.value))

    def to_frame(self) -> pd.DataFrame:
        out = []
        for r in self.rows:
            row = {"n_connections": r.n_connections, "direction": r.direction.value}
            row.update({f"peak_per_connection_delta_{k}": v for k, v in r.peak_per_connection_delta.items()})
            if r.simultaneity_delta is not None:
                row.update({f"simultaneity_delta_{k}": v for k, v in r.simultaneity_delta.items()})
            out.append(row)
        return pd.DataFrame(out)


def lct_contribution(report_with: SamplingReport, report_without: SamplingReport) -> ContributionReport:
    """Per feeder size, the change in per-connection peak (kW) and in
    simultaneity when moving from the population without the technology to
    the population with it. Every statistic is differenced separately."""
    keys_with = [(r.n_connections, r.direction) for r in report_with.results]
    keys_without = [(r.n_connections, r.direction) for r in report_without.results]
    if sorted(keys_with) != sorted(keys_without):
        raise ValueError(
            f"reports do not share the same feeder sizes/directions: {sorted(keys_with)} vs {sorted(keys_without)}"
        )
    rows = []
    for n, direction in keys_with:
        a = report_with.get(n, direction)
        b = report_without.get(n, direction)
        sim = a.simultaneity - b.simultaneity if a.simultaneity and b.simultaneity else None
        rows.append(ContributionRow(n, direction, a.peak_per_connection - b.peak_per_connection, sim))
    return ContributionReport(report_with.subset_name, report_without.subset_name, tuple(rows))


def bootstrap_standard_error(values, n_boot: int = 500, seed: int = 0, statistic=np.mean) -> float:
    """Bootstrap estimate of the standard error of ``statistic(values)``."""
    v = np.asarray(values, dtype=np.float64)
    rng = np.random.default_rng(seed)
    stats = np.array([statistic(v[rng.integers(0, v.size, v.size)]) for _ in range(n_boot)])
    return float(stats.std(ddof=1))
