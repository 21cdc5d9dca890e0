"""
Year-long quarter-hour smart-meter profiles.

Profiles are stored as one signed net-power channel in kW (offtake positive,
injection negative), one value per local quarter-hour. A year always has
``days_in_year * 96`` slots: the spring-forward hour is imputed and the
duplicated fall-back hour is dropped during ingestion.
"""

from __future__ import annotations

import calendar
import csv
import enum
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

QUARTERS_PER_DAY = 96
HOURS_PER_QUARTER = 0.25
DEFAULT_YEAR = 2022
DEFAULT_TIMEZONE = "Europe/Brussels"

_OFFSET_RE = re.compile(r"(Z|[+-]\d{2}:?\d{2})$")


class IngestError(ValueError):
    """Raised when an input file cannot be turned into a valid ProfileSet."""


class DuplicateIdError(IngestError):
    pass


class Direction(str, enum.Enum):
    OFFTAKE = "offtake"
    INJECTION = "injection"

    @classmethod
    def parse(cls, value: "Direction | str") -> "Direction":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown direction {value!r}; expected 'offtake' or 'injection'") from None


def days_in_year(year: int) -> int:
    return 366 if calendar.isleap(year) else 365


def quarters_in_year(year: int) -> int:
    return days_in_year(year) * QUARTERS_PER_DAY


def quarter_grid(year: int) -> pd.DatetimeIndex:
    """Naive local timestamps of every quarter-hour slot in ``year``."""
    return pd.date_range(f"{year}-01-01", periods=quarters_in_year(year), freq="15min")


@lru_cache(maxsize=16)
def _dst_slot_masks(year: int, timezone: str) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks over the slot grid: (nonexistent, ambiguous) local times."""
    grid = quarter_grid(year)
    nonexistent = grid.tz_localize(timezone, nonexistent="NaT", ambiguous=np.zeros(len(grid), bool)).isna()
    ambiguous = grid.tz_localize(timezone, nonexistent="shift_forward", ambiguous="NaT").isna()
    nonexistent = np.asarray(nonexistent)
    ambiguous = np.asarray(ambiguous) & ~nonexistent
    nonexistent.flags.writeable = False
    ambiguous.flags.writeable = False
    return nonexistent, ambiguous


def dst_days(year: int, timezone: str = DEFAULT_TIMEZONE) -> tuple[int | None, int | None]:
    """Day-of-year indices (0-based) of the spring-forward and fall-back days."""
    nonexistent, ambiguous = _dst_slot_masks(year, timezone)
    spring = np.flatnonzero(nonexistent)
    fall = np.flatnonzero(ambiguous)
    return (
        int(spring[0] // QUARTERS_PER_DAY) if spring.size else None,
        int(fall[0] // QUARTERS_PER_DAY) if fall.size else None,
    )


@dataclass(frozen=True)
class ProfileLabels:
    has_hp: bool = False
    has_ev: bool = False
    pv_inverter_kva: float | None = None
    connection_power_kva: float | None = None
    ev_max_charge_kw: float | None = None

    def __post_init__(self):
        for name in ("pv_inverter_kva", "ev_max_charge_kw"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be a non-negative number, got {value!r}")
        if self.connection_power_kva is not None and not (
            np.isfinite(self.connection_power_kva) and self.connection_power_kva > 0
        ):
            raise ValueError(f"connection_power_kva must be positive, got {self.connection_power_kva!r}")

    @property
    def has_pv(self) -> bool:
        return self.pv_inverter_kva is not None and self.pv_inverter_kva > 0


@dataclass(frozen=True, eq=False)
class Profile:
    """One connection's year of quarter-hour average power (kW)."""

    id: str
    power: np.ndarray
    labels: ProfileLabels = field(default_factory=ProfileLabels)

    def __post_init__(self):
        power = np.asarray(self.power, dtype=np.float64)
        if power.ndim != 1:
            raise ValueError("power must be one-dimensional")
        if power.size % QUARTERS_PER_DAY or power.size // QUARTERS_PER_DAY not in (365, 366):
            raise ValueError(
                f"profile {self.id!r}: power has {power.size} values, expected 365 or 366 days of 96 quarter-hours"
            )
        if not np.all(np.isfinite(power)):
            raise ValueError(f"profile {self.id!r}: power contains NaN or infinite values")
        if power.flags.writeable:
            power = power.copy()
            power.flags.writeable = False
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "power", power)

    @property
    def n_days(self) -> int:
        return self.power.size // QUARTERS_PER_DAY


@dataclass(frozen=True)
class Diagnostic:
    """A note about one input row or profile produced during ingestion."""

    reason: str
    action: str  # "skipped", "rejected" or "interpolated"
    profile_id: str | None = None
    line: int | None = None

    def __str__(self):
        where = f"line {self.line}: " if self.line is not None else ""
        who = f"profile {self.profile_id!r}: " if self.profile_id is not None else ""
        return f"{where}{who}{self.reason} ({self.action})"


class ProfileSet:
    """Immutable, indexed collection of equally long profiles for one year.

    The power values live in a single read-only ``(n_profiles, n_quarters)``
    matrix so that the sampler can index rows without copying.
    """

    def __init__(
        self,
        profiles: Iterable[Profile] = (),
        year: int = DEFAULT_YEAR,
        timezone: str = DEFAULT_TIMEZONE,
        diagnostics: Sequence[Diagnostic] = (),
    ):
        profiles = list(profiles)
        n_q = quarters_in_year(year)
        for p in profiles:
            if p.power.size != n_q:
                raise ValueError(f"profile {p.id!r} has {p.power.size} values, year {year} needs {n_q}")
        matrix = np.empty((len(profiles), n_q), dtype=np.float64)
        for i, p in enumerate(profiles):
            matrix[i] = p.power
        self._init(
            [p.id for p in profiles], matrix, [p.labels for p in profiles], year, timezone, diagnostics
        )

    def _init(self, ids, matrix, labels, year, timezone, diagnostics):
        ids = tuple(str(i) for i in ids)
        seen: set[str] = set()
        dupes = sorted({i for i in ids if i in seen or seen.add(i)})
        if dupes:
            raise DuplicateIdError(f"duplicate profile ids: {', '.join(dupes)}")
        if matrix.shape != (len(ids), quarters_in_year(year)):
            raise ValueError(f"power matrix shape {matrix.shape} does not match {len(ids)} profiles in {year}")
        if len(labels) != len(ids):
            raise ValueError("labels and ids differ in length")
        if matrix.flags.writeable:
            matrix.flags.writeable = False
        self._ids = ids
        self._index = {pid: i for i, pid in enumerate(ids)}
        self._power = matrix
        self._labels = tuple(labels)
        self.year = int(year)
        self.timezone = timezone
        self.diagnostics = tuple(diagnostics)

    @classmethod
    def from_matrix(
        cls,
        ids: Sequence[str],
        power: np.ndarray,
        labels: Sequence[ProfileLabels] | None = None,
        year: int = DEFAULT_YEAR,
        timezone: str = DEFAULT_TIMEZONE,
        diagnostics: Sequence[Diagnostic] = (),
        copy: bool = True,
    ) -> "ProfileSet":
        power = np.array(power, dtype=np.float64, copy=copy, order="C")
        if power.ndim != 2:
            raise ValueError("power must be a 2-D matrix (profiles x quarter-hours)")
        if not np.all(np.isfinite(power)):
            raise ValueError("power contains NaN or infinite values")
        if labels is None:
            labels = [ProfileLabels() for _ in ids]
        obj = cls.__new__(cls)
        obj._init(ids, power, list(labels), year, timezone, diagnostics)
        return obj

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    @property
    def labels(self) -> tuple[ProfileLabels, ...]:
        return self._labels

    @property
    def power(self) -> np.ndarray:
        """Read-only ``(n_profiles, n_quarters)`` matrix."""
        return self._power

    @property
    def n_days(self) -> int:
        return days_in_year(self.year)

    @property
    def n_quarters(self) -> int:
        return self._power.shape[1]

    def __len__(self) -> int:
        return len(self._ids)

    def __iter__(self) -> Iterator[Profile]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, key: int | str) -> Profile:
        i = self._index[key] if isinstance(key, str) else int(key)
        return Profile(self._ids[i], self._power[i], self._labels[i])

    def __contains__(self, pid: object) -> bool:
        return pid in self._index

    def __repr__(self):
        return f"ProfileSet({len(self)} profiles, year={self.year}, timezone={self.timezone!r})"

    def index_of(self, pid: str) -> int:
        return self._index[pid]

    def take(self, indices: Sequence[int]) -> "ProfileSet":
        """New set holding the rows at ``indices`` (in that order)."""
        indices = np.asarray(indices, dtype=np.int64)
        return ProfileSet.from_matrix(
            [self._ids[i] for i in indices],
            self._power[indices],
            [self._labels[i] for i in indices],
            self.year,
            self.timezone,
            copy=False,
        )

    def merge(self, other: "ProfileSet") -> "ProfileSet":
        if (other.year, other.timezone) != (self.year, self.timezone):
            raise ValueError("cannot merge sets with different year or timezone")
        return ProfileSet.from_matrix(
            self._ids + other._ids,
            np.vstack([self._power, other._power]),
            self._labels + other._labels,
            self.year,
            self.timezone,
            self.diagnostics + other.diagnostics,
        )


# --------------------------------------------------------------------------
# DST normalization
# --------------------------------------------------------------------------


def _to_local_naive(timestamps, timezone: str) -> tuple[pd.DatetimeIndex, np.ndarray]:
    """Parse timestamps to naive local time.

    Returns the naive index (NaT where unparseable) and, for ordering, the
    nanosecond instant of offset-aware entries (file position otherwise).
    """
    if isinstance(timestamps, pd.DatetimeIndex) or (
        len(timestamps) and not isinstance(next(iter(timestamps)), str)
    ):
        idx = pd.DatetimeIndex(pd.to_datetime(timestamps, errors="coerce"))
        if idx.tz is not None:
            local = idx.tz_convert(timezone).tz_localize(None)
            order = idx.asi8.astype(np.float64)
            return local, order
        return idx, np.arange(len(idx), dtype=np.float64)

    strings = pd.Series(np.asarray(timestamps, dtype=object), dtype="string").str.strip()
    aware = strings.str.contains(_OFFSET_RE.pattern.replace("(", "(?:", 1), na=False).to_numpy()
    local = pd.Series(pd.NaT, index=strings.index, dtype="datetime64[ns]")
    order = np.arange(len(strings), dtype=np.float64)
    if (~aware).any():
        local[~aware] = pd.to_datetime(strings[~aware], format="ISO8601", errors="coerce")
    if aware.any():
        instants = pd.to_datetime(strings[aware], format="ISO8601", errors="coerce", utc=True)
        local[aware] = instants.dt.tz_convert(timezone).dt.tz_localize(None)
        # aware rows are ordered by instant so that the earlier of two
        # identical local times counts as the first occurrence
        valid = instants.notna().to_numpy()
        ns = instants.astype("int64").to_numpy().astype(np.float64)
        order[np.flatnonzero(aware)[valid]] = ns[valid]
        if not aware.all():
            logger.warning("mixed naive and offset-aware timestamps; duplicates resolved by file order")
            order = np.arange(len(strings), dtype=np.float64)
    return pd.DatetimeIndex(local), order


def _slots(local: pd.DatetimeIndex, year: int) -> np.ndarray:
    """Quarter-hour slot index of each naive local timestamp (-1 if off-grid)."""
    start = np.datetime64(f"{year}-01-01T00:00", "ns")
    values = local.values.astype("datetime64[ns]")
    quarter_ns = 15 * 60 * 10**9
    delta = (values - start).astype(np.int64)
    ok = ~np.isnat(values) & (delta % quarter_ns == 0)
    return np.where(ok, delta // quarter_ns, -1)


def _place_on_grid(
    slots: np.ndarray, values: np.ndarray, order: np.ndarray, year: int, timezone: str
) -> tuple[np.ndarray, np.ndarray]:
    """Place readings on the year's slot grid and apply the DST rules.

    Returns the grid (NaN where nothing was measured) and the positions
    (into ``slots``) of readings dropped as non-DST duplicates.
    """
    n_q = quarters_in_year(year)
    nonexistent, ambiguous = _dst_slot_masks(year, timezone)
    out = np.full(n_q, np.nan)

    sequence = np.argsort(order, kind="stable")
    s_sorted = slots[sequence]
    # first occurrence wins: np.unique returns the first index of each slot
    uniq, first = np.unique(s_sorted, return_index=True)
    out[uniq] = values[sequence[first]]

    dup_mask = np.ones(len(s_sorted), bool)
    dup_mask[first] = False
    dup_pos = sequence[dup_mask]
    dropped = dup_pos[~ambiguous[slots[dup_pos]]]

    for s in np.flatnonzero(nonexistent):
        if np.isnan(out[s]) and s >= 4:
            out[s] = out[s - 4]
    return out, dropped


def normalize_dst(timestamps, values, timezone: str = DEFAULT_TIMEZONE, year: int | None = None) -> np.ndarray:
    """Map local-time readings onto a fixed ``days * 96`` quarter-hour grid.

    The hour skipped on the spring-forward day is filled with a copy of the
    preceding hour's four values. On the fall-back day the second occurrence
    of the repeated hour is dropped. Offset-aware timestamps (ISO-8601 with
    ``+01:00``/``+02:00``) are converted to local time first; for naive
    timestamps, occurrence order is file order.

    Slots with no reading at all stay NaN; gap handling is the caller's job.

    Raises:
        ValueError: if readings fall in more than one calendar year or
            ``year`` is given and some readings lie outside it.
    """
    values = np.asarray(values, dtype=np.float64)
    local, order = _to_local_naive(timestamps, timezone)
    if len(local) != len(values):
        raise ValueError("timestamps and values differ in length")
    if local.isna().any():
        raise ValueError("unparseable timestamps")
    years = np.unique(local.year)
    if len(years) > 1:
        raise ValueError(f"readings span multiple years: {', '.join(map(str, years))}")
    if year is None:
        year = int(years[0])
    elif len(years) and years[0] != year:
        raise ValueError(f"readings are in {years[0]}, expected {year}")
    slots = _slots(local, year)
    if (slots < 0).any():
        raise ValueError("timestamps are not aligned to quarter-hours")
    out, _ = _place_on_grid(slots, values, order, year, timezone)
    return out


# --------------------------------------------------------------------------
# Ingestion and export
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestConfig:
    year: int = DEFAULT_YEAR
    timezone: str = DEFAULT_TIMEZONE
    max_gap: int = 96  # longest run of missing quarter-hours that is interpolated
    delimiter: str = ","
    id_column: str = "profile_id"
    time_column: str = "timestamp"
    power_column: str = "power_kw"


def _missing_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """(start, length) of each run of True values."""
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    return [(int(a), int(b - a)) for a, b in zip(edges[::2], edges[1::2])]


def fill_gaps(series: np.ndarray) -> np.ndarray:
    """Linear interpolation over interior NaN runs; edge runs take the nearest value."""
    out = np.array(series, dtype=np.float64)
    nan = np.isnan(out)
    if nan.all():
        raise ValueError("series has no values")
    if nan.any():
        x = np.arange(out.size)
        out[nan] = np.interp(x[nan], x[~nan], out[~nan])
    return out


def _read_table(path: Path, delimiter: str) -> tuple[pd.DataFrame, list[Diagnostic]]:
    diagnostics: list[Diagnostic] = []
    try:
        df = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False, engine="c")
    except pd.errors.ParserError:
        bad: list[list[str]] = []

        def _bad(line):
            bad.append(line)
            return None

        df = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False, engine="python", on_bad_lines=_bad)
        for fields in bad:
            diagnostics.append(Diagnostic(f"wrong number of fields: {delimiter.join(fields)!r}", "skipped"))
    return df, diagnostics


def _parse_floats(text: pd.Series) -> np.ndarray:
    """Exact (round-trip) float parsing; NaN where a cell is not a number."""
    # pd.to_numeric is off by one ulp on some inputs, so it only flags bad cells
    ok = pd.to_numeric(text, errors="coerce").notna().to_numpy()
    out = np.full(len(text), np.nan)
    out[ok] = text[ok].astype(np.float64).to_numpy()
    return out


def ingest_profiles(
    path: str | Path,
    format_config: IngestConfig | None = None,
    labels_path: str | Path | None = None,
) -> ProfileSet:
    """Read a long-format delimited file into a validated ProfileSet.

    The file has one row per (profile id, local ISO-8601 timestamp, kW).
    Malformed rows are skipped, gaps up to ``max_gap`` quarter-hours are
    linearly interpolated and longer gaps reject the whole profile. Every
    such event is recorded in ``ProfileSet.diagnostics``.
    """
    cfg = format_config or IngestConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    df, diagnostics = _read_table(path, cfg.delimiter)
    for col in (cfg.id_column, cfg.time_column, cfg.power_column):
        if col not in df.columns:
            raise IngestError(f"{path}: missing column {col!r}")

    ids = df[cfg.id_column].str.strip()
    local, order = _to_local_naive(df[cfg.time_column].to_numpy(), cfg.timezone)
    power = _parse_floats(df[cfg.power_column].str.strip())
    slots = _slots(local, cfg.year)
    in_year = np.asarray(local.year == cfg.year) & (slots >= 0) & (slots < quarters_in_year(cfg.year))

    bad_id = (ids == "").to_numpy()
    bad_time = np.asarray(local.isna())
    bad_power = ~np.isfinite(power)
    bad_year = ~bad_time & ~in_year
    bad = bad_id | bad_time | bad_power | bad_year
    for row in np.flatnonzero(bad):
        if bad_id[row]:
            reason = "missing profile id"
        elif bad_time[row]:
            reason = f"unparseable timestamp {df[cfg.time_column].iat[row]!r}"
        elif bad_power[row]:
            reason = f"invalid power value {df[cfg.power_column].iat[row]!r}"
        else:
            reason = f"timestamp {df[cfg.time_column].iat[row]!r} is outside {cfg.year} or off the quarter-hour grid"
        diagnostics.append(Diagnostic(reason, "skipped", ids.iat[row] or None, int(row) + 2))

    good = np.flatnonzero(~bad)
    ids_good = ids.to_numpy()[good]
    labels = read_labels(labels_path) if labels_path is not None else {}

    kept_ids: list[str] = []
    rows: list[np.ndarray] = []
    codes, uniques = pd.factorize(ids_good, sort=False)
    groups = np.argsort(codes, kind="stable")
    bounds = np.searchsorted(codes[groups], np.arange(len(uniques) + 1))
    for k, pid in enumerate(uniques):
        members = good[groups[bounds[k] : bounds[k + 1]]]
        grid, dropped = _place_on_grid(slots[members], power[members], order[members], cfg.year, cfg.timezone)
        for pos in dropped:
            diagnostics.append(Diagnostic("duplicate timestamp", "skipped", pid, int(members[pos]) + 2))
        runs = _missing_runs(np.isnan(grid))
        longest = max((n for _, n in runs), default=0)
        if longest > cfg.max_gap:
            covered = int(np.count_nonzero(~np.isnan(grid)))
            diagnostics.append(
                Diagnostic(
                    f"{longest} consecutive missing quarter-hours (limit {cfg.max_gap}); "
                    f"{covered} of {grid.size} quarter-hours present",
                    "rejected",
                    pid,
                )
            )
            continue
        if runs:
            starts = ", ".join(f"slot {s} (+{n})" for s, n in runs[:5])
            diagnostics.append(Diagnostic(f"interpolated {len(runs)} gap(s): {starts}", "interpolated", pid))
            grid = fill_gaps(grid)
        kept_ids.append(pid)
        rows.append(grid)

    for d in diagnostics:
        logger.info("%s", d)
    matrix = np.vstack(rows) if rows else np.empty((0, quarters_in_year(cfg.year)))
    return ProfileSet.from_matrix(
        kept_ids,
        matrix,
        [labels.get(pid, ProfileLabels()) for pid in kept_ids],
        cfg.year,
        cfg.timezone,
        diagnostics,
        copy=False,
    )


_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n", ""}


def _parse_bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise IngestError(f"cannot read {what}={text!r} as a boolean")


def _parse_optional(text: str) -> float | None:
    t = text.strip()
    return None if t == "" or t.lower() in {"nan", "na", "none"} else float(t)


LABEL_COLUMNS = ("profile_id", "has_hp", "has_ev", "pv_inverter_kva", "connection_power_kva")


def read_labels(path: str | Path, delimiter: str = ",") -> dict[str, ProfileLabels]:
    """Read the labels file into a mapping from profile id to labels.

    An optional ``ev_max_charge_kw`` column is honoured when present.
    """
    out: dict[str, ProfileLabels] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = [c for c in LABEL_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise IngestError(f"{path}: missing label columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            pid = row["profile_id"].strip()
            if pid in out:
                raise DuplicateIdError(f"{path}, line {lineno}: duplicate profile id {pid!r}")
            try:
                out[pid] = ProfileLabels(
                    has_hp=_parse_bool(row["has_hp"], "has_hp"),
                    has_ev=_parse_bool(row["has_ev"], "has_ev"),
                    pv_inverter_kva=_parse_optional(row["pv_inverter_kva"]),
                    connection_power_kva=_parse_optional(row["connection_power_kva"]),
                    ev_max_charge_kw=_parse_optional(row.get("ev_max_charge_kw") or ""),
                )
            except ValueError as exc:
                raise IngestError(f"{path}, line {lineno}: {exc}") from None
    return out


def _fmt_optional(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def export_labels(profiles: ProfileSet, path: str | Path, delimiter: str = ",") -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(LABEL_COLUMNS + ("ev_max_charge_kw",))
        for pid, lab in zip(profiles.ids, profiles.labels):
            writer.writerow(
                [
                    pid,
                    int(lab.has_hp),
                    int(lab.has_ev),
                    _fmt_optional(lab.pv_inverter_kva),
                    _fmt_optional(lab.connection_power_kva),
                    _fmt_optional(lab.ev_max_charge_kw),
                ]
            )
    return path


def export_profiles(
    profiles: ProfileSet,
    path: str | Path,
    labels_path: str | Path | None = None,
    format_config: IngestConfig | None = None,
) -> Path:
    """Write profiles in the long ingestion format.

    Timestamps are the naive local slot times (including the imputed
    spring-forward hour), and values use the shortest round-trip float
    representation, so re-ingesting gives bit-identical power.
    """
    cfg = format_config or IngestConfig(year=profiles.year, timezone=profiles.timezone)
    path = Path(path)
    stamps = quarter_grid(profiles.year).strftime("%Y-%m-%dT%H:%M:%S").to_numpy()
    with open(path, "w", newline="") as fh:
        fh.write(cfg.delimiter.join((cfg.id_column, cfg.time_column, cfg.power_column)) + "\n")
        for pid, row in zip(profiles.ids, profiles.power):
            values = map(repr, row.tolist())
            fh.writelines(f"{pid}{cfg.delimiter}{t}{cfg.delimiter}{v}\n" for t, v in zip(stamps, values))
    if labels_path is not None:
        export_labels(profiles, labels_path, cfg.delimiter)
    return path


# --------------------------------------------------------------------------
# Per-profile statistics
# --------------------------------------------------------------------------


def yearly_consumption(p: Profile | np.ndarray) -> float:
    """Net yearly energy in kWh (negative for net injectors)."""
    power = p.power if isinstance(p, Profile) else np.asarray(p, dtype=np.float64)
    return float(np.sum(power) * HOURS_PER_QUARTER)


def profile_peak(p: Profile | np.ndarray, direction: Direction | str = Direction.OFFTAKE) -> tuple[float, int]:
    """Extreme quarter-hour power and the first index where it occurs.

    Offtake uses the maximum, injection the (signed) minimum.
    """
    power = p.power if isinstance(p, Profile) else np.asarray(p, dtype=np.float64)
    if Direction.parse(direction) is Direction.OFFTAKE:
        i = int(np.argmax(power))
    else:
        i = int(np.argmin(power))
    return float(power[i]), i


def aligned_histogram(values: np.ndarray, bin_width: float) -> tuple[np.ndarray, np.ndarray]:
    """Histogram with edges on integer multiples of ``bin_width``.

    Returns ``(counts, edges)``. A constant input lands in a single bin.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        return np.zeros(0, np.int64), np.zeros(1)
    lo = np.floor(values.min() / bin_width)
    hi = np.floor(values.max() / bin_width)
    edges = np.arange(lo, hi + 2) * bin_width
    bins = np.clip(np.floor(values / bin_width) - lo, 0, len(edges) - 2).astype(np.int64)
    counts = np.bincount(bins, minlength=len(edges) - 1)
    return counts, edges


@dataclass(frozen=True)
class PanelData:
    """The three per-profile views: overlaid days, heat map and histogram."""

    profile_id: str
    daily: np.ndarray  # (n_days, 96)
    env_min: np.ndarray
    env_mean: np.ndarray
    env_max: np.ndarray
    hist_counts: np.ndarray
    hist_edges: np.ndarray

    @property
    def heatmap(self) -> np.ndarray:
        return self.daily


def profile_panels(p: Profile, bin_width: float = 0.25) -> PanelData:
    daily = p.power.reshape(-1, QUARTERS_PER_DAY)
    counts, edges = aligned_histogram(p.power, bin_width)
    return PanelData(
        profile_id=p.id,
        daily=daily,
        env_min=daily.min(axis=0),
        env_mean=daily.mean(axis=0),
        env_max=daily.max(axis=0),
        hist_counts=counts,
        hist_edges=edges,
    )


def _quarter_labels() -> list[str]:
    return [f"{q // 4:02d}:{15 * (q % 4):02d}" for q in range(QUARTERS_PER_DAY)]


def export_panels(panels: PanelData, directory: str | Path, stem: str | None = None) -> list[Path]:
    """Write the panel data as three delimited text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"profile_{panels.profile_id}"
    labels = _quarter_labels()

    daily = pd.DataFrame(panels.daily, columns=labels)
    daily.index.name = "day"
    envelope = pd.DataFrame(
        {"time": labels, "min_kw": panels.env_min, "mean_kw": panels.env_mean, "max_kw": panels.env_max}
    )
    hist = pd.DataFrame(
        {"bin_left_kw": panels.hist_edges[:-1], "bin_right_kw": panels.hist_edges[1:], "count": panels.hist_counts}
    )
    paths = [
        directory / f"{stem}_daily.csv",
        directory / f"{stem}_envelope.csv",
        directory / f"{stem}_histogram.csv",
    ]
    daily.to_csv(paths[0], lineterminator="\n")
    envelope.to_csv(paths[1], index=False, lineterminator="\n")
    hist.to_csv(paths[2], index=False, lineterminator="\n")
    return paths
