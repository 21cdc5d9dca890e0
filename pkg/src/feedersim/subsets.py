"""
Profile populations (no HP/no EV, HP, EV, EV high power) and their
descriptive statistics.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .profile_store import (
    Direction,
    Profile,
    ProfileSet,
    aligned_histogram,
    profile_peak,
    yearly_consumption,
)

EV_HIGH_POWER_THRESHOLD_KW = 6.5


class EmptySubsetWarning(UserWarning):
    pass


def ev_max_charge_kw(p: Profile) -> float:
    """Maximum EV charging power: the label when given, otherwise the yearly maximum net power."""
    if p.labels.ev_max_charge_kw is not None:
        return float(p.labels.ev_max_charge_kw)
    return float(np.max(p.power))


def classify_ev_high_power(p: Profile, threshold_kw: float = EV_HIGH_POWER_THRESHOLD_KW) -> bool:
    if not p.labels.has_ev:
        raise ValueError(f"profile {p.id!r} has no EV label")
    return ev_max_charge_kw(p) > threshold_kw


@dataclass(frozen=True)
class SubsetSpec:
    name: str
    predicate: Callable[[Profile], bool]

    def __call__(self, p: Profile) -> bool:
        return bool(self.predicate(p))


NO_HP_NO_EV = SubsetSpec("no HP, no EV", lambda p: not p.labels.has_hp and not p.labels.has_ev)
HP = SubsetSpec("HP", lambda p: p.labels.has_hp)
EV = SubsetSpec("EV", lambda p: p.labels.has_ev)
EV_HIGH_POWER = SubsetSpec("EV, high power", lambda p: p.labels.has_ev and classify_ev_high_power(p))
ALL = SubsetSpec("all", lambda p: True)

BUILTIN_SUBSETS = {
    "no_hp_no_ev": NO_HP_NO_EV,
    "hp": HP,
    "ev": EV,
    "ev_high_power": EV_HIGH_POWER,
    "all": ALL,
}


def get_subset(name: str | SubsetSpec) -> SubsetSpec:
    """Look up a built-in subset by key ("hp", "ev_high_power", ...) or display name."""
    if isinstance(name, SubsetSpec):
        return name
    key = name.strip().lower().replace(",", "").replace(" ", "_").replace("-", "_")
    if key in BUILTIN_SUBSETS:
        return BUILTIN_SUBSETS[key]
    for spec in BUILTIN_SUBSETS.values():
        if spec.name.lower() == name.strip().lower():
            return spec
    raise KeyError(f"unknown subset {name!r}; choose from {', '.join(BUILTIN_SUBSETS)}")


def apply_subset(profiles: ProfileSet, spec: SubsetSpec | str) -> ProfileSet:
    """Profiles satisfying ``spec``. Warns with EmptySubsetWarning when none do."""
    spec = get_subset(spec)
    keep = [i for i, p in enumerate(profiles) if spec(p)]
    if not keep:
        warnings.warn(f"subset {spec.name!r} is empty", EmptySubsetWarning, stacklevel=2)
    return profiles.take(keep)


@dataclass(frozen=True)
class SubsetSummary:
    name: str
    count: int
    pct_pv: float
    pv_kva_mean: float | None
    pv_kva_sd: float | None
    connection_power_mean: float | None
    connection_power_sd: float | None
    consumption_mean: float
    consumption_sd: float


def _mean_sd(values: Sequence[float]) -> tuple[float | None, float | None]:
    if len(values) == 0:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def summarize(profiles: ProfileSet, name: str = "") -> SubsetSummary:
    """Count, PV ownership and mean/population-sd of PV kVA (owners only),
    connection power and yearly net consumption."""
    if len(profiles) == 0:
        raise ValueError("cannot summarize an empty profile set")
    labels = profiles.labels
    pv = [lab.pv_inverter_kva for lab in labels if lab.has_pv]
    conn = [lab.connection_power_kva for lab in labels if lab.connection_power_kva is not None]
    consumption = yearly_consumptions(profiles)
    pv_mean, pv_sd = _mean_sd(pv)
    conn_mean, conn_sd = _mean_sd(conn)
    return SubsetSummary(
        name=name,
        count=len(profiles),
        pct_pv=100.0 * len(pv) / len(profiles),
        pv_kva_mean=pv_mean,
        pv_kva_sd=pv_sd,
        connection_power_mean=conn_mean,
        connection_power_sd=conn_sd,
        consumption_mean=float(consumption.mean()),
        consumption_sd=float(consumption.std(ddof=0)),
    )


def _cell(mean: float | None, sd: float | None, digits: int) -> str:
    if mean is None:
        return ""
    return f"{mean:.{digits}f} ({sd:.{digits}f})"


def summary_table(summaries: Sequence[SubsetSummary], path: str | Path | None = None, delimiter: str = ",") -> str:
    """Delimited table with one column per subset and the rows Number, % PV,
    PV (kVA), Conn. power (kVA), Consumption (kWh)."""
    rows = [
        ["", *(s.name for s in summaries)],
        ["Number", *(str(s.count) for s in summaries)],
        ["% PV", *(f"{s.pct_pv:.0f}" for s in summaries)],
        ["PV (kVA)", *(_cell(s.pv_kva_mean, s.pv_kva_sd, 1) for s in summaries)],
        ["Conn. power (kVA)", *(_cell(s.connection_power_mean, s.connection_power_sd, 1) for s in summaries)],
        ["Consumption (kWh)", *(_cell(s.consumption_mean, s.consumption_sd, 0) for s in summaries)],
    ]
    buf = io.StringIO()
    csv.writer(buf, delimiter=delimiter, lineterminator="\n").writerows(rows)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def peak_histogram(
    profiles: ProfileSet, direction: Direction | str = Direction.OFFTAKE, bin_width: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram ``(counts, edges)`` of the per-profile yearly peaks."""
    if len(profiles) == 0:
        raise ValueError("empty profile set")
    peaks = np.array([profile_peak(row, direction)[0] for row in profiles.power])
    return aligned_histogram(peaks, bin_width)


def individual_peaks(profiles: ProfileSet, direction: Direction | str = Direction.OFFTAKE) -> np.ndarray:
    if Direction.parse(direction) is Direction.OFFTAKE:
        return profiles.power.max(axis=1)
    return profiles.power.min(axis=1)


def yearly_consumptions(profiles: ProfileSet) -> np.ndarray:
    return np.array([yearly_consumption(row) for row in profiles.power])
