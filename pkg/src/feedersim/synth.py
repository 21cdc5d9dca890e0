"""
Deterministic synthetic smart-meter profiles.

The generator builds each profile from additive components:

    net = base + heat pump(temperature) + EV(sessions) - PV(ssrd) [+ battery]

It is a test oracle with controllable ground truth (known HP power, EV
charger power and session energy, inverter cap), not a calibrated model of
any real population.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .profile_store import (
    DEFAULT_TIMEZONE,
    HOURS_PER_QUARTER,
    QUARTERS_PER_DAY,
    ProfileLabels,
    ProfileSet,
    days_in_year,
)
from .weather import WeatherSeries, expand_to_quarter_hours

COMPONENTS = ("base", "pv", "hp", "ev", "battery")


@dataclass(frozen=True)
class BaseLoadParams:
    mean_daily_kwh: float = 8.5
    household_sigma: float = 0.35  # lognormal spread of mean_daily_kwh across households
    morning_weight: float = 0.6
    evening_weight: float = 1.0
    seasonal_amplitude: float = 0.2  # relative winter excess, peaking mid-January
    day_sigma: float = 0.15
    spikes_per_day: float = 1.5
    spike_kw: float = 1.5  # mean height of short appliance events


@dataclass(frozen=True)
class PVParams:
    inverter_kva_mean: float = 5.0
    inverter_kva_sd: float = 1.8
    inverter_kva_min: float = 1.5
    undersizing_factor: float = 0.85  # inverter kVA per installed kWp
    ssrd_gain: float = 0.85  # kW per kWp at 1 kW/m2
    gain_sigma: float = 0.08  # per-installation orientation/shading spread
    daily_sigma: float = 0.1  # local cloud variation around the regional ssrd


@dataclass(frozen=True)
class HPParams:
    operating_power_kw: float = 2.5
    operating_power_sd: float = 0.5
    balance_temp_c: float = 15.0
    design_temp_c: float = -15.0
    morning_boost: float = 1.15
    modulation: bool = True
    modulation_period: int = 4  # quarter-hours per on/off cycle
    night_setback: bool = True


@dataclass(frozen=True)
class EVParams:
    charger_kw: tuple[float, ...] = (2.3, 3.7, 7.4, 11.0, 22.0)
    charger_probs: tuple[float, ...] = (0.15, 0.2, 0.15, 0.35, 0.15)
    sessions_per_week: float = 3.0
    n_sessions: int | None = None  # fixed yearly count; overrides sessions_per_week
    session_kwh_mean: float = 12.0
    session_kwh_sd: float = 4.0
    start_mode: str = "night_tariff"  # or "evening"
    night_start_hour: int = 22
    night_exact_share: float = 0.7  # sessions starting exactly at night_start_hour
    evening_window: tuple[int, int] = (16, 22)


@dataclass(frozen=True)
class BatteryParams:
    power_kw: float = 3.0
    timed_hours: tuple[int, ...] = (12, 22)
    timed_quarters: int = 2
    summer_months: tuple[int, int] = (4, 9)


@dataclass(frozen=True)
class GroupSpec:
    """A block of profiles sharing technology labels."""

    count: int
    has_hp: bool = False
    has_ev: bool = False
    pv_share: float = 0.75
    battery_share: float = 0.0


DEFAULT_GROUPS = (
    GroupSpec(1200, pv_share=0.75),
    GroupSpec(300, has_hp=True, pv_share=0.94),
    GroupSpec(450, has_ev=True, pv_share=0.86),
    GroupSpec(50, has_hp=True, has_ev=True, pv_share=0.9),
)


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    year: int = 2022
    timezone: str = DEFAULT_TIMEZONE
    groups: tuple[GroupSpec, ...] = DEFAULT_GROUPS
    base: BaseLoadParams = field(default_factory=BaseLoadParams)
    pv: PVParams = field(default_factory=PVParams)
    hp: HPParams = field(default_factory=HPParams)
    ev: EVParams = field(default_factory=EVParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    connection_kva_mean: float = 14.6
    connection_kva_sd: float = 5.0
    connection_kva_lct_extra: float = 5.0

    def __post_init__(self):
        validate_config(self)

    @property
    def n_profiles(self) -> int:
        return sum(g.count for g in self.groups)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        return _build(cls, data)

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path

    @classmethod
    def from_json(cls, path: str | Path) -> "GeneratorConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


_NESTED = {
    "base": BaseLoadParams,
    "pv": PVParams,
    "hp": HPParams,
    "ev": EVParams,
    "battery": BatteryParams,
}


def _build(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is GeneratorConfig and key in _NESTED and isinstance(value, dict):
            value = _build(_NESTED[key], value)
        elif cls is GeneratorConfig and key == "groups":
            value = tuple(_build(GroupSpec, g) if isinstance(g, dict) else g for g in value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def validate_config(cfg: GeneratorConfig) -> None:
    """Raise ValueError unless every power/energy is non-negative and
    probability masses sum to one."""

    def nonneg(obj):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, bool) or v is None or isinstance(v, str):
                continue
            vals = v if isinstance(v, tuple) else (v,)
            for x in vals:
                if isinstance(x, (int, float)) and x < 0 and f.name not in ("design_temp_c", "balance_temp_c"):
                    raise ValueError(f"{type(obj).__name__}.{f.name} must be non-negative")

    for part in (cfg.base, cfg.pv, cfg.hp, cfg.ev, cfg.battery):
        nonneg(part)
    for g in cfg.groups:
        nonneg(g)
        if not 0 <= g.pv_share <= 1 or not 0 <= g.battery_share <= 1:
            raise ValueError("group shares must lie in [0, 1]")
    if len(cfg.ev.charger_kw) != len(cfg.ev.charger_probs) or not cfg.ev.charger_kw:
        raise ValueError("charger_kw and charger_probs must have equal, non-zero length")
    if abs(sum(cfg.ev.charger_probs) - 1.0) > 1e-9:
        raise ValueError("charger_probs must sum to 1")
    if cfg.ev.start_mode not in ("night_tariff", "evening"):
        raise ValueError("ev.start_mode must be 'night_tariff' or 'evening'")
    if not 0 <= cfg.ev.night_exact_share <= 1:
        raise ValueError("ev.night_exact_share must lie in [0, 1]")
    if cfg.pv.undersizing_factor <= 0:
        raise ValueError("pv.undersizing_factor must be positive")
    if cfg.hp.design_temp_c >= cfg.hp.balance_temp_c:
        raise ValueError("hp.design_temp_c must be below hp.balance_temp_c")
    if cfg.hp.modulation_period < 1:
        raise ValueError("hp.modulation_period must be >= 1")


# --------------------------------------------------------------------------
# Synthetic weather
# --------------------------------------------------------------------------


def clear_sky_ssrd(year: int, latitude_deg: float = 51.0, solar_noon_hour: float = 13.0) -> np.ndarray:
    """Rough hourly clear-sky irradiance (kW/m2), zero when the sun is down."""
    n_days = days_in_year(year)
    day = np.repeat(np.arange(n_days), 24)
    hour = np.tile(np.arange(24) + 0.5, n_days)
    decl = np.radians(23.44) * np.sin(2 * np.pi * (284 + day + 1) / 365.0)
    omega = np.radians(15.0 * (hour - solar_noon_hour))
    lat = np.radians(latitude_deg)
    sin_el = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(omega)
    return 0.95 * np.clip(sin_el, 0.0, None) ** 1.15


@dataclass(frozen=True)
class ColdSpell:
    start_day: int
    n_days: int
    min_temp_c: float  # daily mean reached on the last day


def synthetic_weather(
    year: int = 2022,
    seed: int = 0,
    mean_temp_c: float = 10.5,
    annual_amplitude_c: float = 7.0,
    diurnal_amplitude_c: float = 3.5,
    anomaly_sd_c: float = 2.5,
    cold_spells: Sequence[ColdSpell] = (ColdSpell(343, 6, -7.0),),
    latitude_deg: float = 51.0,
) -> WeatherSeries:
    """Sinusoidal climate with AR(1) daily anomalies, cloudiness and optional cold spells.

    Cold-spell days grow colder until the last day and have clear skies.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x57,)))
    n_days = days_in_year(year)
    d = np.arange(n_days)
    seasonal = mean_temp_c - annual_amplitude_c * np.cos(2 * np.pi * (d - 15) / n_days)
    anomaly = np.empty(n_days)
    a = 0.0
    for k in range(n_days):
        a = 0.75 * a + rng.normal(0.0, anomaly_sd_c * np.sqrt(1 - 0.75**2))
        anomaly[k] = a
    daily_mean = seasonal + anomaly
    cloud = rng.beta(2.0, 1.2, n_days) * 0.75 + 0.25
    for spell in cold_spells:
        days = np.arange(spell.start_day, min(spell.start_day + spell.n_days, n_days))
        if days.size:
            ramp = np.linspace(min(daily_mean[days[0]], 0.0), spell.min_temp_c, days.size)
            daily_mean[days] = ramp
            cloud[days] = 0.95
    hours = np.arange(24)
    diurnal = -diurnal_amplitude_c * np.cos(2 * np.pi * (hours - 4.5) / 24)
    temp = (daily_mean[:, None] + diurnal[None, :]).ravel()
    ssrd = clear_sky_ssrd(year, latitude_deg) * np.repeat(cloud, 24)
    return WeatherSeries(temp, ssrd, year)


# --------------------------------------------------------------------------
# Components
# --------------------------------------------------------------------------


def _base_template(morning_weight: float, evening_weight: float) -> np.ndarray:
    h = (np.arange(QUARTERS_PER_DAY) + 0.5) / 4.0
    shape = (
        0.3
        + 0.25 * np.exp(-0.5 * ((h - 13.0) / 3.0) ** 2)
        + morning_weight * np.exp(-0.5 * ((h - 7.5) / 1.0) ** 2)
        + evening_weight * np.exp(-0.5 * ((h - 19.0) / 1.5) ** 2)
    )
    return shape / shape.sum()


def _base(params: BaseLoadParams, n_days: int, rng: np.random.Generator) -> np.ndarray:
    if params.mean_daily_kwh == 0 and params.spikes_per_day == 0:
        return np.zeros(n_days * QUARTERS_PER_DAY)
    template = np.roll(_base_template(params.morning_weight, params.evening_weight), int(rng.integers(-4, 5)))
    household = params.mean_daily_kwh * rng.lognormal(-0.5 * params.household_sigma**2, params.household_sigma)
    d = np.arange(n_days)
    season = 1.0 + params.seasonal_amplitude * np.cos(2 * np.pi * (d - 15) / n_days)
    daily_kwh = household * season * rng.lognormal(-0.5 * params.day_sigma**2, params.day_sigma, n_days)
    power = (daily_kwh[:, None] * template[None, :] / HOURS_PER_QUARTER).ravel()
    power *= rng.gamma(8.0, 1.0 / 8.0, power.size)
    n_spikes = rng.poisson(params.spikes_per_day * n_days)
    if n_spikes and params.spike_kw > 0:
        where = rng.choice(power.size, n_spikes, p=np.tile(template, n_days) / n_days)
        heights = rng.uniform(0.5, 1.5, n_spikes) * params.spike_kw
        np.add.at(power, where, heights)
    return power


def pv_inverter_kva(params: PVParams, rng: np.random.Generator) -> float:
    return float(max(params.inverter_kva_min, rng.normal(params.inverter_kva_mean, params.inverter_kva_sd)))


def _pv(params: PVParams, inverter_kva: float, ssrd_hourly: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Negative PV injection, capped at the inverter rating (kVA taken as kW)."""
    kwp = inverter_kva / params.undersizing_factor
    gain = params.ssrd_gain * rng.lognormal(0.0, params.gain_sigma)
    n_days = ssrd_hourly.size // 24
    local = np.clip(rng.normal(1.0, params.daily_sigma, n_days), 0.3, 1.3)
    dc = gain * kwp * expand_to_quarter_hours(ssrd_hourly) * np.repeat(local, QUARTERS_PER_DAY)
    return -np.minimum(dc, inverter_kva)


def _hp(params: HPParams, power_kw: float, temp_hourly: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    temp = expand_to_quarter_hours(temp_hourly)
    load = np.clip((params.balance_temp_c - temp) / (params.balance_temp_c - params.design_temp_c), 0.0, 1.0)
    if params.night_setback:
        hour = np.tile(np.arange(QUARTERS_PER_DAY) // 4, temp.size // QUARTERS_PER_DAY)
        night = (hour >= 23) | (hour < 5)
        morning = (hour >= 5) & (hour < 9)
        load = np.where(night, 0.7 * load, load)
        load = np.where(morning, np.minimum(1.0, params.morning_boost * load), load)
    if not params.modulation:
        return power_kw * load
    m = params.modulation_period
    phase = int(rng.integers(0, m))
    pos = (np.arange(temp.size) + phase) % m
    # on for the first round(load * m) quarter-hours of every cycle
    return np.where(pos < np.rint(load * m), power_kw, 0.0)


@dataclass(frozen=True)
class EVSession:
    start: int  # quarter-hour index
    charger_kw: float
    energy_kwh: float

    @property
    def full_quarters(self) -> int:
        return int(np.floor(self.energy_kwh / (self.charger_kw * HOURS_PER_QUARTER) + 1e-12))

    @property
    def n_quarters(self) -> int:
        rest = self.energy_kwh - self.full_quarters * self.charger_kw * HOURS_PER_QUARTER
        return self.full_quarters + (1 if rest > 1e-12 else 0)


def ev_sessions(
    params: EVParams, n_days: int, rng: np.random.Generator, charger_kw: float | None = None
) -> list[EVSession]:
    """Non-overlapping charging sessions over the year for one EV."""
    if charger_kw is None:
        charger_kw = float(rng.choice(np.asarray(params.charger_kw), p=np.asarray(params.charger_probs)))
    if charger_kw <= 0:
        return []
    energy = float(max(1.0, rng.normal(params.session_kwh_mean, params.session_kwh_sd)))
    energy = min(energy, charger_kw * 20.0)  # keep any session under a day
    count = params.n_sessions if params.n_sessions is not None else rng.poisson(params.sessions_per_week * n_days / 7)
    count = int(min(count, n_days - 1))
    if count == 0 or params.session_kwh_mean == 0:
        return []
    days = np.sort(rng.choice(n_days - 1, count, replace=False))
    if params.start_mode == "night_tariff":
        exact = rng.random(count) < params.night_exact_share
        jitter = rng.integers(-4, 8, count)
        start_q = params.night_start_hour * 4 + np.where(exact, 0, jitter)
    else:
        lo, hi = params.evening_window
        start_q = rng.integers(lo * 4, hi * 4, count)
    sessions: list[EVSession] = []
    end = 0
    n_q = n_days * QUARTERS_PER_DAY
    for day, q in zip(days, start_q):
        start = max(int(day * QUARTERS_PER_DAY + q), end)
        s = EVSession(start, charger_kw, energy)
        if start + s.n_quarters > n_q:
            break
        sessions.append(s)
        end = start + s.n_quarters
    return sessions


def _ev_power(sessions: Sequence[EVSession], n_q: int) -> np.ndarray:
    power = np.zeros(n_q)
    for s in sessions:
        power[s.start : s.start + s.full_quarters] = s.charger_kw
        rest = s.energy_kwh - s.full_quarters * s.charger_kw * HOURS_PER_QUARTER
        if rest > 1e-12:
            power[s.start + s.full_quarters] = rest / HOURS_PER_QUARTER
    return power


def _battery(params: BatteryParams, net: np.ndarray, year: int) -> np.ndarray:
    """Covers summer offtake from storage and adds timed grid-charging blocks."""
    n_days = net.size // QUARTERS_PER_DAY
    months = np.repeat(pd.date_range(f"{year}-01-01", periods=n_days, freq="D").month.to_numpy(), QUARTERS_PER_DAY)
    summer = (months >= params.summer_months[0]) & (months <= params.summer_months[1])
    out = np.where(summer & (net > 0), -np.minimum(net, params.power_kw), 0.0)
    quarter = np.tile(np.arange(QUARTERS_PER_DAY), n_days)
    for h in params.timed_hours:
        timed = (quarter >= h * 4) & (quarter < h * 4 + params.timed_quarters)
        out = out + np.where(timed, params.power_kw, 0.0)
    return out


def generate_component(
    kind: str,
    params,
    weather: WeatherSeries,
    rng: np.random.Generator,
    **kwargs,
) -> np.ndarray:
    """One additive component (kW per quarter-hour) for a single profile.

    Extra keyword arguments: ``inverter_kva`` (pv), ``power_kw`` (hp),
    ``charger_kw`` (ev) and ``net`` (battery: the other components summed).
    """
    n_days = weather.n_days
    if kind == "base":
        return _base(params, n_days, rng)
    if kind == "pv":
        kva = kwargs.get("inverter_kva")
        return _pv(params, pv_inverter_kva(params, rng) if kva is None else kva, weather.ssrd_kw_m2, rng)
    if kind == "hp":
        return _hp(params, kwargs.get("power_kw", params.operating_power_kw), weather.temperature_c, rng)
    if kind == "ev":
        return _ev_power(ev_sessions(params, n_days, rng, kwargs.get("charger_kw")), n_days * QUARTERS_PER_DAY)
    if kind == "battery":
        return _battery(params, kwargs["net"], weather.year)
    raise ValueError(f"unknown component {kind!r}; expected one of {COMPONENTS}")


def _streams(seed: int, index: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed, spawn_key=(index,)).spawn(len(COMPONENTS) + 1)
    gens = [np.random.Generator(np.random.PCG64(c)) for c in children]
    return dict(zip(("labels",) + COMPONENTS, gens))


def generate_profile(cfg: GeneratorConfig, group: GroupSpec, index: int, weather: WeatherSeries):
    """Power and labels of profile ``index`` (its random streams depend only on seed and index)."""
    rng = _streams(cfg.seed, index)
    lab_rng = rng["labels"]
    has_pv = bool(lab_rng.random() < group.pv_share)
    has_battery = bool(lab_rng.random() < group.battery_share)
    inverter = pv_inverter_kva(cfg.pv, lab_rng) if has_pv else None
    hp_power = (
        float(max(0.5, lab_rng.normal(cfg.hp.operating_power_kw, cfg.hp.operating_power_sd)))
        if cfg.hp.operating_power_sd > 0
        else cfg.hp.operating_power_kw
    )
    conn = cfg.connection_kva_mean + (cfg.connection_kva_lct_extra if group.has_hp or group.has_ev else 0.0)
    conn = float(max(5.0, lab_rng.normal(conn, cfg.connection_kva_sd)))

    net = generate_component("base", cfg.base, weather, rng["base"])
    if group.has_hp:
        net = net + generate_component("hp", cfg.hp, weather, rng["hp"], power_kw=hp_power)
    if group.has_ev:
        net = net + generate_component("ev", cfg.ev, weather, rng["ev"])
    if has_pv:
        net = net + generate_component("pv", cfg.pv, weather, rng["pv"], inverter_kva=inverter)
    if has_battery:
        net = net + generate_component("battery", cfg.battery, weather, rng["battery"], net=net)
    labels = ProfileLabels(
        has_hp=group.has_hp,
        has_ev=group.has_ev,
        pv_inverter_kva=inverter,
        connection_power_kva=conn,
    )
    return net, labels


def generate_population(cfg: GeneratorConfig, weather: WeatherSeries) -> ProfileSet:
    """Labelled ProfileSet, fully determined by ``cfg.seed``."""
    if weather.year != cfg.year:
        raise ValueError(f"weather year {weather.year} does not match generator year {cfg.year}")
    n_q = days_in_year(cfg.year) * QUARTERS_PER_DAY
    matrix = np.empty((cfg.n_profiles, n_q))
    ids, labels = [], []
    i = 0
    for group in cfg.groups:
        for _ in range(group.count):
            matrix[i], lab = generate_profile(cfg, group, i, weather)
            ids.append(f"syn{i:05d}")
            labels.append(lab)
            i += 1
    return ProfileSet.from_matrix(ids, matrix, labels, cfg.year, cfg.timezone, copy=False)


def tiny_config(seed: int = 0) -> GeneratorConfig:
    """Six profiles: two plain, two with HP, two with EV."""
    return GeneratorConfig(
        seed=seed,
        groups=(
            GroupSpec(2, pv_share=0.5),
            GroupSpec(2, has_hp=True, pv_share=1.0),
            GroupSpec(2, has_ev=True, pv_share=0.5),
        ),
    )


def shifted_population(profiles: ProfileSet, shift_kw: float = 1.0, prefix: str = "shift-") -> ProfileSet:
    """Copy of ``profiles`` with a constant ``shift_kw`` added to every quarter-hour."""
    return ProfileSet.from_matrix(
        [prefix + pid for pid in profiles.ids],
        profiles.power + shift_kw,
        profiles.labels,
        profiles.year,
        profiles.timezone,
        copy=False,
    )
