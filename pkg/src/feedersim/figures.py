"""Vector figures and their underlying tables for every report type.

Output is deterministic: SVG ids are salted with a fixed string and no
creation date is embedded, so two runs with the same seed give identical
files.
"""

from __future__ import annotations

import re
from functools import singledispatch
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.figure import Figure

from .profile_store import QUARTERS_PER_DAY, PanelData
from .sampler import ContributionReport, SamplingReport
from .timing import FeederEnvelope, PeakTimeDistribution, weather_overlay
from .weather import WeatherSeries

_RC = {"svg.hashsalt": "feedersim", "svg.fonttype": "none", "font.size": 8}


def slug(text: str) -> str:
    """File-name-safe form of a subset name ("EV, high power" -> "ev_high_power")."""
    return re.sub(r"[^a-z0-9]+", "_", str(text).lower()).strip("_") or "none"


def file_stem(kind: str, subset: str | None, direction, n_connections=None, seed=None) -> str:
    parts = [kind, slug(subset or "all"), getattr(direction, "value", direction) or "any"]
    if n_connections is not None:
        parts.append(f"n{n_connections}")
    if seed is not None:
        parts.append(f"seed{seed}")
    return "_".join(str(p) for p in parts)


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def _new_figure(*size) -> Figure:
    with matplotlib.rc_context(_RC):
        return Figure(figsize=size or (7, 4), layout="constrained")


def _out(directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


@singledispatch
def export_figures(report, directory, **kwargs) -> list[Path]:
    """Write vector figures plus the delimited tables behind them.

    Returns the written paths. Supported inputs: SamplingReport,
    ContributionReport, PeakTimeDistribution, FeederEnvelope and PanelData.
    """
    raise TypeError(f"no figure export for {type(report).__name__}")


@export_figures.register
def _(report: SamplingReport, directory, **kwargs) -> list[Path]:
    out = _out(directory)
    paths = []
    seed = report.config.seed
    table = out / f"{file_stem('sampling', report.subset_name, 'both' if len(report.directions) == 2 else report.directions[0], seed=seed)}.csv"
    report.to_frame().to_csv(table, index=False, lineterminator="\n")
    paths.append(table)
    for direction in report.directions:
        rows = [report.get(n, direction) for n in report.connections]
        ns = np.array(report.connections)
        fig = _new_figure(8, 3.5)
        axes = fig.subplots(1, 2)
        for ax, attr, ylabel in (
            (axes[0], "peak_per_connection", "peak per connection (kW)"),
            (axes[1], "simultaneity", "simultaneity (-)"),
        ):
            stats = [getattr(r, attr) for r in rows]
            ok = np.array([s is not None for s in stats])
            if ok.any():
                pick = lambda f: np.array([getattr(s, f) for s in stats if s is not None])
                x = ns[ok]
                ax.fill_between(x, pick("min"), pick("max"), color="0.9", label="min-max")
                ax.fill_between(x, pick("p5"), pick("p95"), color="0.75", label="p5-p95")
                ax.fill_between(x, pick("p25"), pick("p75"), color="0.55", label="p25-p75")
                ax.plot(x, pick("median"), color="k", label="median")
                ax.plot(x, pick("mean"), color="C3", ls="--", label="mean")
            ax.set_xlabel("connections per feeder")
            ax.set_ylabel(ylabel)
        axes[1].legend(loc="upper right", frameon=False)
        fig.suptitle(f"{report.subset_name}, {direction.value}")
        paths.append(_save(fig, out / f"{file_stem('sampling', report.subset_name, direction, seed=seed)}.svg"))
    return paths


@export_figures.register
def _(report: ContributionReport, directory, **kwargs) -> list[Path]:
    out = _out(directory)
    df = report.to_frame()
    label = f"{report.subset_with}-vs-{report.subset_without}"
    seed = kwargs.get("seed")
    paths = [out / f"{file_stem('contribution', label, 'both', seed=seed)}.csv"]
    df.to_csv(paths[0], index=False, lineterminator="\n")
    for direction in sorted({r.direction for r in report.rows}, key=lambda d: d.value):
        rows = sorted((r for r in report.rows if r.direction is direction), key=lambda r: r.n_connections)
        fig = _new_figure(5, 3.5)
        ax = fig.subplots()
        ns = [r.n_connections for r in rows]
        for field in ("mean", "median", "p95"):
            ax.plot(ns, [r.peak_per_connection_delta[field] for r in rows], marker="o", label=field)
        ax.axhline(0.0, color="0.5", lw=0.5)
        ax.set_xlabel("connections per feeder")
        ax.set_ylabel("added peak per connection (kW)")
        ax.legend(frameon=False)
        fig.suptitle(f"{report.subset_with} vs {report.subset_without}, {direction.value}")
        paths.append(_save(fig, out / f"{file_stem('contribution', label, direction, seed=seed)}.svg"))
    return paths


@export_figures.register
def _(dist: PeakTimeDistribution, directory, weather: WeatherSeries | None = None, subset=None, seed=None, **kwargs):
    """Day-by-hour heat map of peak probability, and the day histogram with optional weather overlay."""
    out = _out(directory)
    stem = file_stem("peaktime", subset, dist.direction, dist.n_connections, seed)
    table = out / f"{stem}.csv"
    dist.to_frame().to_csv(table, lineterminator="\n")
    paths = [table]

    fig = _new_figure(8, 3.5)
    ax = fig.subplots()
    n_days = dist.hour_day_matrix.shape[0]
    mesh = ax.pcolormesh(
        np.arange(n_days + 1), np.arange(25), dist.hour_day_matrix.T, cmap="viridis", shading="flat", rasterized=False
    )
    fig.colorbar(mesh, ax=ax, label="share of feeder peaks")
    ax.set_xlabel("day of year")
    ax.set_ylabel("hour (local)")
    paths.append(_save(fig, out / f"{stem}_heatmap.svg"))

    fig = _new_figure(8, 3.5)
    ax = fig.subplots()
    ax.bar(np.arange(n_days), dist.day_histogram, width=1.0, color="C0")
    ax.set_xlabel("day of year")
    ax.set_ylabel("share of feeder peaks")
    if weather is not None:
        overlay = weather_overlay(dist, weather)
        overlay.to_csv(out / f"{stem}_weather.csv", index=False, lineterminator="\n")
        paths.append(out / f"{stem}_weather.csv")
        ax2 = ax.twinx()
        ax2.plot(overlay["day"], overlay["temperature_mean_c"], color="C3", lw=0.8)
        ax2.set_ylabel("daily mean temperature (°C)")
    paths.append(_save(fig, out / f"{stem}_days.svg"))
    return paths


@export_figures.register
def _(env: FeederEnvelope, directory, **kwargs) -> list[Path]:
    """Quantile bands over the day range. Daily peak probability is shown as
    bars, and each day's modal peak time is marked with a vertical tick.
    Raw ssrd (kW/m2) is drawn on its own axis without rescaling."""
    out = _out(directory)
    stem = file_stem("envelope", env.subset_name, env.direction, env.n_connections, env.seed)
    stem += f"_d{env.day_range[0]}-{env.day_range[1]}"
    paths = [out / f"{stem}.csv", out / f"{stem}_days.csv"]
    env.to_frame().to_csv(paths[0], index=False, lineterminator="\n")
    env.days_frame().to_csv(paths[1], index=False, lineterminator="\n")

    x = np.arange(len(env.bands["mean"])) / QUARTERS_PER_DAY + env.day_range[0]
    fig = _new_figure(9, 5)
    top, bottom = fig.subplots(2, 1, sharex=True, height_ratios=(3, 1))
    b = env.bands
    top.fill_between(x, b["min"], b["max"], color="0.9", label="min-max")
    top.fill_between(x, b["p5"], b["p95"], color="0.75", label="p5-p95")
    top.fill_between(x, b["p25"], b["p75"], color="0.55", label="p25-p75")
    top.plot(x, b["median"], color="k", lw=0.7, label="median")
    for day, q in zip(range(*env.day_range), env.modal_peak_quarter):
        if q >= 0:
            top.axvline(day + q / QUARTERS_PER_DAY, color="C3", lw=0.6)
    top.set_ylabel("feeder load (kW)")
    top.legend(loc="upper left", frameon=False, ncol=4)
    if env.temperature_c is not None:
        t_ax = top.twinx()
        t_ax.plot(x, env.temperature_c, color="C0", lw=0.6)
        t_ax.set_ylabel("temperature (°C)")
        s_ax = bottom.twinx()
        s_ax.plot(x, env.ssrd_kw_m2, color="C1", lw=0.6)
        s_ax.set_ylabel("ssrd (kW/m2)")
    bottom.bar(np.arange(*env.day_range) + 0.5, env.day_peak_probability, width=0.9, color="C2")
    bottom.set_ylabel("P(year peak)")
    bottom.set_xlabel("day of year")
    paths.append(_save(fig, out / f"{stem}.svg"))
    return paths


@export_figures.register
def _(panels: PanelData, directory, **kwargs) -> list[Path]:
    """Overlaid days with min/mean/max envelope, day-by-quarter heat map and power histogram."""
    from .profile_store import export_panels

    out = _out(directory)
    stem = f"profile_{slug(panels.profile_id)}"
    paths = export_panels(panels, out, stem)
    hours = (np.arange(QUARTERS_PER_DAY) + 0.5) / 4
    fig = _new_figure(10, 3.2)
    a, h, c = fig.subplots(1, 3)
    # one NaN-separated path instead of one line per day keeps the SVG small
    n_days = panels.daily.shape[0]
    xs = np.tile(np.append(hours, np.nan), n_days)
    ys = np.hstack([panels.daily, np.full((n_days, 1), np.nan)]).ravel()
    a.plot(xs, ys, color="0.6", lw=0.2, alpha=0.3)
    a.plot(hours, panels.env_min, color="C0", label="min")
    a.plot(hours, panels.env_mean, color="k", label="mean")
    a.plot(hours, panels.env_max, color="C3", label="max")
    a.set_xlabel("hour")
    a.set_ylabel("power (kW)")
    a.legend(frameon=False)
    lim = float(np.abs(panels.daily).max()) or 1.0
    mesh = h.pcolormesh(
        np.arange(panels.daily.shape[0] + 1), np.arange(QUARTERS_PER_DAY + 1) / 4, panels.daily.T,
        cmap="RdBu_r", vmin=-lim, vmax=lim, shading="flat",
    )
    fig.colorbar(mesh, ax=h, label="kW")
    h.set_xlabel("day of year")
    h.set_ylabel("hour")
    c.stairs(panels.hist_counts, panels.hist_edges, fill=True)
    c.set_xlabel("power (kW)")
    c.set_ylabel("quarter-hours")
    fig.suptitle(panels.profile_id)
    paths.append(_save(fig, out / f"{stem}.svg"))
    return paths


__all__ = ["export_figures", "file_stem", "slug"]
