"""Command-line entry point: ingest, summarize, sample, contribution, timing, synth.

Every command writes into ``--out`` and leaves a ``manifest.json`` there
recording the resolved configuration, its hash, the seed, digests of all
inputs and outputs, the tool version and start/finish times.

Exit codes: 0 on success, 1 for data errors, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from datetime import datetime, timezone as dt_timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .profile_store import (
    DEFAULT_TIMEZONE,
    DEFAULT_YEAR,
    Direction,
    IngestConfig,
    IngestError,
    ProfileSet,
    export_labels,
    export_panels,
    ingest_profiles,
    profile_panels,
    read_labels,
)
from .sampler import DEFAULT_CONNECTIONS, DEFAULT_N_SAMPLES, SamplingConfig, SamplingReport, lct_contribution, run_sampling
from .subsets import BUILTIN_SUBSETS, EmptySubsetWarning, apply_subset, get_subset, peak_histogram, summarize, summary_table
from .synth import GeneratorConfig, generate_population, synthetic_weather
from .timing import feeder_envelope, peak_time_distribution, weather_overlay
from .weather import WeatherError, WeatherSeries, export_weather, ingest_weather

log = logging.getLogger("feedersim")

STORE_FILES = ("power.npy", "labels.csv", "meta.json")


class DataError(Exception):
    """Problem with input data (exit code 1)."""


# --------------------------------------------------------------------------
# Store directory
# --------------------------------------------------------------------------


def save_store(profiles: ProfileSet, directory: str | Path, weather: WeatherSeries | None = None) -> list[Path]:
    """Write a profile store: ``power.npy``, ``labels.csv``, ``meta.json`` and optionally ``weather.csv``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    np.save(d / "power.npy", np.ascontiguousarray(profiles.power), allow_pickle=False)
    export_labels(profiles, d / "labels.csv")
    meta = {
        "ids": list(profiles.ids),
        "year": profiles.year,
        "timezone": profiles.timezone,
        "diagnostics": [str(x) for x in profiles.diagnostics],
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    paths = [d / name for name in STORE_FILES]
    if weather is not None:
        paths.append(export_weather(weather, d / "weather.csv"))
    return paths


def load_store(directory: str | Path) -> tuple[ProfileSet, WeatherSeries | None]:
    d = Path(directory)
    for name in STORE_FILES:
        if not (d / name).exists():
            raise DataError(f"{d} is not a profile store: {name} missing")
    meta = json.loads((d / "meta.json").read_text())
    power = np.load(d / "power.npy", allow_pickle=False)
    labels = read_labels(d / "labels.csv")
    try:
        labs = [labels[pid] for pid in meta["ids"]]
    except KeyError as exc:
        raise DataError(f"{d}: no labels for profile {exc.args[0]!r}") from None
    profiles = ProfileSet.from_matrix(meta["ids"], power, labs, meta["year"], meta["timezone"], copy=False)
    weather = ingest_weather(d / "weather.csv", meta["year"]) if (d / "weather.csv").exists() else None
    return profiles, weather


def _load_profiles(args) -> tuple[ProfileSet, WeatherSeries | None, list[Path]]:
    """Profiles from a store directory or a delimited file, plus weather and the input paths."""
    src = Path(args.profiles)
    if not src.exists():
        raise DataError(f"{src} does not exist")
    if src.is_dir():
        profiles, weather = load_store(src)
        inputs = [src / n for n in STORE_FILES] + ([src / "weather.csv"] if weather is not None else [])
    else:
        cfg = IngestConfig(year=args.year, timezone=args.timezone)
        profiles = ingest_profiles(src, cfg, args.labels)
        weather = None
        inputs = [src] + ([Path(args.labels)] if args.labels else [])
    if getattr(args, "weather", None):
        weather = ingest_weather(args.weather, profiles.year)
        inputs.append(Path(args.weather))
    return profiles, weather, inputs


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _now() -> str:
    return datetime.now(dt_timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, command: str, config: dict, inputs, outputs, started: str) -> Path:
    """Record what produced ``out``. Thread count is left out of the hash since results do not depend on it."""
    out_paths = sorted({Path(p) for p in outputs if Path(p).name != "manifest.json"})
    manifest = {
        "tool": "feedersim",
        "version": __version__,
        "command": command,
        "config": config,
        "config_hash": config_hash({"command": command, **config}),
        "seed": config.get("seed"),
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": {str(p.relative_to(out)): file_digest(p) for p in out_paths},
        "started_at": started,
        "finished_at": _now(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _subset_or_all(name: str | None):
    return get_subset(name) if name else None


def cmd_ingest(args) -> tuple[dict, list[Path], list[Path]]:
    cfg = IngestConfig(year=args.year, timezone=args.timezone, max_gap=args.max_gap, delimiter=args.delimiter)
    profiles = ingest_profiles(args.profiles, cfg, args.labels)
    weather = ingest_weather(args.weather, args.year) if args.weather else None
    for diag in profiles.diagnostics:
        log.warning("%s", diag)
    if len(profiles) == 0:
        raise DataError(f"no usable profiles in {args.profiles} ({len(profiles.diagnostics)} diagnostics above)")
    outputs = save_store(profiles, args.out, weather)
    inputs = [Path(p) for p in (args.profiles, args.labels, args.weather) if p]
    config = {"year": args.year, "timezone": args.timezone, "max_gap": args.max_gap, "delimiter": args.delimiter}
    print(f"stored {len(profiles)} profiles in {args.out} ({len(profiles.diagnostics)} diagnostics)")
    return config, inputs, outputs


def cmd_summarize(args):
    profiles, _, inputs = _load_profiles(args)
    out = Path(args.out)
    names = args.subset or ["no_hp_no_ev", "hp", "ev", "ev_high_power"]
    summaries, outputs = [], []
    for name in names:
        spec = get_subset(name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySubsetWarning)
            part = apply_subset(profiles, spec)
        if len(part) == 0:
            log.warning("subset %r is empty, skipped", spec.name)
            continue
        summaries.append(summarize(part, spec.name))
        for direction in (Direction.OFFTAKE, Direction.INJECTION):
            counts, edges = peak_histogram(part, direction)
            path = out / f"peak_histogram_{_slug(spec.name)}_{direction.value}.csv"
            _write_histogram(path, counts, edges)
            outputs.append(path)
    text = summary_table(summaries, out / "summary.csv")
    outputs.append(out / "summary.csv")
    if args.panels:
        for pid in args.panels:
            if pid not in profiles:
                raise DataError(f"unknown profile id {pid!r}")
            panels = profile_panels(profiles[pid])
            if args.format in ("figures", "both"):
                outputs += _figures(panels, out / "panels")
            else:
                outputs += export_panels(panels, out / "panels")
    print(text, end="")
    return {"subsets": [get_subset(n).name for n in names], "panels": args.panels or []}, inputs, outputs


def _write_histogram(path: Path, counts, edges):
    with open(path, "w") as fh:
        fh.write("bin_left_kw,bin_right_kw,count\n")
        for lo, hi, c in zip(edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()):
            fh.write(f"{lo!r},{hi!r},{c}\n")


def _slug(text: str) -> str:
    from .figures import slug

    return slug(text)


def _figures(report, directory, **kwargs) -> list[Path]:
    from .figures import export_figures

    return export_figures(report, directory, **kwargs)


def _sampling_config(args, subset=None) -> SamplingConfig:
    return SamplingConfig(
        n_connections=tuple(args.connections),
        n_samples=args.samples,
        seed=args.seed,
        direction=args.direction,
        subset=subset,
    )


def _write_report(report: SamplingReport, out: Path, fmt: str, stem: str = "report") -> list[Path]:
    outputs = [report.write_json(out / f"{stem}.json")]
    outputs += report.write_samples(out / f"{stem}_samples")
    if fmt in ("table", "both"):
        path = out / f"{stem}_table.csv"
        report.to_frame().to_csv(path, index=False, lineterminator="\n")
        outputs.append(path)
    if fmt in ("figures", "both"):
        outputs += _figures(report, out / "figures")
    return outputs


def cmd_sample(args):
    profiles, _, inputs = _load_profiles(args)
    spec = _subset_or_all(args.subset)
    config = _sampling_config(args, spec)
    report = run_sampling(profiles, config, threads=args.threads)
    out = Path(args.out)
    outputs = _write_report(report, out, args.format)
    print(report.to_frame().to_string(index=False))
    return config.to_dict(), inputs, outputs


def cmd_contribution(args):
    profiles, _, inputs = _load_profiles(args)
    if args.baseline:
        if not Path(args.baseline).is_dir():
            raise DataError(f"--baseline must be a store directory: {args.baseline}")
        baseline, _ = load_store(args.baseline)
        inputs += [Path(args.baseline) / n for n in STORE_FILES]
    else:
        baseline = profiles
    with_spec, without_spec = get_subset(args.subset_with), get_subset(args.subset_without)
    out = Path(args.out)
    cfg_with = _sampling_config(args, with_spec)
    cfg_without = _sampling_config(args, without_spec)
    rep_with = run_sampling(profiles, cfg_with, threads=args.threads)
    rep_without = run_sampling(baseline, cfg_without, threads=args.threads)
    contrib = lct_contribution(rep_with, rep_without)
    outputs = _write_report(rep_with, out, "table", "with")
    outputs += _write_report(rep_without, out, "table", "without")
    path = out / "contribution.csv"
    contrib.to_frame().to_csv(path, index=False, lineterminator="\n")
    outputs.append(path)
    if args.format in ("figures", "both"):
        outputs += _figures(contrib, out / "figures", seed=args.seed)
    print(contrib.to_frame().to_string(index=False))
    config = {
        "with": cfg_with.to_dict(),
        "without": cfg_without.to_dict(),
        "baseline_store": bool(args.baseline),
    }
    return {**config, "seed": args.seed}, inputs, outputs


def _parse_days(text: str, n_days: int) -> tuple[int, int]:
    """``"340:347"`` -> (340, 347), 0-based and end-exclusive."""
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise DataError(f"--days must look like START:END, got {text!r}") from None
    if not 0 <= a < b <= n_days:
        raise DataError(f"--days {text} outside 0:{n_days}")
    return a, b


def cmd_timing(args):
    profiles, weather, inputs = _load_profiles(args)
    out = Path(args.out)
    outputs = []
    if args.report:
        # reuse the sample tables of an earlier `sample` run
        report_path = Path(args.report)
        report = SamplingReport.from_json(report_path / "report.json", report_path / "report_samples")
        inputs.append(report_path / "report.json")
        config = report.config
        if report.year != profiles.year:
            raise DataError(f"report is for {report.year}, profiles for {profiles.year}")
    else:
        config = _sampling_config(args, _subset_or_all(args.subset))
        report = run_sampling(profiles, config, threads=args.threads)
    subset_name = report.subset_name
    for r in report.results:
        dist = peak_time_distribution(r.samples, profiles.year, profiles.timezone)
        if args.format in ("figures", "both"):
            outputs += _figures(dist, out / "figures", weather=weather, subset=subset_name, seed=config.seed)
        if args.format in ("table", "both"):
            stem = f"peaktime_{r.direction.value}_n{r.n_connections}"
            path = out / f"{stem}.csv"
            dist.to_frame().to_csv(path, lineterminator="\n")
            outputs.append(path)
            if weather is not None:
                path = out / f"{stem}_weather.csv"
                weather_overlay(dist, weather).to_csv(path, index=False, lineterminator="\n")
                outputs.append(path)
    if args.days:
        day_range = _parse_days(args.days, profiles.n_days)
        for n in config.n_connections:
            for direction in config.directions:
                env_cfg = SamplingConfig(n, config.n_samples, config.seed, direction.value, config.subset)
                env = feeder_envelope(profiles, env_cfg, day_range, weather, threads=args.threads)
                if args.format in ("figures", "both"):
                    outputs += _figures(env, out / "figures")
                if args.format in ("table", "both"):
                    stem = f"envelope_{direction.value}_n{n}_d{day_range[0]}-{day_range[1]}"
                    env.to_frame().to_csv(out / f"{stem}.csv", index=False, lineterminator="\n")
                    env.days_frame().to_csv(out / f"{stem}_days.csv", index=False, lineterminator="\n")
                    outputs += [out / f"{stem}.csv", out / f"{stem}_days.csv"]
    print(f"timing outputs written to {out}")
    return {**config.to_dict(), "days": args.days}, inputs, outputs


def bundled_config_path(name: str = "tiny") -> Path:
    return Path(str(resources.files("feedersim") / "data" / f"{name}_generator.json"))


def cmd_synth(args):
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise DataError(f"{cfg_path} does not exist")
    else:
        cfg_path = bundled_config_path(args.preset)
    try:
        cfg = GeneratorConfig.from_json(cfg_path)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{cfg_path}: {exc}") from None
    if args.seed is not None:
        cfg = GeneratorConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    weather = synthetic_weather(cfg.year, seed=cfg.seed)
    profiles = generate_population(cfg, weather)
    out = Path(args.out)
    outputs = save_store(profiles, out, weather)
    outputs.append(cfg.to_json(out / "generator.json"))
    print(f"generated {len(profiles)} profiles into {out}")
    return {"generator": cfg.to_dict(), "seed": cfg.seed}, [cfg_path], outputs


# --------------------------------------------------------------------------
# Argument parsing
# --------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {value}")
    return value


def _connections(text: str) -> list[int]:
    values = [_positive_int(x) for x in text.replace(" ", "").split(",") if x]
    if not values:
        raise argparse.ArgumentTypeError("empty connection list")
    if len(set(values)) != len(values):
        raise argparse.ArgumentTypeError(f"duplicate feeder sizes in {text!r}")
    return values


def _subset_name(text: str) -> str:
    try:
        get_subset(text)
    except KeyError as exc:
        raise argparse.ArgumentTypeError(exc.args[0]) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="feedersim", description="Feeder peak and simultaneity sampling.")
    parser.add_argument("--version", action="version", version=f"feedersim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, profiles_help="profile store directory or long-format profile file"):
        p.add_argument("--profiles", required=True, help=profiles_help)
        p.add_argument("--labels", help="labels file (only with a profile file)")
        p.add_argument("--weather", help="hourly weather file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--year", type=int, default=DEFAULT_YEAR)
        p.add_argument("--timezone", default=DEFAULT_TIMEZONE)
        p.add_argument("--format", choices=("table", "figures", "both"), default="table")
        p.add_argument("--threads", type=_positive_int, default=None, help="worker cap (default: FEEDERSIM_THREADS or all cores)")

    def sampling(p):
        p.add_argument("--connections", type=_connections, default=list(DEFAULT_CONNECTIONS), help="comma-separated feeder sizes")
        p.add_argument("--samples", type=_positive_int, default=DEFAULT_N_SAMPLES)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--direction", choices=("offtake", "injection", "both"), default="both")

    p = sub.add_parser("ingest", help="validate profiles (and weather) into a store directory")
    common(p, "long-format profile file")
    p.add_argument("--max-gap", type=int, default=96)
    p.add_argument("--delimiter", default=",")

    p = sub.add_parser("summarize", help="per-subset summary table and peak histograms")
    common(p)
    p.add_argument("--subset", action="append", type=_subset_name, help=f"one of {', '.join(BUILTIN_SUBSETS)}; repeatable")
    p.add_argument("--panels", nargs="*", metavar="PROFILE_ID", help="also export per-profile panels")

    p = sub.add_parser("sample", help="Monte Carlo feeder sampling")
    common(p)
    sampling(p)
    p.add_argument("--subset", type=_subset_name)

    p = sub.add_parser("contribution", help="per-connection peak added by a technology")
    common(p)
    sampling(p)
    p.add_argument("--subset-with", "--subset", dest="subset_with", type=_subset_name, required=True)
    p.add_argument("--subset-without", type=_subset_name, default="all")
    p.add_argument("--baseline", help="store to sample the 'without' subset from (default: same store)")

    p = sub.add_parser("timing", help="peak-time distributions and feeder envelopes")
    common(p)
    sampling(p)
    p.add_argument("--subset", type=_subset_name)
    p.add_argument("--report", help="directory of an earlier 'sample' run to reuse")
    p.add_argument("--days", help="day range START:END (0-based, end exclusive) for the envelope")

    p = sub.add_parser("synth", help="generate a synthetic profile store")
    p.add_argument("--config", help="generator config JSON (default: bundled preset)")
    p.add_argument("--preset", choices=("tiny", "default"), default="tiny")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", required=True)
    return parser


COMMANDS = {
    "ingest": cmd_ingest,
    "summarize": cmd_summarize,
    "sample": cmd_sample,
    "contribution": cmd_contribution,
    "timing": cmd_timing,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "labels", None) and Path(args.profiles).is_dir():
        parser.error("--labels only applies when --profiles is a file")
    started = _now()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("error", EmptySubsetWarning)
            config, inputs, outputs = COMMANDS[args.command](args)
    except EmptySubsetWarning as exc:
        print(f"feedersim: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, IngestError, WeatherError, ValueError, OSError) as exc:
        print(f"feedersim: error: {exc}", file=sys.stderr)
        return 1
    write_manifest(out, args.command, config, inputs, outputs, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
