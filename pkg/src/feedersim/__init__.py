"""Monte Carlo sampling of low-voltage feeder peaks from smart-meter profiles."""

from __future__ import annotations

__version__ = "0.1.0"

from .profile_store import (
    Direction,
    IngestConfig,
    IngestError,
    Profile,
    ProfileLabels,
    ProfileSet,
    export_profiles,
    ingest_profiles,
    normalize_dst,
    profile_panels,
)
from .sampler import (
    SamplingConfig,
    SamplingReport,
    feeder_metrics,
    lct_contribution,
    run_sampling,
    sample_feeder,
)
from .subsets import EV, EV_HIGH_POWER, HP, NO_HP_NO_EV, SubsetSpec, apply_subset, summarize
from .synth import GeneratorConfig, generate_population, synthetic_weather
from .timing import feeder_envelope, peak_time_distribution, weather_overlay
from .weather import WeatherSeries, ingest_weather

__all__ = [
    "Direction",
    "EV",
    "EV_HIGH_POWER",
    "GeneratorConfig",
    "HP",
    "IngestConfig",
    "IngestError",
    "NO_HP_NO_EV",
    "Profile",
    "ProfileLabels",
    "ProfileSet",
    "SamplingConfig",
    "SamplingReport",
    "SubsetSpec",
    "WeatherSeries",
    "apply_subset",
    "export_profiles",
    "feeder_envelope",
    "feeder_metrics",
    "generate_population",
    "ingest_profiles",
    "ingest_weather",
    "lct_contribution",
    "normalize_dst",
    "peak_time_distribution",
    "profile_panels",
    "run_sampling",
    "sample_feeder",
    "summarize",
    "synthetic_weather",
    "weather_overlay",
]
