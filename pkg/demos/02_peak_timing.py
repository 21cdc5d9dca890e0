"""When and on which days do feeder peaks happen?

Heat-pump feeders peak on the coldest days, PV injection peaks around noon
and high-power EV feeders peak just after the night tariff starts. The
script prints the evidence and writes heat maps and envelope plots.

    python3 demos/02_peak_timing.py [output_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from feedersim import GeneratorConfig, SamplingConfig, generate_population, run_sampling, synthetic_weather
from feedersim.figures import export_figures
from feedersim.subsets import EV_HIGH_POWER, HP
from feedersim.timing import daily_modal_peak_quarters, feeder_envelope, in_hour_window, peak_time_distribution
from feedersim.weather import coldest_days, daily_mean_temperature

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "timing"
weather = synthetic_weather(2022, seed=0)
population = generate_population(GeneratorConfig(seed=0), weather)

# heat pumps: small versus large feeders
report = run_sampling(population, SamplingConfig((10, 250), 1_000, seed=1, direction="offtake", subset=HP))
cold = coldest_days(weather, 10)
temps = daily_mean_temperature(weather)
for n in (10, 250):
    dist = peak_time_distribution(report.get(n, "offtake").samples, 2022)
    top = int(np.argmax(dist.day_histogram))
    print(
        f"HP n={n:>3}: {dist.day_histogram[cold].sum():.0%} of peaks on the 10 coldest days, "
        f"busiest day {top} ({temps[top]:.1f} °C), entropy {dist.entropy():.2f}"
    )
    export_figures(dist, out, weather=weather, subset=HP.name, seed=1)

# PV injection around noon
modal, _ = daily_modal_peak_quarters(population, SamplingConfig(40, 500, seed=2, direction="injection"))
print(f"injection: modal peak between 11h and 17h on {in_hour_window(modal[modal >= 0], 11, 17).mean():.0%} of days")

# EV, high power: one week in January
env = feeder_envelope(population, SamplingConfig(40, 500, seed=3, direction="offtake", subset=EV_HIGH_POWER), (7, 14), weather)
print("EV high power, January week, modal peak time per day:")
print(env.days_frame()[["date", "modal_peak_time", "peak_probability"]].to_string(index=False))
export_figures(env, out)
print(f"\nfigures and tables in {out}")
