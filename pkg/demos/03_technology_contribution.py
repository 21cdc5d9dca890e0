"""Extra peak per connection caused by heat pumps and EV chargers.

Samples feeders made only of connections with the technology and feeders
without either technology, then differences the per-connection peaks.

    python3 demos/03_technology_contribution.py [output_dir]
"""

from __future__ import annotations

import sys
from pathlib import Path

from feedersim import GeneratorConfig, SamplingConfig, generate_population, lct_contribution, run_sampling, synthetic_weather
from feedersim.figures import export_figures
from feedersim.subsets import EV, EV_HIGH_POWER, HP, NO_HP_NO_EV

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output") / "contribution"
population = generate_population(GeneratorConfig(seed=0), synthetic_weather(2022, seed=0))

sizes = (10, 40, 100)
baseline = run_sampling(population, SamplingConfig(sizes, 1_000, seed=4, direction="offtake", subset=NO_HP_NO_EV))
for spec in (HP, EV, EV_HIGH_POWER):
    with_tech = run_sampling(population, SamplingConfig(sizes, 1_000, seed=4, direction="offtake", subset=spec))
    contrib = lct_contribution(with_tech, baseline)
    frame = contrib.to_frame()
    print(f"{spec.name}: mean extra peak per connection (kW)")
    print(frame[["n_connections", "peak_per_connection_delta_mean", "peak_per_connection_delta_p95"]].to_string(index=False))
    export_figures(contrib, out, seed=4)
print(f"\nfigures and tables in {out}")
