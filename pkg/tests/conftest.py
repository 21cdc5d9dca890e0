from __future__ import annotations

import numpy as np
import pytest

from feedersim.profile_store import ProfileLabels, ProfileSet, quarters_in_year
from feedersim.synth import GeneratorConfig, generate_population, synthetic_weather, tiny_config

YEAR = 2022
NQ = quarters_in_year(YEAR)


def make_set(rows, labels=None, year=YEAR, prefix="p"):
    """ProfileSet from short per-profile patterns tiled to a full year."""
    n_q = quarters_in_year(year)
    matrix = np.array([np.resize(np.asarray(r, dtype=float), n_q) for r in rows])
    ids = [f"{prefix}{i}" for i in range(len(rows))]
    labels = labels or [ProfileLabels() for _ in rows]
    return ProfileSet.from_matrix(ids, matrix, labels, year)


@pytest.fixture(scope="session")
def weather():
    return synthetic_weather(YEAR, seed=0)


@pytest.fixture(scope="session")
def population(weather):
    """Default 2,000-profile synthetic store (about 10 s to build)."""
    return generate_population(GeneratorConfig(seed=0), weather)


@pytest.fixture(scope="session")
def tiny(weather):
    return generate_population(tiny_config(0), weather)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
