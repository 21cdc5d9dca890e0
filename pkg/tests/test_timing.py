from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedersim.profile_store import ProfileLabels
from feedersim.sampler import SamplingConfig, draw_feeders, feeder_sum, run_sampling
from feedersim.timing import (
    ENVELOPE_LEVELS,
    daily_modal_peak_quarters,
    feeder_envelope,
    in_hour_window,
    peak_time_distribution,
    weather_overlay,
)
from feedersim.weather import WeatherSeries, coldest_days

from conftest import NQ, YEAR, make_set


def test_single_cell():
    d = peak_time_distribution(np.full(40, 10 * 96 + 30), YEAR)
    assert d.hour_day_matrix[10, 7] == 1.0
    assert d.hour_day_matrix.sum() == 1.0
    assert d.entropy() == 0.0


def test_two_samples_split_over_two_hours():
    d = peak_time_distribution(np.array([10 * 96 + 7 * 4, 10 * 96 + 19 * 4 + 3]), YEAR)
    assert d.day_histogram[10] == 1.0
    assert d.hour_day_matrix[10, 7] == 0.5 and d.hour_day_matrix[10, 19] == 0.5
    assert np.count_nonzero(d.hour_day_matrix) == 2


@given(st.lists(st.integers(0, NQ - 1), min_size=1, max_size=300), st.randoms())
def test_distribution_sums_to_one_and_ignores_order(quarters, rnd):
    q = np.array(quarters)
    d = peak_time_distribution(q, YEAR)
    assert d.hour_day_matrix.sum() == pytest.approx(1.0, abs=1e-9)
    assert d.day_histogram.sum() == pytest.approx(1.0, abs=1e-9)
    assert (d.hour_day_matrix >= 0).all()
    shuffled = q.copy()
    rnd.shuffle(shuffled)
    e = peak_time_distribution(shuffled, YEAR)
    assert np.array_equal(d.hour_day_matrix, e.hour_day_matrix)
    assert np.array_equal(d.day_histogram, e.day_histogram)


def test_out_of_range_quarters_raise():
    with pytest.raises(ValueError):
        peak_time_distribution(np.array([NQ]), YEAR)
    with pytest.raises(ValueError):
        peak_time_distribution(np.array([], dtype=int), YEAR)


def test_distribution_from_sample_table(tiny):
    rep = run_sampling(tiny, SamplingConfig(3, 200, seed=1, direction="offtake"))
    d = peak_time_distribution(rep.get(3).samples, YEAR)
    assert d.n_connections == 3 and d.n_samples == 200
    assert d.to_frame().shape == (365, 26)


def test_weather_overlay_joins_days(weather):
    d = peak_time_distribution(np.array([5, 500, 5000]), YEAR)
    df = weather_overlay(d, weather)
    assert len(df) == 365
    assert df["peak_probability"].sum() == pytest.approx(1.0)


def test_weather_overlay_constant_weather():
    d = peak_time_distribution(np.array([5]), YEAR)
    df = weather_overlay(d, WeatherSeries.constant(YEAR, 4.0, 0.3))
    assert (df["temperature_mean_c"] == 4.0).all() and (df["ssrd_max_kw_m2"] == 0.3).all()


def test_weather_overlay_year_mismatch():
    d = peak_time_distribution(np.array([5]), YEAR)
    with pytest.raises(ValueError):
        weather_overlay(d, WeatherSeries.constant(2023))


def test_hp_peaks_concentrate_on_cold_days(population, weather):
    rep = run_sampling(population, SamplingConfig((10, 250), 600, seed=3, direction="offtake", subset="hp"))
    small = peak_time_distribution(rep.get(10).samples, YEAR)
    large = peak_time_distribution(rep.get(250).samples, YEAR)
    assert large.entropy() < small.entropy()
    cold = coldest_days(weather, 10)
    assert large.day_histogram[cold].sum() > small.day_histogram[cold].sum()


# -- envelopes ----------------------------------------------------------------


def _random_set(seed, n):
    rng = np.random.default_rng(seed)
    return make_set([rng.normal(0.5, 1.5, 96 * 3) for _ in range(n)])


def test_envelope_single_sample_equals_summed_series():
    ps = _random_set(1, 6)
    cfg = SamplingConfig(3, 1, seed=9, direction="offtake")
    env = feeder_envelope(ps, cfg, (40, 43))
    rows = draw_feeders(9, 3, 1, 6)[0]
    expected = feeder_sum(ps.power, rows)[40 * 96 : 43 * 96]
    for name in ENVELOPE_LEVELS + ("mean",):
        assert np.array_equal(env.bands[name], expected)


def test_identical_profiles_give_zero_band_width():
    ps = make_set([np.sin(np.arange(96) / 10.0)] * 5)
    env = feeder_envelope(ps, SamplingConfig(2, 50, seed=0, direction="offtake"), (0, 7))
    np.testing.assert_array_equal(env.bands["min"], env.bands["max"])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["offtake", "injection"]))
def test_envelope_bands_are_monotone(seed, direction):
    ps = _random_set(seed, 7)
    env = feeder_envelope(ps, SamplingConfig(3, 40, seed=seed, direction=direction), (100, 102))
    stacked = np.vstack([env.bands[k] for k in ENVELOPE_LEVELS])
    assert (np.diff(stacked, axis=0) >= 0).all()


def test_envelope_day_probability_matches_sampling_report(tiny, weather):
    cfg = SamplingConfig(3, 300, seed=12, direction="offtake")
    env = feeder_envelope(tiny, cfg, (0, 365), weather)
    dist = peak_time_distribution(run_sampling(tiny, cfg).get(3).samples, YEAR)
    assert np.array_equal(env.day_peak_probability, dist.day_histogram)
    assert env.temperature_c.shape == (NQ,)
    assert env.to_frame().shape[0] == NQ


def test_envelope_validation(tiny, weather):
    with pytest.raises(ValueError):
        feeder_envelope(tiny, SamplingConfig((2, 3), 10), (0, 7))
    with pytest.raises(ValueError):
        feeder_envelope(tiny, SamplingConfig(2, 10, direction="both"), (0, 7))
    with pytest.raises(ValueError):
        feeder_envelope(tiny, SamplingConfig(2, 10, direction="offtake"), (360, 366))
    with pytest.raises(ValueError):
        feeder_envelope(tiny, SamplingConfig(2, 10, direction="offtake"), (0, 7), WeatherSeries.constant(2023))


def test_days_without_injection_have_no_modal_quarter():
    night = np.r_[np.full(48, 1.0), np.full(48, 2.0)]
    ps = make_set([night] * 3)
    modal, counts = daily_modal_peak_quarters(ps, SamplingConfig(2, 10, seed=0, direction="injection"))
    assert (modal == -1).all() and counts.sum() == 0
    modal, _ = daily_modal_peak_quarters(ps, SamplingConfig(2, 10, seed=0, direction="offtake"))
    assert (modal == 48).all()


def test_hour_window_wraps_midnight():
    q = np.array([0, 4, 5, 40, 87, 88, 95])
    assert in_hour_window(q, 22, 1).tolist() == [True, True, False, False, False, True, True]
    assert in_hour_window(q, 10, 22).tolist() == [False, False, False, True, True, True, False]


def test_ev_high_winter_week_peaks_around_midnight(population, weather):
    cfg = SamplingConfig(40, 400, seed=2, direction="offtake", subset="ev_high_power")
    env = feeder_envelope(population, cfg, (7, 14), weather)
    modal = env.modal_peak_quarter
    assert (modal >= 0).all()
    assert in_hour_window(modal, 22, 1).all()


def test_pv_injection_peaks_around_noon(population):
    modal, _ = daily_modal_peak_quarters(population, SamplingConfig(40, 200, seed=4, direction="injection", subset="no_hp_no_ev"))
    days = modal[modal >= 0]
    assert len(days) > 300
    assert in_hour_window(days, 11, 17).mean() >= 0.95


def test_modal_quarter_labels():
    labels = [ProfileLabels(), ProfileLabels()]
    ps = make_set([np.r_[np.zeros(95), 3.0]] * 2, labels)
    env = feeder_envelope(ps, SamplingConfig(2, 3, seed=0, direction="offtake"), (0, 2))
    frame = env.days_frame()
    assert frame["modal_peak_time"].tolist() == ["23:45", "23:45"]
