from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import binomtest

from feedersim.profile_store import Direction, ProfileLabels
from feedersim.sampler import (
    TIME_BLOCK,
    SampleTable,
    SamplingConfig,
    SamplingReport,
    SummaryStats,
    _run_extremes,
    bootstrap_standard_error,
    draw_feeders,
    feeder_metrics,
    feeder_sum,
    lct_contribution,
    percentiles,
    resolve_threads,
    run_sampling,
    sample_feeder,
    sample_rng,
)
from feedersim.synth import shifted_population

from conftest import make_set

# -- drawing -----------------------------------------------------------------


def test_full_draw_returns_every_index():
    idx = sample_feeder(5, 5, sample_rng(0, 5, 0))
    assert sorted(idx.tolist()) == [0, 1, 2, 3, 4]


def test_draw_is_deterministic():
    a = draw_feeders(123, 3, 50, 10)
    b = draw_feeders(123, 3, 50, 10)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draw_feeders(124, 3, 50, 10))


def test_draw_without_replacement_within_a_feeder():
    d = draw_feeders(9, 7, 300, 8)
    assert all(len(set(row)) == 7 for row in d.tolist())


def test_draw_start_offset_continues_the_sequence():
    full = draw_feeders(5, 2, 20, 6)
    assert np.array_equal(full[7:], draw_feeders(5, 2, 13, 6, start=7))


def test_too_many_connections_raises():
    with pytest.raises(ValueError):
        sample_feeder(3, 4, sample_rng(0, 4, 0))
    with pytest.raises(ValueError):
        run_sampling(make_set([[1.0], [2.0]]), SamplingConfig(3, 5))


def test_single_draw_frequencies_are_uniform():
    d = draw_feeders(2024, 1, 10_000, 4).ravel()
    counts = np.bincount(d, minlength=4)
    sigma = np.sqrt(10_000 * 0.25 * 0.75)
    assert (np.abs(counts - 2500) < 3 * sigma).all()


def test_negative_and_large_seeds_are_accepted():
    assert draw_feeders(-1, 2, 3, 5).shape == (3, 2)
    assert draw_feeders(2**70, 2, 3, 5).shape == (3, 2)


# -- single feeder ----------------------------------------------------------


def test_hand_computed_offtake():
    m = feeder_metrics(np.array([[1.0, 2.0], [2.0, 1.0]]), "offtake")
    assert (m.peak_kw, m.peak_quarter_index, m.simultaneity) == (3.0, 0, 0.75)
    assert m.peak_per_connection_kw == 1.5


def test_hand_computed_injection():
    m = feeder_metrics(np.array([[-2.0, 0.0], [0.0, -2.0]]), Direction.INJECTION)
    assert (m.peak_kw, m.peak_quarter_index, m.simultaneity) == (-2.0, 0, 0.5)


def test_single_profile_simultaneity_is_one():
    m = feeder_metrics([np.array([0.3, -1.0, 2.0])], "offtake")
    assert m.simultaneity == 1.0
    assert feeder_metrics([np.array([0.3, -1.0, 2.0])], "injection").simultaneity == 1.0


def test_zero_denominator_gives_no_simultaneity():
    assert feeder_metrics(np.zeros((3, 4)), "offtake").simultaneity is None
    # offtake-only profiles have nothing to inject
    assert feeder_metrics(np.ones((2, 4)), "injection").simultaneity is None


def test_profiles_without_injection_add_nothing_to_denominator():
    m = feeder_metrics(np.array([[-2.0, 0.0], [1.0, 1.0]]), "injection")
    assert m.peak_kw == -1.0
    assert m.simultaneity == 0.5


def test_feeder_sum_order():
    m = np.array([[1e16, 0.0], [1.0, 0.0], [-1e16, 0.0]])
    assert feeder_sum(m)[0] == 0.0
    assert feeder_sum(m, [0, 2, 1])[0] == 1.0


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 3 * TIME_BLOCK + 7)), elements=st.floats(-20, 20)),
    st.data(),
)
def test_kernel_matches_reference_bit_for_bit(matrix, data):
    n_rows = matrix.shape[0]
    n = data.draw(st.integers(1, n_rows))
    draws = np.array([data.draw(st.permutations(range(n_rows)))[:n] for _ in range(3)], dtype=np.int64)
    vmax, imax, vmin, imin, den_max, den_min = _run_extremes(matrix, draws, threads=1)
    for s, rows in enumerate(draws):
        up = feeder_metrics(matrix[rows], "offtake")
        down = feeder_metrics(matrix[rows], "injection")
        assert vmax[s] == up.peak_kw and imax[s] == up.peak_quarter_index
        assert vmin[s] == down.peak_kw and imin[s] == down.peak_quarter_index
        sim_up = max(vmax[s], 0.0) / den_max[s] if den_max[s] > 0 else None
        sim_down = max(-vmin[s], 0.0) / den_min[s] if den_min[s] > 0 else None
        assert sim_up == up.simultaneity and sim_down == down.simultaneity


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 50)), elements=st.floats(-10, 10)))
def test_simultaneity_lies_in_unit_interval(matrix):
    for direction in ("offtake", "injection"):
        s = feeder_metrics(matrix, direction).simultaneity
        assert s is None or 0.0 <= s <= 1.0 + 1e-12


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 50)), elements=st.floats(0, 10)))
def test_feeder_peak_dominates_each_member_at_peak_time(matrix):
    # holds for offtake-only members; with injection a member can exceed the sum
    m = feeder_metrics(matrix, "offtake")
    assert m.peak_kw == feeder_sum(matrix).max()
    assert (matrix[:, m.peak_quarter_index] <= m.peak_kw).all()


# -- Monte Carlo runs --------------------------------------------------------


def _small_set(seed=0, n=4):
    rng = np.random.default_rng(seed)
    return make_set([rng.normal(1.0, 2.0, 96 * 7) for _ in range(n)])


def test_one_sample_of_whole_set_equals_whole_set_metrics():
    ps = _small_set(n=5)
    rep = run_sampling(ps, SamplingConfig(5, 1, seed=4))
    for direction in ("offtake", "injection"):
        ref = feeder_metrics(ps, direction)
        got = rep.get(5, direction)
        assert got.peak_per_connection.mean == pytest.approx(ref.peak_per_connection_kw, rel=1e-12)
        assert got.simultaneity.mean == pytest.approx(ref.simultaneity, rel=1e-12)


def test_n_one_gives_unit_simultaneity():
    ps = _small_set(n=6)
    rep = run_sampling(ps, SamplingConfig(1, 500, seed=2))
    for r in rep:
        defined = r.samples.simultaneity[~np.isnan(r.samples.simultaneity)]
        assert (defined == 1.0).all()


def test_enumeration_oracle_on_four_profiles():
    ps = _small_set(seed=3)
    n_samples = 20_000
    rep = run_sampling(ps, SamplingConfig(2, n_samples, seed=8, direction="offtake"), keep_draws=True)
    table = rep.get(2).samples
    combos = list(itertools.combinations(range(4), 2))
    exact = {c: feeder_metrics(ps.power[list(c)], "offtake") for c in combos}
    # each of the 6 feeders is drawn with probability 1/6
    keys = [tuple(sorted(r)) for r in table.draws.tolist()]
    for c in combos:
        k = sum(key == c for key in keys)
        assert binomtest(k, n_samples, 1 / 6).pvalue > 0.001
    exact_mean = np.mean([exact[c].peak_per_connection_kw for c in combos])
    se = table.peak_per_connection_kw.std(ddof=1) / np.sqrt(n_samples)
    assert abs(table.peak_per_connection_kw.mean() - exact_mean) < 3 * se


def test_thread_count_does_not_change_results():
    ps = _small_set(seed=5, n=12)
    cfg = SamplingConfig((2, 5), 1000, seed=77)
    a = run_sampling(ps, cfg, threads=1)
    b = run_sampling(ps, cfg, threads=4)
    for ra, rb in zip(a, b):
        assert np.array_equal(ra.samples.peak_kw, rb.samples.peak_kw)
        assert np.array_equal(ra.samples.peak_quarter_index, rb.samples.peak_quarter_index)
        assert np.array_equal(ra.samples.simultaneity, rb.samples.simultaneity, equal_nan=True)
    assert a.to_dict() == b.to_dict()


def test_same_seed_same_report():
    ps = _small_set(seed=6, n=8)
    cfg = SamplingConfig((2, 3), 300, seed=1)
    assert run_sampling(ps, cfg).to_dict() == run_sampling(ps, cfg).to_dict()


def test_mean_peak_per_connection_non_increasing(tiny):
    rep = run_sampling(tiny, SamplingConfig((1, 2, 3, 6), 3000, seed=10, direction="offtake"))
    means = [rep.get(n).samples.peak_per_connection_kw for n in (1, 2, 3, 6)]
    for a, b in zip(means, means[1:]):
        band = 3 * np.hypot(bootstrap_standard_error(a), bootstrap_standard_error(b))
        assert b.mean() <= a.mean() + band


def test_both_directions_share_draws():
    ps = _small_set(seed=7, n=6)
    rep = run_sampling(ps, SamplingConfig(3, 200, seed=2), keep_draws=True)
    assert np.array_equal(rep.get(3, "offtake").samples.draws, rep.get(3, "injection").samples.draws)


def test_undefined_simultaneity_is_counted():
    ps = make_set([[1.0, 0.5]] * 3)
    rep = run_sampling(ps, SamplingConfig(2, 50, seed=0))
    inj = rep.get(2, "injection")
    assert inj.simultaneity is None and inj.n_undefined_simultaneity == 50
    assert rep.get(2, "offtake").simultaneity.mean == 1.0


def test_subset_is_applied():
    labels = [ProfileLabels(has_hp=True), ProfileLabels(), ProfileLabels(has_hp=True)]
    ps = make_set([[5.0], [100.0], [1.0]], labels)
    rep = run_sampling(ps, SamplingConfig(2, 20, seed=0, direction="offtake", subset="hp"))
    assert rep.subset_name == "HP" and rep.n_profiles == 2
    assert rep.get(2).peak_per_connection.max == 3.0


# -- percentiles and summaries -----------------------------------------------


def test_percentile_examples():
    assert percentiles([1, 2, 3, 4], 50)[0] == 2.5
    lo, hi = percentiles([5.0, -1.0, 3.0], (0, 100))
    assert (lo, hi) == (-1.0, 5.0)
    assert percentiles(np.arange(1, 101), 25)[0] == 25.75


@given(
    arrays(np.float64, st.integers(1, 60), elements=st.floats(-1e6, 1e6)),
    st.lists(st.floats(0, 100), min_size=1, max_size=6),
)
def test_percentiles_match_linear_definition(x, ps):
    got = percentiles(x, ps)
    ref = np.percentile(x, ps, method="linear")
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-9)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 5)), elements=st.floats(-100, 100)))
def test_percentiles_along_axis(x):
    got = percentiles(x, (5, 50, 95), axis=0)
    assert got.shape == (3, x.shape[1])
    for j in range(x.shape[1]):
        np.testing.assert_array_equal(got[:, j], percentiles(x[:, j], (5, 50, 95)))


@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e9, 1e9)))
def test_summary_stats_are_ordered(x):
    s = SummaryStats.from_values(x)
    assert s.ordered()
    assert s.min <= s.mean <= s.max or np.isclose(s.mean, s.min) or np.isclose(s.mean, s.max)


def test_bootstrap_standard_error_scale():
    x = np.random.default_rng(0).normal(0, 2.0, 2000)
    assert bootstrap_standard_error(x) == pytest.approx(2.0 / np.sqrt(2000), rel=0.15)


# -- contribution -------------------------------------------------------------


def test_identical_reports_give_zero_contribution():
    ps = _small_set(seed=8, n=6)
    rep = run_sampling(ps, SamplingConfig((2, 3), 100, seed=0))
    c = lct_contribution(rep, rep)
    for row in c.rows:
        assert all(v == 0.0 for v in row.peak_per_connection_delta.values())
        assert all(v == 0.0 for v in row.simultaneity_delta.values())


def test_mismatched_grids_raise():
    ps = _small_set(seed=8, n=6)
    a = run_sampling(ps, SamplingConfig((2, 3), 10))
    b = run_sampling(ps, SamplingConfig((2, 4), 10))
    with pytest.raises(ValueError):
        lct_contribution(a, b)


def test_shift_oracle_small():
    ps = _small_set(seed=9, n=10)
    cfg = SamplingConfig((1, 3, 10), 400, seed=5, direction="offtake")
    c = lct_contribution(run_sampling(shifted_population(ps, 1.0), cfg), run_sampling(ps, cfg))
    for row in c.rows:
        # same seed, same draws: each feeder's peak moves by exactly n kW
        assert row.peak_per_connection_delta["mean"] == pytest.approx(1.0, abs=1e-9)


# -- configuration and serialization -----------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SamplingConfig((10, 10))
    with pytest.raises(ValueError):
        SamplingConfig(0)
    with pytest.raises(ValueError):
        SamplingConfig(5, n_samples=0)
    with pytest.raises(ValueError):
        SamplingConfig(5, direction="sideways")
    assert SamplingConfig(5).n_connections == (5,)


def test_resolve_threads(monkeypatch):
    monkeypatch.setenv("FEEDERSIM_THREADS", "3")
    assert resolve_threads() == 3
    assert resolve_threads(2) == 2
    with pytest.raises(ValueError):
        resolve_threads(0)


def test_sample_table_csv_round_trip(tmp_path):
    t = SampleTable(
        4, Direction.INJECTION, np.array([-1.5, 0.1 + 0.2]), np.array([3, 35039]), np.array([0.25, np.nan])
    )
    back = SampleTable.read_csv(t.write_csv(tmp_path / "t.csv"))
    assert back.n_connections == 4 and back.direction is Direction.INJECTION
    assert np.array_equal(back.peak_kw, t.peak_kw)
    assert np.array_equal(back.peak_quarter_index, t.peak_quarter_index)
    assert np.array_equal(back.simultaneity, t.simultaneity, equal_nan=True)


def test_report_json_round_trip(tmp_path):
    ps = _small_set(seed=10, n=6)
    rep = run_sampling(ps, SamplingConfig((2, 3), 64, seed=3, subset="all"))
    rep.write_json(tmp_path / "r.json")
    rep.write_samples(tmp_path / "s")
    back = SamplingReport.from_json(tmp_path / "r.json", tmp_path / "s")
    assert back.to_dict() == rep.to_dict()
    assert np.array_equal(back.get(3, "injection").samples.peak_kw, rep.get(3, "injection").samples.peak_kw)


def test_report_percentiles_are_ordered(tiny):
    rep = run_sampling(tiny, SamplingConfig((1, 2, 4, 6), 500, seed=1))
    for r in rep:
        assert r.peak_per_connection.ordered()
        assert r.simultaneity is None or r.simultaneity.ordered()
