import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import dpratio as d
from dpratio.simulation import WEIGHT_CLIP


def small_config(**overrides):
    base = dict(n=400, epsilons=(0.5,), replications=6, mc_draws=20, master_seed=99)
    base.update(overrides)
    return d.SimulationConfig(**base)


class TestGenerate:
    def test_labels_binary_and_scores_in_unit_interval(self):
        rng = np.random.default_rng(0)
        y, s, w = d.generate_arrays(5000, False, 1.1, rng)
        assert set(np.unique(y)) <= {0.0, 1.0}
        assert s.min() > 0.0 and s.max() < 1.0
        assert (s / 1.1 <= 1.0 / 1.1).all()
        assert (w == 1.0).all()

    def test_large_sample_means(self):
        rng = np.random.default_rng(1)
        y, s, _ = d.generate_arrays(1_000_000, False, 1.1, rng)
        assert abs(s.mean() - 0.5) < 0.003
        assert abs(s.mean() / y.mean() - 1.1) < 0.01

    def test_weighted_design(self):
        rng = np.random.default_rng(2)
        _, _, w = d.generate_arrays(1_000_000, True, 1.1, rng)
        assert w.min() >= WEIGHT_CLIP[0] and w.max() <= WEIGHT_CLIP[1]
        kish_ratio = w.sum() ** 2 / (w @ w) / w.size
        assert abs(kish_ratio - 0.6) < 0.05

    def test_unit_ratio_supported(self):
        rng = np.random.default_rng(3)
        y, s, _ = d.generate_arrays(50_000, False, 1.0, rng)
        assert abs(s.mean() / y.mean() - 1.0) < 0.02

    def test_sub_unit_ratio_rejected(self):
        with pytest.raises(d.InvalidConfigError):
            d.generate_arrays(10, False, 0.9, np.random.default_rng(0))

    def test_records_match_arrays(self):
        records = d.generate_dataset(20, True, 1.1, np.random.default_rng(7))
        y, s, w = d.generate_arrays(20, True, 1.1, np.random.default_rng(7))
        assert [r.y for r in records] == y.tolist()
        assert [r.s for r in records] == s.tolist()
        assert [r.w for r in records] == w.tolist()


class TestIntervalScore:
    def test_covered_equals_width(self):
        assert d.interval_score(0.0, 1.0, 0.5, 0.05) == 1.0

    def test_miss_penalty(self):
        assert d.interval_score(0.0, 1.0, 1.1, 0.05) == pytest.approx(5.0, rel=1e-12)

    def test_boundary_counts_as_covered(self):
        assert d.interval_score(0.0, 1.0, 1.0, 0.05) == 1.0

    def test_inverted_interval_rejected(self):
        with pytest.raises(d.InvalidIntervalError):
            d.interval_score(1.0, 0.0, 0.5, 0.05)

    @given(
        st.floats(-5, 5), st.floats(0, 5), st.floats(-10, 10),
        st.floats(0.01, 0.5),
    )
    @settings(max_examples=100, deadline=None)
    def test_at_least_width_with_equality_iff_covered(self, lower, extent, truth, alpha):
        upper = lower + extent
        score = d.interval_score(lower, upper, truth, alpha)
        width = upper - lower
        assert score >= width
        if lower <= truth <= upper:
            assert score == width
        else:
            # A miss so tiny that its penalty is absorbed by the width in
            # double precision cannot be distinguished from coverage.
            miss = max(lower - truth, truth - upper)
            assume(2.0 / alpha * miss > 1e-9 * (1.0 + width))
            assert score > width


class TestRunExperiment:
    def test_bit_identical_reruns(self):
        config = small_config()
        assert d.run_experiment(config) == d.run_experiment(config)

    def test_row_layout(self):
        config = small_config(epsilons=(0.5, 1.0))
        rows = d.run_experiment(config)
        assert len(rows) == 1 + 3 * 2
        assert rows[0].method is d.Method.PUBLIC and rows[0].epsilon is None
        assert [r.method for r in rows[1:4]] == [
            d.Method.NO_CORRECTION, d.Method.MONTE_CARLO, d.Method.ANALYTICAL
        ]
        assert all(r.epsilon == 0.5 for r in rows[1:4])
        assert all(r.epsilon == 1.0 for r in rows[4:])

    def test_public_row_independent_of_epsilons(self):
        rows_a = d.run_experiment(small_config(epsilons=(0.2,)))
        rows_b = d.run_experiment(small_config(epsilons=(0.2, 4.0)))
        assert rows_a[0] == rows_b[0]

    def test_epsilon_streams_stable_under_grid_edits(self):
        # Rows for a given epsilon do not change when other epsilons join the grid.
        rows_pair = d.run_experiment(small_config(epsilons=(0.2, 0.5)))
        rows_single = d.run_experiment(small_config(epsilons=(0.5,)))
        by_key = {(r.method, r.epsilon): r for r in rows_pair}
        for row in rows_single[1:]:
            assert by_key[(row.method, row.epsilon)] == row

    def test_score_at_least_width_when_no_refusals(self):
        rows = d.run_experiment(small_config(replications=40))
        for row in rows:
            if row.refusal_count == 0:
                assert row.mean_interval_score >= row.mean_width - 1e-12

    def test_threads_do_not_change_results(self):
        config = small_config(replications=8)
        assert d.run_experiment(config, threads=1) == d.run_experiment(config, threads=2)

    def test_refusals_counted_not_fatal(self):
        # Tiny budget on a small weighted sample drives the noisy label sum
        # negative in a sizable share of replications.
        config = d.SimulationConfig(
            n=100, epsilons=(0.02,), weighted=True, replications=40,
            mc_draws=20, master_seed=5,
        )
        rows = d.run_experiment(config)
        nc = rows[1]
        assert 0 < nc.refusal_count < config.replications
        assert math.isfinite(nc.mean_width)
        assert rows[0].refusal_count == 0

    def test_effective_n_matches_design(self):
        rows = d.run_experiment(small_config(weighted=True, replications=20, n=2000))
        assert rows[0].mean_effective_n == pytest.approx(0.616 * 2000, rel=0.05)
        unweighted = d.run_experiment(small_config(replications=4))
        assert unweighted[0].mean_effective_n == 400.0


class TestConfigValidation:
    def test_laplace_requires_zero_delta(self):
        with pytest.raises(d.InvalidConfigError):
            small_config(mechanism=d.MechanismKind.LAPLACE, delta=1e-6)
        small_config(mechanism=d.MechanismKind.LAPLACE, delta=0.0)

    def test_gaussian_requires_positive_delta(self):
        with pytest.raises(d.InvalidConfigError):
            small_config(delta=0.0)

    def test_epsilons_must_be_positive(self):
        with pytest.raises(d.InvalidConfigError):
            small_config(epsilons=(0.5, -1.0))
        with pytest.raises(d.InvalidConfigError):
            small_config(epsilons=())

    def test_level_in_unit_interval(self):
        with pytest.raises(d.InvalidConfigError):
            small_config(level=1.0)


class TestCsvOutput:
    def test_rows_roundtrip(self, tmp_path):
        rows = d.run_experiment(small_config())
        path = tmp_path / "rows.csv"
        d.write_rows_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "method,epsilon,width,coverage,score,effective_n,refusals"
        assert len(lines) == 1 + len(rows)
        first = lines[1].split(",")
        assert first[0] == "public" and first[1] == ""
        assert float(first[2]) == rows[0].mean_width

    def test_json_dict_replaces_nan(self):
        row = d.ExperimentRow(d.Method.PUBLIC, None, math.nan, math.nan, math.nan, 5.0, 6)
        payload = json.loads(json.dumps(row.to_json_dict()))
        assert payload["width"] is None
        assert payload["refusals"] == 6
