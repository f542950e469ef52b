import math
from dataclasses import replace

import numpy as np
import pytest

import dpratio as d
from dpratio.core import SUM_FIELDS


def make_released(values, noise=None, mechanism=d.MechanismKind.GAUSSIAN,
                  profile=d.Profile.FULL7):
    vals = {f: 1.0 for f in SUM_FIELDS}
    vals.update(values)
    nv = {f: 0.0 for f in SUM_FIELDS}
    if noise:
        nv.update(noise)
    return d.ReleasedSums(values=vals, noise_variance=nv, mechanism=mechanism,
                          per_sum_budget=d.PrivacyBudget(1.0, 1e-6), profile=profile)


def seeded_release(seed, epsilon=0.5, n=2000, weighted=False,
                   mechanism=d.MechanismKind.GAUSSIAN):
    rng = np.random.default_rng(seed)
    y, s, w = d.generate_arrays(n, weighted, 1.1, rng)
    bounds = d.Bounds.binary(w_low=1 / 3, w_high=3.0) if weighted else d.Bounds.binary_unweighted()
    sums = d.compute_sums_from_arrays(y, s, w, bounds)
    delta = 1e-6 if mechanism is d.MechanismKind.GAUSSIAN else 0.0
    released = d.release(sums, bounds, d.PrivacyBudget(epsilon, delta), mechanism, rng)
    return sums, released, rng


class TestPlugInMoments:
    def test_hand_computed_example(self):
        sums = d.compute_sums(
            [d.Record(0, 0.4), d.Record(1, 0.6)], d.Bounds.binary_unweighted()
        )
        m = d.plug_in_moments(d.exact_release(sums))
        assert m.mu_s == pytest.approx(0.5, rel=1e-15)
        assert m.mu_y == pytest.approx(0.5, rel=1e-15)
        assert m.var_s_bar == pytest.approx(0.005, rel=1e-12)
        assert m.var_y_bar == pytest.approx(0.125, rel=1e-12)
        assert m.cov_ys_bar == pytest.approx(0.025, rel=1e-12)
        assert m.flags == ()

    def test_invariant_to_weight_rescaling(self):
        rng = np.random.default_rng(2)
        y, s = rng.random(50), rng.random(50)
        w = rng.uniform(1.0, 2.0, 50)
        bounds = d.Bounds(0, 1, 0, 1, 0.1, 50.0)
        base = d.plug_in_moments(d.exact_release(d.compute_sums_from_arrays(y, s, w, bounds)))
        scaled = d.plug_in_moments(
            d.exact_release(d.compute_sums_from_arrays(y, s, 7.0 * w, bounds))
        )
        for f in ("mu_s", "mu_y", "var_s_bar", "var_y_bar", "cov_ys_bar"):
            assert getattr(scaled, f) == pytest.approx(getattr(base, f), rel=1e-12)

    def test_constant_score_has_zero_variance(self):
        records = [d.Record(1, 0.3), d.Record(0, 0.3), d.Record(1, 0.3)]
        m = d.plug_in_moments(d.exact_release(d.compute_sums(records, d.Bounds.binary_unweighted())))
        assert m.var_s_bar == pytest.approx(0.0, abs=1e-16)

    def test_negative_plug_in_variance_floored_and_flagged(self):
        released = make_released(
            {"sum_w": 100.0, "sum_w2": 100.0, "sum_ws": 80.0, "sum_ws2": 10.0,
             "sum_wy": 50.0, "sum_wy2": 50.0, "sum_wys": 40.0}
        )
        m = d.plug_in_moments(released)
        assert m.var_s_bar == 0.0
        assert "var_s_bar_floored" in m.flags

    def test_degenerate_weight_total(self):
        with pytest.raises(d.DegenerateDenominatorError):
            d.plug_in_moments(make_released({"sum_w": -3.0}))


class TestDeltaMethodVariances:
    MOMENTS = d.Moments(mu_s=1.0, mu_y=2.0, var_s_bar=0.04, var_y_bar=0.09, cov_ys_bar=0.01)

    def test_ratio_variance_example(self):
        assert d.ratio_variance(self.MOMENTS) == pytest.approx(0.013125, rel=1e-12)

    def test_ratio_variance_zero_numerator_mean(self):
        m = d.Moments(0.0, 2.0, 0.04, 0.09, 0.01)
        assert d.ratio_variance(m) == pytest.approx(0.04 / 4.0, rel=1e-12)

    def test_ratio_variance_degenerate(self):
        with pytest.raises(d.DegenerateDenominatorError):
            d.ratio_variance(d.Moments(1.0, 0.0, 0.04, 0.09, 0.01))

    def test_log_variance_example(self):
        assert d.log_ratio_variance(self.MOMENTS) == pytest.approx(0.0525, rel=1e-12)

    def test_log_variance_perfect_dependence(self):
        m = d.Moments(2.0, 2.0, 0.04, 0.04, 0.04)
        assert d.log_ratio_variance(m) == 0.0

    def test_log_matches_ratio_variance_over_r_squared(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            mu_s, mu_y = rng.uniform(0.5, 3.0, 2)
            var_s, var_y = rng.uniform(1e-4, 1.0, 2)
            rho = rng.uniform(-0.9, 0.9)
            m = d.Moments(mu_s, mu_y, var_s, var_y, rho * math.sqrt(var_s * var_y))
            r = mu_s / mu_y
            assert d.log_ratio_variance(m) == pytest.approx(
                d.ratio_variance(m) / (r * r), rel=1e-12
            )

    def test_brute_force_sampling_oracle(self):
        # Small denominator CV, so the first-order approximation must hold tightly.
        mu_s, mu_y = 1.0, 2.0
        var_s, var_y = 0.002, 0.004
        cov = 0.4 * math.sqrt(var_s * var_y)
        m = d.Moments(mu_s, mu_y, var_s, var_y, cov)
        assert math.sqrt(var_y) / mu_y < 0.05

        rng = np.random.default_rng(123)
        chol = np.linalg.cholesky(np.array([[var_s, cov], [cov, var_y]]))
        z = rng.standard_normal((1_000_000, 2)) @ chol.T
        ratios = (mu_s + z[:, 0]) / (mu_y + z[:, 1])
        assert d.ratio_variance(m) == pytest.approx(float(ratios.var()), rel=0.05)


class TestPointEstimate:
    def test_direct_ratio(self):
        released = make_released({"sum_ws": 110.0, "sum_wy": 100.0})
        assert d.point_estimate(released) == 1.1

    def test_zero_noise_release_matches_public_ratio(self):
        sums, _, _ = seeded_release(5)
        released = d.exact_release(sums)
        assert d.point_estimate(released) == sums.sum_ws / sums.sum_wy

    def test_log_scale(self):
        released = make_released({"sum_ws": 110.0, "sum_wy": 100.0})
        assert d.point_estimate(released, d.Scale.LOG) == pytest.approx(math.log(1.1), rel=1e-15)

    def test_degenerate_denominator(self):
        with pytest.raises(d.DegenerateDenominatorError):
            d.point_estimate(make_released({"sum_ws": 10.0, "sum_wy": 0.0}))

    def test_degenerate_numerator_on_log_scale(self):
        with pytest.raises(d.DegenerateNumeratorError):
            d.point_estimate(make_released({"sum_ws": -1.0, "sum_wy": 100.0}), d.Scale.LOG)

    def test_mean_point_estimate_near_truth_at_generous_budget(self):
        # n=10000, epsilon=4: the noisy point estimate stays centred on 1.1.
        points = []
        for rep in range(1000):
            _, released, _ = seeded_release(rep, epsilon=4.0, n=10_000)
            points.append(d.point_estimate(released))
        assert abs(np.mean(points) - 1.1) < 0.01


class TestWaldInterval:
    def test_zero_variance_degenerate(self):
        assert d.wald_interval(1.1, 0.0, 0.95) == (1.1, 1.1)

    def test_reference_interval(self):
        lo, hi = d.wald_interval(1.1, 0.0004, 0.95)
        assert lo == pytest.approx(1.06080, abs=5e-6)
        assert hi == pytest.approx(1.13920, abs=5e-6)

    def test_one_sigma_level(self):
        lo, hi = d.wald_interval(0.0, 1.0, 0.6827)
        assert hi - lo == pytest.approx(2.0, abs=1e-3)

    def test_invalid_level(self):
        with pytest.raises(d.InvalidConfigError):
            d.wald_interval(0.0, 1.0, 1.0)


class TestZeroNoiseReduction:
    @pytest.mark.parametrize("scale", [d.Scale.RATIO, d.Scale.LOG])
    def test_all_methods_bit_identical_to_public(self, scale):
        sums, _, _ = seeded_release(7)
        released = d.exact_release(sums)
        public = d.public_estimate(sums, scale)
        mc_rng = np.random.default_rng(0)
        for est in (
            d.ci_no_correction(released, scale),
            d.ci_monte_carlo(released, scale, rng=mc_rng),
            d.ci_analytical(released, scale),
        ):
            assert est.point == public.point
            assert est.variance == public.variance
            assert est.ci_lower == public.ci_lower
            assert est.ci_upper == public.ci_upper


class TestMonteCarloCI:
    def test_large_draw_convergence_to_delta_formula(self):
        released = make_released(
            {"sum_w": 5000.0, "sum_wy": 2273.0, "sum_ws": 2500.0, "sum_w2": 5000.0,
             "sum_wy2": 2273.0, "sum_ws2": 1500.0, "sum_wys": 1364.0},
            noise={"sum_ws": 400.0, "sum_wy": 400.0},
        )
        num, den = 2500.0, 2273.0
        delta_extra = 400.0 / den**2 + num**2 * 400.0 / den**4
        base = d.ci_no_correction(released).variance

        extras = []
        for seed in range(4):
            est = d.ci_monte_carlo(released, draws=200_000, rng=np.random.default_rng(seed))
            extras.append(est.variance - base)
        extras = np.array(extras)
        spread = (extras.max() - extras.min()) / extras.mean()
        assert spread < 0.02
        assert extras.mean() == pytest.approx(delta_extra, rel=0.03)

    def test_variance_never_below_no_correction(self):
        for seed in range(20):
            _, released, rng = seeded_release(seed, epsilon=0.2)
            nc = d.ci_no_correction(released)
            mc = d.ci_monte_carlo(released, rng=rng)
            assert mc.variance >= nc.variance

    def test_redraw_flag_when_denominator_replicates_rejected(self):
        released = make_released(
            {"sum_w": 100.0, "sum_wy": 5.0, "sum_ws": 6.0, "sum_w2": 100.0,
             "sum_wy2": 5.0, "sum_ws2": 1.0, "sum_wys": 1.0},
            noise={"sum_ws": 400.0, "sum_wy": 400.0},
        )
        est = d.ci_monte_carlo(released, draws=500, rng=np.random.default_rng(3))
        assert "monte_carlo_redraw" in est.flags
        assert math.isfinite(est.variance)

    def test_requires_at_least_two_draws(self):
        _, released, rng = seeded_release(1)
        with pytest.raises(d.InvalidConfigError):
            d.ci_monte_carlo(released, draws=1, rng=rng)


class TestAnalyticalCI:
    def test_matches_sum_scale_translation_oracle(self):
        # Independent route: translate the moments to sum scale, add the noise
        # variances there, and evaluate the ratio variance on the sum scale.
        for seed in range(10):
            _, released, _ = seeded_release(seed, epsilon=0.5)
            m = d.plug_in_moments(released)
            total = released.values["sum_w"]
            mean_s = m.mu_s * total
            mean_y = m.mu_y * total
            var_s = m.var_s_bar * total**2 + released.noise_variance["sum_ws"]
            var_y = m.var_y_bar * total**2 + released.noise_variance["sum_wy"]
            cov = m.cov_ys_bar * total**2
            expected = (
                var_s / mean_y**2
                - 2.0 * mean_s * cov / mean_y**3
                + mean_s**2 * var_y / mean_y**4
            )
            est = d.ci_analytical(released)
            assert est.variance == pytest.approx(expected, rel=1e-12)

    def test_zero_noise_equals_no_correction(self):
        sums, _, _ = seeded_release(3)
        released = d.exact_release(sums)
        expected = replace(d.ci_no_correction(released), method=d.Method.ANALYTICAL)
        assert d.ci_analytical(released) == expected

    def test_variance_at_least_no_correction(self):
        for seed in range(20):
            _, released, _ = seeded_release(seed, epsilon=0.2)
            assert d.ci_analytical(released).variance >= d.ci_no_correction(released).variance


class TestScaleConsistency:
    def test_exponentiated_log_interval_contains_ratio_point(self):
        for seed in range(20):
            _, released, rng = seeded_release(seed, epsilon=1.0)
            ratio = d.ci_monte_carlo(released, d.Scale.RATIO, rng=np.random.default_rng(seed))
            log = d.ci_monte_carlo(released, d.Scale.LOG, rng=np.random.default_rng(seed))
            assert math.exp(log.ci_lower) <= ratio.point <= math.exp(log.ci_upper)

    def test_weight_rescaling_with_recalibrated_noise_is_invariant(self):
        rng = np.random.default_rng(4)
        n = 500
        y = (rng.random(n) < 0.5).astype(float)
        s = rng.random(n)
        w = rng.uniform(0.5, 2.0, n)
        c = 2.5
        budget = d.PrivacyBudget(1.0, 1e-6)

        bounds = d.Bounds.binary(w_low=0.5, w_high=2.0)
        sums = d.compute_sums_from_arrays(y, s, w, bounds)
        released = d.release(sums, bounds, budget, d.MechanismKind.GAUSSIAN,
                             np.random.default_rng(99))

        scaled_bounds = d.Bounds.binary(w_low=0.5 * c, w_high=2.0 * c)
        scaled_sums = d.compute_sums_from_arrays(y, s, c * w, scaled_bounds)
        scaled_released = d.release(scaled_sums, scaled_bounds, budget,
                                    d.MechanismKind.GAUSSIAN, np.random.default_rng(99))

        base = d.ci_no_correction(released)
        scaled = d.ci_no_correction(scaled_released)
        assert scaled.point == pytest.approx(base.point, rel=1e-12)
        assert scaled.variance == pytest.approx(base.variance, rel=1e-12)


class TestTwoRatioTest:
    def _estimate(self, point, variance, scale=d.Scale.RATIO):
        lo, hi = d.wald_interval(point, variance, 0.95)
        return d.RatioEstimate(point, variance, scale, d.Method.ANALYTICAL, lo, hi, 0.95)

    def test_identical_estimates(self):
        a = self._estimate(1.2, 0.005)
        result = d.two_ratio_test(a, a)
        assert result.z_statistic == 0.0
        assert result.p_value == 1.0

    def test_reference_example(self):
        a = self._estimate(1.2, 0.0025)
        b = self._estimate(1.0, 0.0075)
        result = d.two_ratio_test(a, b)
        assert result.z_statistic == pytest.approx(2.0, rel=1e-12)
        assert result.p_value == pytest.approx(0.04550026389635842, rel=1e-9)

    def test_scale_mismatch(self):
        with pytest.raises(d.ScaleMismatchError):
            d.two_ratio_test(self._estimate(1.0, 0.1), self._estimate(0.1, 0.1, d.Scale.LOG))

    def test_zero_combined_variance(self):
        with pytest.raises(d.DegenerateVarianceError):
            d.two_ratio_test(self._estimate(1.0, 0.0), self._estimate(1.0, 0.0))

    def test_type_one_error_under_null(self):
        # Both ratios privatized with corrected variances; nominal alpha 0.05.
        rejections = 0
        pairs = 1000
        for i in range(pairs):
            _, rel_a, _ = seeded_release(2 * i, epsilon=1.0, n=5000)
            _, rel_b, _ = seeded_release(2 * i + 1, epsilon=1.0, n=5000)
            result = d.two_ratio_test(d.ci_analytical(rel_a), d.ci_analytical(rel_b))
            rejections += result.p_value < 0.05
        assert 0.03 <= rejections / pairs <= 0.07
