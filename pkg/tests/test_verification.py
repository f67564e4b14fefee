"""Tests for partitioning, tolerance intervals, the noised count, and the
end-to-end verification measure."""

import math

import numpy as np
import pytest
from scipy import stats

from simverify.survey import (
    EstimandKind,
    SurveySample,
    draw_pps_sample,
    generate_population,
    horvitz_thompson_total,
    srs_estimate,
)
from simverify.synthesis import synthesize_srs
from simverify.verification import (
    IntervalMode,
    PartitionScheme,
    ToleranceKind,
    ToleranceSpec,
    VerificationResult,
    build_interval,
    count_within,
    partition,
    partition_estimate,
    privatize_count,
    verify,
)


def pps_sample(N, n, seed):
    pop = generate_population(N, seed=seed)
    return draw_pps_sample(pop, n, seed=seed + 1)


class TestPartition:
    def test_exact_division(self):
        s = pps_sample(1000, 100, 1)
        scheme = partition(s, 4, seed=0)
        assert np.array_equal(scheme.sizes, [25, 25, 25, 25])

    def test_remainder_spread_one_per_partition(self):
        s = pps_sample(1000, 103, 2)
        scheme = partition(s, 4, seed=0)
        assert sorted(scheme.sizes) == [25, 26, 26, 26]

    def test_singletons(self):
        s = pps_sample(100, 5, 3)
        scheme = partition(s, 5, seed=0)
        assert np.array_equal(np.sort(scheme.sizes), np.ones(5))

    def test_balance_and_disjointness_sweep(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(2, 300))
            M = int(rng.integers(2, n + 1))
            s = pps_sample(2000, n, int(rng.integers(1e6)))
            scheme = partition(s, M, seed=int(rng.integers(1e6)))
            sizes = np.bincount(scheme.assignment, minlength=M)
            assert sizes.sum() == n  # disjoint cover: every record exactly once
            assert sizes.min() >= 1
            assert sizes.max() - sizes.min() <= 1

    def test_deterministic(self):
        s = pps_sample(500, 60, 4)
        a = partition(s, 7, seed=5)
        b = partition(s, 7, seed=5)
        assert np.array_equal(a.assignment, b.assignment)

    def test_invalid_m_rejected(self):
        s = pps_sample(100, 10, 5)
        with pytest.raises(ValueError):
            partition(s, 1, seed=0)
        with pytest.raises(ValueError):
            partition(s, 11, seed=0)


class TestPartitionEstimate:
    def test_hand_computed_total(self):
        # Two records (x=2, w=2), (x=3, w=4) as one partition of a sample
        # with n=4: inflation n/n_k = 2, estimate (2*2)*2 + (4*2)*3 = 32.
        s = SurveySample(
            ids=np.arange(4),
            x=np.array([2.0, 3.0, 9.0, 9.0]),
            pi=np.array([0.5, 0.25, 1.0, 1.0]),
            N=100,
        )
        scheme = PartitionScheme(M=2, assignment=np.array([0, 0, 1, 1]))
        assert partition_estimate(s, scheme, 0, EstimandKind.TOTAL) == pytest.approx(32.0)

    def test_whole_sample_partition_equals_ht(self):
        s = pps_sample(2000, 80, 6)
        scheme = PartitionScheme(M=1, assignment=np.zeros(80, dtype=np.int64))
        assert partition_estimate(s, scheme, 0, EstimandKind.TOTAL) == pytest.approx(
            horvitz_thompson_total(s), rel=1e-12
        )

    def test_mean_inflation_cancels(self):
        s = pps_sample(2000, 90, 7)
        scheme = partition(s, 3, seed=1)
        for k in range(3):
            members = scheme.assignment == k
            plain_ratio = float(
                np.sum(s.w[members] * s.x[members]) / np.sum(s.w[members])
            )
            inflated = partition_estimate(s, scheme, k, EstimandKind.MEAN)
            assert inflated == pytest.approx(plain_ratio, rel=1e-12)

    def test_mean_invariant_to_weight_rescaling(self):
        s = pps_sample(2000, 90, 8)
        scheme = partition(s, 5, seed=2)
        rescaled = SurveySample(ids=s.ids, x=s.x, pi=s.pi / 3.0, N=s.N)
        for k in range(5):
            assert partition_estimate(
                rescaled, scheme, k, EstimandKind.MEAN
            ) == pytest.approx(partition_estimate(s, scheme, k, EstimandKind.MEAN), rel=1e-9)


class TestBuildInterval:
    def test_proportional_fixed(self):
        spec = ToleranceSpec(ToleranceKind.PROPORTIONAL, 0.10, IntervalMode.FIXED)
        assert build_interval(100_000.0, 1000.0, spec, 25) == pytest.approx(
            (90_000.0, 110_000.0)
        )

    def test_sd_multiple_adjusted_with_explicit_gamma(self):
        spec = ToleranceSpec(
            ToleranceKind.SD_MULTIPLE, 3.0, IntervalMode.ADJUSTED, gamma=5.0
        )
        assert build_interval(100_000.0, 1000.0, spec, 25) == pytest.approx(
            (85_000.0, 115_000.0)
        )

    def test_gamma_defaults_to_sqrt_m(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 3.0, IntervalMode.ADJUSTED)
        assert build_interval(0.0, 1.0, spec, 25) == pytest.approx((-15.0, 15.0))
        assert build_interval(0.0, 1.0, spec, 16) == pytest.approx((-12.0, 12.0))

    def test_fixed_ignores_gamma(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 2.0, IntervalMode.FIXED, gamma=9.0)
        assert build_interval(10.0, 1.0, spec, 25) == pytest.approx((8.0, 12.0))

    def test_tiny_alpha_degenerates(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 1e-300, IntervalMode.FIXED)
        lo, hi = build_interval(7.0, 1.0, spec, 25)
        assert lo == pytest.approx(7.0) and hi == pytest.approx(7.0)

    def test_bad_spec_rejected(self):
        with pytest.raises(ValueError):
            ToleranceSpec(ToleranceKind.SD_MULTIPLE, 0.0)
        with pytest.raises(ValueError):
            ToleranceSpec(ToleranceKind.SD_MULTIPLE, 1.0, IntervalMode.ADJUSTED, gamma=0.5)


class TestCountWithin:
    def test_all_inside(self):
        assert count_within([1.0, 2.0, 3.0], (0.0, 10.0)) == 3

    def test_direct_count(self):
        assert count_within([1.0, 2.0, 3.0], (1.5, 2.5)) == 1

    def test_empty(self):
        assert count_within([], (0.0, 1.0)) == 0

    def test_closed_boundaries(self):
        assert count_within([1.0, 2.0], (1.0, 2.0)) == 2


class TestPrivatizeCount:
    def test_median_uniform_gives_no_noise(self):
        assert privatize_count(7, 1.0, 0.5) == 7.0

    def test_hand_computed_inverse_cdf(self):
        assert privatize_count(10, 1.0, 0.9) == pytest.approx(10 - math.log(0.2))

    def test_symmetric_tails(self):
        up = privatize_count(0, 2.0, 0.9)
        down = privatize_count(0, 2.0, 0.1)
        assert up == pytest.approx(-down)

    def test_noise_variance(self):
        eps = 100.0
        rng = np.random.default_rng(1)
        etas = np.array([privatize_count(0, eps, u) for u in rng.random(10_000)])
        assert abs(np.var(etas) - 2 / eps**2) < 0.2 * (2 / eps**2)

    def test_distribution_ks(self):
        rng = np.random.default_rng(2)
        for eps in (0.5, 1.0, 5.0):
            etas = np.array([privatize_count(0, eps, u) for u in rng.random(10_000)])
            assert stats.kstest(etas, stats.laplace(scale=1 / eps).cdf).pvalue > 0.001

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            privatize_count(1, 0.0, 0.5)
        with pytest.raises(ValueError):
            privatize_count(1, 1.0, 0.0)
        with pytest.raises(ValueError):
            privatize_count(1, 1.0, 1.0)


class TestVerify:
    def setup_method(self):
        self.pop = generate_population(10_000, seed=314)
        self.conf = draw_pps_sample(self.pop, 600, seed=159)
        synth = synthesize_srs(self.pop, 600, seed=265)
        self.est0, self.sd0 = srs_estimate(synth.x, self.pop.N, EstimandKind.TOTAL)

    def test_interval_covering_everything_counts_m(self):
        spec = ToleranceSpec(ToleranceKind.PROPORTIONAL, 1e6, IntervalMode.FIXED)
        res = verify(
            self.conf, self.est0, self.sd0, EstimandKind.TOTAL, spec, 25, 1e9, seed=1
        )
        assert res.s_noisy == pytest.approx(25.0, abs=1e-6)

    def test_degenerate_interval_counts_zero(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 1e-300, IntervalMode.FIXED)
        res = verify(
            self.conf, self.est0, self.sd0, EstimandKind.TOTAL, spec, 25, 1e9, seed=1
        )
        assert res.s_noisy == pytest.approx(0.0, abs=1e-6)

    def test_golden_regression(self):
        # Recorded from the first verified run of this pipeline.
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 3.0, IntervalMode.ADJUSTED)
        res = verify(
            self.conf,
            self.est0,
            self.sd0,
            EstimandKind.TOTAL,
            spec,
            20,
            1.0,
            seed=358979,
        )
        assert self.est0 == 99025.94133125436
        assert self.sd0 == 1254.3688646593146
        assert res.s_noisy == 18.46158783290937
        assert res.interval == (82196.8170298296, 115855.06563267912)

    def test_deterministic(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 3.0, IntervalMode.ADJUSTED)
        a = verify(self.conf, self.est0, self.sd0, EstimandKind.TOTAL, spec, 10, 1.0, 7)
        b = verify(self.conf, self.est0, self.sd0, EstimandKind.TOTAL, spec, 10, 1.0, 7)
        assert a == b

    def test_single_record_change_moves_count_by_at_most_one(self):
        # Exhaustive neighboring-dataset sweep at small n with the
        # partition assignment held fixed; validates unit sensitivity.
        pop = generate_population(200, seed=5)
        for n, M in [(12, 2), (18, 3), (24, 4), (25, 5), (30, 6)]:
            conf = draw_pps_sample(pop, n, seed=n)
            scheme = partition(conf, M, seed=1)
            spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 2.0, IntervalMode.ADJUSTED)
            interval = build_interval(self.est0, self.sd0, spec, M)

            def count(sample):
                ests = [
                    partition_estimate(sample, scheme, k, EstimandKind.TOTAL)
                    for k in range(M)
                ]
                return count_within(ests, interval)

            s_base = count(conf)
            for i in range(n):
                for new_x, new_pi in [(0.0, 1.0), (1e4, 0.01), (-500.0, 0.5)]:
                    x = conf.x.copy()
                    pi = conf.pi.copy()
                    x[i], pi[i] = new_x, new_pi
                    neighbor = SurveySample(ids=conf.ids, x=x, pi=pi, N=conf.N)
                    assert abs(count(neighbor) - s_base) <= 1

    def test_result_never_carries_true_count(self):
        spec = ToleranceSpec(ToleranceKind.SD_MULTIPLE, 3.0, IntervalMode.ADJUSTED)
        res = verify(self.conf, self.est0, self.sd0, EstimandKind.TOTAL, spec, 10, 1.0, 7)
        assert set(res.__dataclass_fields__) == {"s_noisy", "M", "epsilon", "interval"}


class TestVerificationResultJson:
    def test_round_trip(self):
        res = VerificationResult(s_noisy=3.25, M=10, epsilon=0.5, interval=(-1.0, 2.0))
        back = VerificationResult.from_json(res.to_json())
        assert back == res

    def test_json_field_names(self):
        import json

        payload = json.loads(
            VerificationResult(1.0, 5, 1.0, (0.0, 1.0)).to_json()
        )
        assert set(payload) == {"s_noisy", "m", "epsilon", "interval"}
        assert set(payload["interval"]) == {"lo", "hi"}
