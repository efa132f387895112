"""Dual upper bound and threshold-probe slope lower bound."""

import math

import pytest

from dithercap.bounds import (
    DualBoundParams,
    OptimizedDualBound,
    ThresholdProbe,
    _log_exceed,
    dual_upper_bound,
    dual_upper_bound_optimized,
    kl_ratio_direct,
    slope_lower_bound,
    threshold_kl,
    threshold_prob,
)
from dithercap.channel_model import ChannelParams, PowerConstraints
from dithercap.low_snr import low_snr_slope
from dithercap.numerics import gaussian_q

CH1 = ChannelParams(sigma=1.0, delta=1.0)
PC1 = PowerConstraints(avg_power=1.0)

# closed-form probe geometry oracles frozen from converged runs
SLOPE_LB_D05 = 0.3505407083500106
SLOPE_LB_D1 = 0.4134806261936769
SLOPE_LB_D2 = 0.44788294751467056


class TestDualBoundParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            DualBoundParams(alpha=0.5, beta=0.5)
        with pytest.raises(ValueError):
            DualBoundParams(alpha=1.0, beta=0.0)
        with pytest.raises(ValueError):
            DualBoundParams(alpha=1.0, beta=1.0)

    def test_upsilon(self):
        # 1 + 2[1 - atan(sqrt(2))/pi] at alpha=1, beta=1/2
        dp = DualBoundParams(alpha=1.0, beta=0.5)
        assert dp.upsilon == pytest.approx(2.3918265520306073, abs=1e-14)
        assert dp.upsilon > 1.0

    def test_kappa(self):
        dp = DualBoundParams(alpha=1.5, beta=0.5)
        assert dp.kappa(1.0, 1.0) == pytest.approx(2.0, abs=1e-15)


class TestDualUpperBound:
    def test_collapses_to_log_normalizer(self):
        # eps = 1/delta kills every term but log Upsilon
        dp = DualBoundParams(alpha=1.0, beta=0.5)
        val = dual_upper_bound(PC1, ChannelParams(1.0, 1e8), dp)
        assert val == pytest.approx(math.log(dp.upsilon), abs=1e-12)

    def test_optimized_consistency(self):
        opt = dual_upper_bound_optimized(PC1, ChannelParams(1.0, 1e2))
        assert isinstance(opt, OptimizedDualBound)
        assert opt.value == pytest.approx(
            dual_upper_bound(PC1, ChannelParams(1.0, 1e2), opt.params), abs=1e-15)
        grid_corner = DualBoundParams(alpha=0.5 + 1e-4, beta=1e-8)
        assert opt.value <= dual_upper_bound(PC1, ChannelParams(1.0, 1e2), grid_corner) + 1e-12

    def test_frozen_values(self):
        assert dual_upper_bound_optimized(PC1, CH1).value == pytest.approx(
            2.7459096182180032, rel=1e-12)
        assert dual_upper_bound_optimized(PC1, ChannelParams(1.0, 1e2)).value == pytest.approx(
            0.36195848405507364, rel=1e-12)
        assert dual_upper_bound_optimized(PC1, ChannelParams(1.0, 1e4)).value == pytest.approx(
            0.021355412769281094, rel=1e-12)

    def test_decreasing_in_step(self):
        vals = [dual_upper_bound_optimized(PC1, ChannelParams(1.0, d)).value
                for d in (1.0, 1e2, 1e4)]
        assert vals[0] > vals[1] > vals[2] > 0.0

    def test_deterministic(self):
        a = dual_upper_bound_optimized(PC1, CH1)
        b = dual_upper_bound_optimized(PC1, CH1)
        assert a == b


class TestThresholdProbe:
    def test_validation(self):
        with pytest.raises(ValueError):
            ThresholdProbe(ell0=0, delta_offset=0.5)
        with pytest.raises(ValueError):
            ThresholdProbe(ell0=1, delta_offset=0.0)

    def test_geometry(self):
        tp = ThresholdProbe(ell0=2, delta_offset=0.3)
        assert tp.threshold(CH1) == pytest.approx(1.7, abs=1e-15)
        assert tp.x_probe(CH1) == pytest.approx(2.5, abs=1e-15)


class TestThresholdProb:
    def test_probe_input_nearly_always_exceeds(self):
        tp = ThresholdProbe(ell0=1, delta_offset=5.0)
        p = threshold_prob(tp.x_probe(CH1), tp, CH1)
        assert 1.0 - gaussian_q(5.0) <= p <= 1.0

    def test_zero_input_bracket(self):
        # pointwise Q bounds over the dither period bracket the average
        tp = ThresholdProbe(ell0=1, delta_offset=0.3)
        p0 = threshold_prob(0.0, tp, CH1)
        assert gaussian_q(1.2) <= p0 <= gaussian_q(0.2)

    def test_monotone_in_input(self):
        tp = ThresholdProbe(ell0=1, delta_offset=0.3)
        assert threshold_prob(0.5, tp, CH1) > threshold_prob(0.0, tp, CH1)

    def test_quadrature_agrees_with_closed_form(self):
        for delta in (1.0, 1e2, 1e3):
            ch = ChannelParams(1.0, delta)
            tp = ThresholdProbe(ell0=1, delta_offset=0.5 * ch.sigma)
            for x in (0.0, 0.4 * delta):
                quad = threshold_prob(x, tp, ch)
                closed = math.exp(_log_exceed(x, tp, ch)[0])
                assert quad == pytest.approx(closed, rel=1e-10)

    def test_deep_tail_falls_back_to_log_path(self):
        tp = ThresholdProbe(ell0=64, delta_offset=5.0)
        p0 = threshold_prob(0.0, tp, CH1)
        assert p0 == math.exp(_log_exceed(0.0, tp, CH1)[0])
        assert 0.0 <= p0 < 1e-300


class TestThresholdKl:
    def test_zero_probe_is_zero(self):
        tp = ThresholdProbe(ell0=1, delta_offset=0.5)
        assert threshold_kl(0.0, tp, CH1) == 0.0

    def test_matches_two_point_kl(self):
        tp = ThresholdProbe(ell0=1, delta_offset=0.5)
        x = 1.5
        px = threshold_prob(x, tp, CH1)
        p0 = threshold_prob(0.0, tp, CH1)
        want = px * math.log(px / p0) + (1.0 - px) * math.log((1.0 - px) / (1.0 - p0))
        assert threshold_kl(x, tp, CH1) == pytest.approx(want, rel=1e-9)

    def test_nonnegative(self):
        tp = ThresholdProbe(ell0=2, delta_offset=0.5)
        for x in (0.1, 1.0, 3.0):
            assert threshold_kl(x, tp, CH1) >= 0.0


class TestSlopeLowerBound:
    def test_frozen_values(self):
        assert slope_lower_bound(ChannelParams(1.0, 0.5)) == pytest.approx(
            SLOPE_LB_D05, abs=1e-12)
        assert slope_lower_bound(CH1) == pytest.approx(SLOPE_LB_D1, abs=1e-12)
        assert slope_lower_bound(ChannelParams(1.0, 2.0)) == pytest.approx(
            SLOPE_LB_D2, abs=1e-12)

    def test_ceiling(self):
        for delta in (0.5, 1.0, 2.0, 1e2):
            assert slope_lower_bound(ChannelParams(1.0, delta)) <= 0.5 + 1e-6

    def test_defaults_match_explicit(self):
        assert slope_lower_bound(CH1) == slope_lower_bound(
            CH1, ell0_list=(1, 2, 4, 8, 16, 32, 64), delta_offset=5.0)

    def test_grows_with_cell_count(self):
        small = slope_lower_bound(CH1, ell0_list=[8])
        large = slope_lower_bound(CH1, ell0_list=[64])
        assert small < large == pytest.approx(SLOPE_LB_D1, abs=1e-12)

    def test_empty_list_raises(self):
        with pytest.raises(ValueError):
            slope_lower_bound(CH1, ell0_list=[])


class TestKlRatioDirect:
    def test_zero_probe_raises(self):
        with pytest.raises(ValueError):
            kl_ratio_direct(0.0, CH1)

    def test_small_probe_meets_slope(self):
        assert kl_ratio_direct(1e-3, CH1) == pytest.approx(low_snr_slope(CH1), rel=2e-2)

    def test_frozen_values(self):
        assert kl_ratio_direct(0.7, CH1) == pytest.approx(0.461666329048553, abs=1e-12)
        assert kl_ratio_direct(0.7, ChannelParams(1.0, 1e2)) == pytest.approx(
            9.113450008e-3, rel=1e-8)

    def test_symmetric_in_probe(self):
        assert kl_ratio_direct(-0.7, CH1) == pytest.approx(
            kl_ratio_direct(0.7, CH1), abs=1e-12)

    def test_dominates_detector_kl(self):
        # the one-bit detector discards information, so its KL cannot exceed
        # the channel KL at the same probe
        tp = ThresholdProbe(ell0=1, delta_offset=0.3)
        x = tp.x_probe(CH1)
        direct = kl_ratio_direct(x, CH1)
        assert direct >= threshold_kl(x, tp, CH1) / (x * x) - 1e-9
