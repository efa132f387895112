"""Zero-power capacity slope, Fisher integral, and the large-step tail bound."""

import math

import numpy as np
import pytest

from dithercap.channel_model import ChannelParams, noise_pdf, noise_pdf_dx
from dithercap.low_snr import (
    FisherTailParams,
    fisher_information,
    fisher_tail_upper_bound,
    high_res_fisher_integrand_limit,
    low_snr_slope,
)
from dithercap.numerics import DEFAULT_QUADRATURE, integrate

CH1 = ChannelParams(sigma=1.0, delta=1.0)

# mpmath oracles (dps=30) for the Fisher information of the composite noise
F_D01 = 0.999167360533134
F_D1 = 0.923084816457101
F_D3 = 0.578158970272828
SLOPE_D100 = 0.009031972855686254
HALF_STEP_F_D1E4 = 0.903197285568654


class TestFisherInformation:
    def test_oracles(self):
        assert fisher_information(0.0, ChannelParams(1.0, 0.1)) == pytest.approx(F_D01, abs=5e-12)
        assert fisher_information(0.0, CH1) == pytest.approx(F_D1, abs=5e-12)
        assert fisher_information(0.0, ChannelParams(1.0, 3.0)) == pytest.approx(F_D3, abs=5e-12)

    def test_location_independent(self):
        assert fisher_information(-3.0, CH1) == fisher_information(0.0, CH1)
        assert fisher_information(0.7, CH1) == fisher_information(0.0, CH1)

    def test_vanishing_step_recovers_gaussian(self):
        f = fisher_information(0.0, ChannelParams(1.0, 1e-2))
        assert abs(f - 1.0) < 1e-4

    def test_ceiling(self):
        for delta in (0.1, 1.0, 10.0, 1e3):
            f = fisher_information(0.0, ChannelParams(1.0, delta))
            assert 0.0 < f <= 1.0 + 2e-3


class TestLowSnrSlope:
    def test_half_fisher(self):
        assert low_snr_slope(CH1) == pytest.approx(0.5 * F_D1, abs=5e-12)

    def test_wide_step_oracle(self):
        # the informative band is a sigma-wide sliver of the step, so this
        # doubles as the breakpoint-seeding regression
        ch = ChannelParams(sigma=1.0, delta=1e2)
        assert low_snr_slope(ch) == pytest.approx(SLOPE_D100, abs=1e-12)

    def test_wide_step_scaling(self):
        # delta * slope approaches a constant as the step grows
        ch = ChannelParams(sigma=1.0, delta=1e4)
        assert 1e4 * low_snr_slope(ch) == pytest.approx(HALF_STEP_F_D1E4, abs=1e-9)

    def test_scale_invariance(self):
        # F(sigma, delta) = F(1, delta/sigma) / sigma^2
        a = low_snr_slope(ChannelParams(sigma=2.0, delta=2.0))
        b = low_snr_slope(CH1) / 4.0
        assert a == pytest.approx(b, rel=1e-6)


class TestFisherTailParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            FisherTailParams(theta=0.0, mu=0.5, lam=0.1)

    def test_for_channel_default_split(self):
        tp = FisherTailParams.for_channel(ChannelParams(1.0, 100.0))
        assert tp.theta == 5.0
        assert tp.mu > 0.9
        assert tp.lam > 0.0

    def test_narrow_step_invalidates(self):
        # theta = 5 sigma reaches past delta/2, so the inner floor is gone
        tp = FisherTailParams.for_channel(CH1)
        assert tp.lam < 0.0
        with pytest.raises(ValueError):
            fisher_tail_upper_bound(CH1, tp)

    def test_split_at_half_step_invalidates(self):
        ch = ChannelParams(1.0, 10.0)
        tp = FisherTailParams.for_channel(ch)
        with pytest.raises(ValueError):
            fisher_tail_upper_bound(ch, tp)


class TestFisherTailUpperBound:
    def test_frozen_value(self):
        ch = ChannelParams(1.0, 100.0)
        bound = fisher_tail_upper_bound(ch, FisherTailParams.for_channel(ch))
        assert bound == pytest.approx(9841.0341839320263, rel=1e-12)

    def test_dominates_slope(self):
        for delta in (20.0, 50.0, 100.0):
            ch = ChannelParams(1.0, delta)
            bound = fisher_tail_upper_bound(ch, FisherTailParams.for_channel(ch))
            assert bound >= low_snr_slope(ch)

    def test_inverse_step_decay(self):
        ch1 = ChannelParams(1.0, 100.0)
        ch2 = ChannelParams(1.0, 200.0)
        b1 = fisher_tail_upper_bound(ch1, FisherTailParams.for_channel(ch1))
        b2 = fisher_tail_upper_bound(ch2, FisherTailParams.for_channel(ch2))
        assert b2 / b1 == pytest.approx(0.5, rel=1e-3)


class TestHighResIntegrandLimit:
    def test_zero_and_validation(self):
        assert high_res_fisher_integrand_limit(0.0, 1.0) == 0.0
        with pytest.raises(ValueError):
            high_res_fisher_integrand_limit(1.0, 0.0)

    def test_normalization(self):
        val = integrate(lambda y: high_res_fisher_integrand_limit(y, 1.0),
                        -10.0, 10.0, DEFAULT_QUADRATURE)
        assert val / (4.0 * math.pi) == pytest.approx(0.5, abs=1e-8)

    def test_matches_score_integrand_at_small_step(self):
        ch = ChannelParams(sigma=1.0, delta=1e-3)
        for y in (0.5, 1.0, 2.0):
            d = noise_pdf_dx(y, 0.0, ch)
            f = noise_pdf(y, ch)
            want = high_res_fisher_integrand_limit(y, 1.0) / (2.0 * math.pi)
            assert d * d / f == pytest.approx(want, rel=5e-3)

    def test_vectorized(self):
        y = np.array([-1.0, 0.0, 1.0])
        out = high_res_fisher_integrand_limit(y, 1.0)
        assert out.shape == (3,)
        assert out[0] == out[2]
