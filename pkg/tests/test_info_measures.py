"""Mutual information, differential entropy, and closed-form baselines."""

import math

import numpy as np
import pytest

from dithercap.channel_model import ChannelParams, PowerConstraints, edge_breakpoints, noise_pdf, support_radius
from dithercap.info_measures import (
    InputDistribution,
    binary_entropy_nats,
    differential_entropy,
    gaussian_capacity,
    mutual_information,
    one_bit_capacity,
    one_bit_low_snr_slope,
    output_pdf,
)

CH1 = ChannelParams(sigma=1.0, delta=1.0)

# mpmath oracles (dps=30): MI of the +-1 binary input and the kernel entropy
MI_BINARY_D1 = 0.3190275449767656
H_NOISE_D1 = 1.4589588241050992
H_NOISE_D1E4 = 9.210521011433296
ONE_BIT_CAP_P1 = 0.2557139396328262


class TestInputDistribution:
    def test_validation(self):
        with pytest.raises(ValueError):
            InputDistribution(())
        with pytest.raises(ValueError):
            InputDistribution(((0.0, 0.5), (1.0, -0.5)))
        with pytest.raises(ValueError):
            InputDistribution(((0.0, 0.5), (1.0, 0.6)))
        with pytest.raises(ValueError):
            InputDistribution(((1.0, 0.5), (1.0, 0.5)))
        with pytest.raises(ValueError):
            InputDistribution(((2.0, 0.5), (1.0, 0.5)))

    def test_constructors(self):
        d = InputDistribution.binary(2.0)
        assert d.atoms == ((-2.0, 0.5), (2.0, 0.5))
        assert InputDistribution.single(3.0).atoms == ((3.0, 1.0),)
        d2 = InputDistribution.from_arrays([-1, 0, 1], [0.25, 0.5, 0.25])
        assert np.allclose(d2.locations, [-1.0, 0.0, 1.0])
        assert np.allclose(d2.probabilities, [0.25, 0.5, 0.25])

    def test_moments_and_entropy(self):
        assert InputDistribution.binary(2.0).second_moment() == 4.0
        d = InputDistribution.from_arrays([-1, 0, 2], [0.25, 0.5, 0.25])
        assert d.second_moment() == pytest.approx(0.25 + 1.0, abs=1e-15)
        assert InputDistribution.binary(1.0).entropy() == pytest.approx(math.log(2.0), abs=1e-15)
        assert InputDistribution.single(5.0).entropy() == 0.0

    def test_satisfies(self):
        d = InputDistribution.binary(2.0)
        assert d.satisfies(PowerConstraints(avg_power=4.0))
        assert not d.satisfies(PowerConstraints(avg_power=3.9))
        assert not d.satisfies(PowerConstraints(avg_power=4.0, peak_amplitude=1.5))
        assert d.satisfies(PowerConstraints(avg_power=4.0, peak_amplitude=2.0))


class TestOutputPdf:
    def test_matches_hand_mixture(self):
        d = InputDistribution.from_arrays([-1, 2], [0.3, 0.7])
        y = np.linspace(-4.0, 5.0, 31)
        want = 0.3 * noise_pdf(y + 1.0, CH1) + 0.7 * noise_pdf(y - 2.0, CH1)
        assert np.allclose(output_pdf(y, d, CH1), want, rtol=0, atol=1e-15)
        assert isinstance(output_pdf(0.5, d, CH1), float)

    def test_binary_symmetry(self):
        d = InputDistribution.binary(1.0)
        y = np.linspace(0.0, 4.0, 17)
        assert np.allclose(output_pdf(y, d, CH1), output_pdf(-y, d, CH1), rtol=0, atol=1e-16)


class TestMutualInformation:
    def test_single_atom_is_zero(self):
        est = mutual_information(InputDistribution.single(0.7), CH1)
        assert abs(est.value) <= max(est.error, 1e-10)

    def test_binary_oracle(self):
        est = mutual_information(InputDistribution.binary(1.0), CH1)
        assert est.value == pytest.approx(MI_BINARY_D1, abs=1e-12)
        assert abs(est.value - MI_BINARY_D1) <= est.error

    def test_binary_wide_step_oracle(self):
        # delta >> spacing: the informative sigma-wide edges sit inside flat
        # plateaus, so this doubles as the breakpoint-seeding regression
        ch = ChannelParams(sigma=1.0, delta=1e3)
        est = mutual_information(InputDistribution.binary(1.0), ch)
        assert est.value == pytest.approx(0.000729475690453896, abs=1e-12)

    def test_bounds_and_shift_invariance(self):
        d = InputDistribution.binary(1.0)
        est = mutual_information(d, CH1)
        assert 0.0 < est.value < d.entropy()
        shifted = InputDistribution.from_arrays([-0.7, 1.3], [0.5, 0.5])
        est2 = mutual_information(shifted, CH1)
        assert est2.value == pytest.approx(est.value, abs=1e-9)


class TestDifferentialEntropy:
    def test_gaussian(self):
        pdf = lambda y: np.exp(-0.5 * np.asarray(y) ** 2) / math.sqrt(2.0 * math.pi)
        h = differential_entropy(pdf, (-12.0, 12.0))
        assert h == pytest.approx(0.5 * math.log(2.0 * math.pi * math.e), abs=1e-10)

    def test_uniform(self):
        pdf = lambda y: np.ones_like(np.asarray(y, dtype=float))
        assert differential_entropy(pdf, (0.0, 1.0)) == pytest.approx(0.0, abs=1e-12)

    def test_mass_check(self):
        pdf = lambda y: np.exp(-0.5 * np.asarray(y) ** 2) / math.sqrt(2.0 * math.pi)
        with pytest.raises(ValueError):
            differential_entropy(pdf, (0.0, 12.0))

    def test_noise_kernel_needs_points(self):
        ch = ChannelParams(sigma=1.0, delta=1e4)
        r = support_radius(ch)
        pdf = lambda y: noise_pdf(y, ch)
        # the coarse first panel reads only the flat plateau and the mass
        # check sees 1.002, not 1
        with pytest.raises(ValueError):
            differential_entropy(pdf, (-r, r))
        h = differential_entropy(pdf, (-r, r), points=edge_breakpoints(ch, [0.0]))
        assert h == pytest.approx(H_NOISE_D1E4, abs=1e-9)

    def test_noise_kernel_oracle(self):
        r = support_radius(CH1)
        pdf = lambda y: noise_pdf(y, CH1)
        h = differential_entropy(pdf, (-r, r), points=edge_breakpoints(CH1, [0.0]))
        assert h == pytest.approx(H_NOISE_D1, abs=1e-10)


class TestClosedForms:
    def test_gaussian_capacity(self):
        assert gaussian_capacity(PowerConstraints(avg_power=1.0), 1.0) == pytest.approx(
            0.5 * math.log(2.0), abs=1e-15)
        assert gaussian_capacity(PowerConstraints(avg_power=3.0), 1.0) == pytest.approx(
            math.log(2.0), abs=1e-15)
        with pytest.raises(ValueError):
            gaussian_capacity(PowerConstraints(avg_power=1.0, peak_amplitude=2.0), 1.0)

    def test_binary_entropy(self):
        assert binary_entropy_nats(0.5) == pytest.approx(math.log(2.0), abs=1e-15)
        assert binary_entropy_nats(0.0) == 0.0
        assert binary_entropy_nats(1.0) == 0.0
        with pytest.raises(ValueError):
            binary_entropy_nats(1.5)

    def test_one_bit_capacity(self):
        assert one_bit_capacity(1.0, 1.0) == pytest.approx(ONE_BIT_CAP_P1, abs=1e-12)
        assert one_bit_capacity(0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
        # scale invariance in P/sigma^2
        assert one_bit_capacity(4.0, 2.0) == pytest.approx(one_bit_capacity(1.0, 1.0), abs=1e-15)
        with pytest.raises(ValueError):
            one_bit_capacity(-1.0, 1.0)

    def test_one_bit_slope(self):
        assert one_bit_low_snr_slope(1.0) == pytest.approx(1.0 / math.pi, abs=1e-15)
        assert one_bit_low_snr_slope(2.0) == pytest.approx(0.25 / math.pi, abs=1e-15)
        with pytest.raises(ValueError):
            one_bit_low_snr_slope(0.0)

    def test_one_bit_slope_is_capacity_derivative(self):
        # central difference of one_bit_capacity at P -> 0
        h = 1e-6
        num = (one_bit_capacity(2.0 * h, 1.0) - one_bit_capacity(h, 1.0)) / h
        assert num == pytest.approx(1.0 / math.pi, rel=1e-3)
