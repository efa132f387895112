"""Seeded sampling of the dithered quantizer and the statistical checks."""

import itertools
import math

import numpy as np
import pytest

from dithercap.channel_model import ChannelParams
from dithercap.info_measures import InputDistribution, mutual_information
from dithercap.montecarlo import (
    InsufficientSamplesError,
    SimRun,
    _joint_counts,
    _pmf_check,
    conditional_pmf_check,
    entropy_identity_check,
    mi_estimate,
    sample_second_moment,
    simulate,
)
from dithercap.numerics import SQRT_2PI

CH1 = ChannelParams(sigma=1.0, delta=1.0)
BINARY = InputDistribution.binary(1.0)
RUN_1M = SimRun(seed=42, n_samples=1_000_000, input=BINARY, ch=CH1)


class TestSimRun:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimRun(seed=-1, n_samples=10, input=BINARY, ch=CH1)
        with pytest.raises(ValueError):
            SimRun(seed=2 ** 64, n_samples=10, input=BINARY, ch=CH1)
        with pytest.raises(ValueError):
            SimRun(seed=1, n_samples=0, input=BINARY, ch=CH1)


class TestSimulate:
    def test_deterministic(self):
        run = SimRun(seed=7, n_samples=5, input=BINARY, ch=CH1)
        a = list(simulate(run))
        b = list(simulate(run))
        assert a == b

    def test_counter_based_prefix(self):
        # sample k consumes counter block k, so shorter runs are prefixes
        short = SimRun(seed=7, n_samples=10, input=BINARY, ch=CH1)
        long = SimRun(seed=7, n_samples=1000, input=BINARY, ch=CH1)
        assert list(simulate(short)) == list(itertools.islice(simulate(long), 10))

    def test_record_relations(self):
        run = SimRun(seed=3, n_samples=500, input=BINARY, ch=CH1)
        locs = set(BINARY.locations.tolist())
        for rec in simulate(run):
            assert rec.x in locs
            assert abs(rec.u) <= 0.5 * CH1.delta
            assert rec.y_index == math.floor((rec.y_tilde + rec.u) / CH1.delta)

    def test_vanishing_noise_proxy(self):
        # x = 0 and sigma ~ 0: the index is decided by the dither sign alone
        run = SimRun(seed=11, n_samples=100_000,
                     input=InputDistribution.single(0.0),
                     ch=ChannelParams(sigma=1e-12, delta=1.0))
        recs = list(simulate(run))
        frac0 = sum(r.y_index == 0 for r in recs) / run.n_samples
        assert abs(frac0 - 0.5) <= 3.0 * 0.5 / math.sqrt(run.n_samples)
        mean_u = sum(r.u for r in recs) / run.n_samples
        assert abs(mean_u) <= 4.0 * (1.0 / math.sqrt(12.0)) / math.sqrt(run.n_samples)
        assert all(r.y_index in (-1, 0) for r in recs)


class TestJointCounts:
    def test_totals(self):
        run = SimRun(seed=5, n_samples=20_000, input=BINARY, ch=CH1)
        _keys, counts, n_b = _joint_counts(run, u_bins=4)
        assert int(counts.sum()) == run.n_samples
        assert int(n_b.sum()) == run.n_samples

    def test_u_bins_validation(self):
        with pytest.raises(ValueError):
            _joint_counts(RUN_1M, u_bins=0)


class TestSecondMoment:
    def test_matches_composite_noise(self):
        mean, se = sample_second_moment(RUN_1M)
        want = CH1.sigma ** 2 + CH1.delta ** 2 / 12.0
        assert abs(mean - want) <= 4.0 * se
        assert 0.0 < se < 2e-3


class TestPmfCheck:
    def test_passes_with_dither(self):
        report = conditional_pmf_check(RUN_1M, u_bins=8, tol_sigmas=4.0)
        assert report.passed
        assert report.worst_deviation_sigmas <= 4.0
        assert report.cells_checked >= 50
        assert report.allowance == pytest.approx(
            0.5 * (CH1.delta / 8) / (SQRT_2PI * CH1.sigma), abs=1e-15)

    def test_undithered_control_fails(self):
        # without the dither inside the quantizer the conditional pmf
        # identity is false, and a million samples resolve that
        report = _pmf_check(RUN_1M, u_bins=8, tol_sigmas=4.0, dithered=False)
        assert not report.passed
        assert report.worst_deviation_sigmas > 4.0

    def test_insufficient_samples(self):
        run = SimRun(seed=42, n_samples=200_000, input=BINARY, ch=CH1)
        with pytest.raises(InsufficientSamplesError) as exc_info:
            conditional_pmf_check(run, u_bins=8, tol_sigmas=4.0)
        assert len(exc_info.value.cells) > 0


class TestEntropyIdentity:
    def test_binary_input_passes(self):
        report = entropy_identity_check(RUN_1M)
        assert report.passed
        assert abs(report.output_entropy_estimate
                   - report.output_entropy_model) <= report.output_tolerance
        assert abs(report.noise_entropy_estimate
                   - report.noise_entropy_model) <= report.noise_tolerance

    def test_single_atom_models_coincide(self):
        # with one atom the output law is the noise law shifted, so both
        # identities share the same differential entropy
        run = SimRun(seed=9, n_samples=200_000,
                     input=InputDistribution.single(2.0), ch=CH1)
        report = entropy_identity_check(run)
        assert report.passed
        assert report.output_entropy_model == pytest.approx(
            report.noise_entropy_model, abs=1e-9)


class TestMiEstimate:
    def test_binary_within_own_bar(self):
        est = mi_estimate(RUN_1M, u_bins=8)
        truth = mutual_information(BINARY, CH1).value
        assert abs(est.value - truth) <= est.error
        assert est.error < 0.01

    def test_single_atom_is_noise_floor(self):
        run = SimRun(seed=9, n_samples=200_000,
                     input=InputDistribution.single(0.0), ch=CH1)
        est = mi_estimate(run, u_bins=8)
        assert est.value <= est.error

    def test_atom_limit(self):
        locs = np.arange(17.0)
        probs = np.full(17, 1.0 / 17.0)
        run = SimRun(seed=1, n_samples=100,
                     input=InputDistribution.from_arrays(locs, probs), ch=CH1)
        with pytest.raises(ValueError):
            mi_estimate(run, u_bins=2)
