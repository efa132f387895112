"""Mutual information and entropy for Y = X + Z with discrete inputs,
plus the closed-form Gaussian and 1-bit baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .channel_model import (
    SUPPORT_SIGMAS,
    ChannelParams,
    PowerConstraints,
    edge_breakpoints,
    noise_pdf,
    support_radius,
)
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, gaussian_q, integrate

# Densities are floored here before taking logs; below this level the
# integrand contributes nothing at the working tolerances.
PDF_FLOOR = 1e-300


@dataclass(frozen=True)
class InputDistribution:
    """Finite input distribution: atoms of (location, probability)."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValueError("at least one atom is required")
        locs = [a[0] for a in self.atoms]
        probs = [a[1] for a in self.atoms]
        if any(p <= 0 for p in probs):
            raise ValueError("probabilities must be strictly positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("locations must be strictly increasing")

    @classmethod
    def from_arrays(cls, locations, probabilities) -> "InputDistribution":
        return cls(tuple(zip(map(float, locations), map(float, probabilities))))

    @classmethod
    def single(cls, location: float) -> "InputDistribution":
        return cls(((float(location), 1.0),))

    @classmethod
    def binary(cls, amplitude: float) -> "InputDistribution":
        a = float(amplitude)
        return cls(((-a, 0.5), (a, 0.5)))

    @property
    def locations(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def second_moment(self) -> float:
        return float(math.fsum(p * x * x for x, p in self.atoms))

    def satisfies(self, p: PowerConstraints) -> bool:
        """Whether the distribution meets the power constraints with 1e-9 slack."""
        if self.second_moment() > p.avg_power * (1.0 + 1e-9):
            return False
        if p.peak_amplitude is not None:
            peak = max(abs(a[0]) for a in self.atoms)
            if peak > p.peak_amplitude * (1.0 + 1e-9):
                return False
        return True

    def entropy(self) -> float:
        """Entropy of the atom probabilities in nats."""
        return -float(math.fsum(p * math.log(p) for _, p in self.atoms))


class MIEstimate(NamedTuple):
    """Mutual information value with a certified error estimate, in nats."""

    value: float
    error: float


def output_pdf(y, d: InputDistribution, ch: ChannelParams):
    """Mixture density sum_i p_i f_Z(y - x_i) of the channel output."""
    arr = np.asarray(y, dtype=float)
    out = np.zeros_like(arr)
    for x, p in d.atoms:
        out += p * noise_pdf(arr - x, ch)
    if np.ndim(y) == 0:
        return float(out)
    return out


def _merged_support(d: InputDistribution, ch: ChannelParams) -> list[tuple[float, float]]:
    """Per-atom intervals [x_i - R, x_i + R] merged into disjoint intervals."""
    r = support_radius(ch)
    intervals: list[tuple[float, float]] = []
    for x, _ in d.atoms:
        lo, hi = x - r, x + r
        if intervals and lo <= intervals[-1][1]:
            intervals[-1] = (intervals[-1][0], max(intervals[-1][1], hi))
        else:
            intervals.append((lo, hi))
    return intervals


def mutual_information(d: InputDistribution, ch: ChannelParams,
                       spec: QuadratureSpec = DEFAULT_QUADRATURE) -> MIEstimate:
    """I(X; X+Z) in nats for a discrete input over the truncated support.

    Integrates sum_i p_i f_Z(y - x_i) log(f_Z(y - x_i) / q(y)) over the
    union-merged per-atom intervals.  The returned error combines the
    propagated quadrature error with a bound on the truncated tail mass.

    Args:
        d: input distribution.
        ch: channel parameters.
        spec: quadrature tolerances.

    Returns:
        MIEstimate(value, error).
    """
    locs = d.locations
    probs = d.probabilities

    def integrand(y: np.ndarray) -> np.ndarray:
        fk = np.empty((locs.size, y.size))
        for i, x in enumerate(locs):
            fk[i] = noise_pdf(y - x, ch)
        q = np.maximum(probs @ fk, PDF_FLOOR)
        fk = np.maximum(fk, PDF_FLOOR)
        return probs @ (fk * (np.log(fk) - np.log(q)[None, :]))

    total = 0.0
    err = 0.0
    # seed panels at the kernel edges x_i +- delta/2, else wide flat bins hide
    # the sigma-wide transitions from the coarse first pass
    pts = edge_breakpoints(ch, [x for x, _ in d.atoms])
    for lo, hi in _merged_support(d, ch):
        val, e = integrate(integrand, lo, hi, spec, return_error=True, points=pts)
        total += val
        err += e
    # tail beyond each atom's truncated interval: mass 2Q(10) per atom, and the
    # log ratio is bounded by |log PDF_FLOOR| there
    truncation = len(d.atoms) * 2.0 * gaussian_q(SUPPORT_SIGMAS) * abs(math.log(PDF_FLOOR))
    return MIEstimate(total, err + truncation)


def differential_entropy(pdf: Callable, support: tuple[float, float],
                         spec: QuadratureSpec = DEFAULT_QUADRATURE,
                         points=None) -> float:
    """-integral of pdf*log(pdf) over the support, with 0 log 0 = 0.

    Args:
        pdf: density function, vectorized or scalar.
        support: (a, b) interval carrying the mass.
        spec: quadrature tolerances.
        points: optional breakpoints seeding the subdivision, for densities
            with narrow features an initial coarse panel would miss.

    Raises:
        ValueError: if the pdf does not integrate to 1 within 1e-6 on support.
    """
    a, b = support
    mass = integrate(pdf, a, b, spec, points=points)
    if abs(mass - 1.0) > 1e-6:
        raise ValueError(f"pdf integrates to {mass!r} on {support}, not 1")

    def integrand(y):
        p = np.asarray(pdf(y), dtype=float)
        out = np.zeros_like(p)
        ok = p > PDF_FLOOR
        out[ok] = -p[ok] * np.log(p[ok])
        return out

    return integrate(integrand, a, b, spec, points=points)


def gaussian_capacity(p: PowerConstraints, sigma: float) -> float:
    """Closed-form capacity (1/2) log(1 + P/sigma^2) of the unquantized channel.

    Raises:
        ValueError: if a finite peak constraint is supplied; the closed form
            holds only without one.
    """
    if p.bounded:
        raise ValueError("gaussian_capacity requires an unbounded peak amplitude")
    return 0.5 * math.log1p(p.avg_power / (sigma * sigma))


def binary_entropy_nats(q: float) -> float:
    """Binary entropy -q log q - (1-q) log(1-q) in nats, with 0 log 0 = 0."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"binary_entropy_nats requires q in [0, 1], got {q}")
    out = 0.0
    if q > 0.0:
        out -= q * math.log(q)
    if q < 1.0:
        out -= (1.0 - q) * math.log1p(-q)
    return out


def one_bit_capacity(p_avg: float, sigma: float) -> float:
    """Capacity log 2 - H_b(Q(sqrt(P)/sigma)) of the symmetric 1-bit quantizer."""
    if p_avg < 0:
        raise ValueError(f"p_avg must be >= 0, got {p_avg}")
    return math.log(2.0) - binary_entropy_nats(gaussian_q(math.sqrt(p_avg) / sigma))


def one_bit_low_snr_slope(sigma: float) -> float:
    """Low-SNR slope 1/(pi sigma^2) of the symmetric 1-bit quantizer."""
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return 1.0 / (math.pi * sigma * sigma)
