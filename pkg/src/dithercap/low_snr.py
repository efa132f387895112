"""Low-power capacity slope through the Fisher information of the noise.

The capacity slope at zero power is half the Fisher information I(0) of a
location family built on the composite noise Z = N + U.  This module
evaluates that integral with a certified tail closure, exposes the slope,
and provides the large-step tail bound whose constants (theta, mu, lam) are
surfaced as data so the bound's validity window is testable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelParams, edge_breakpoints, noise_pdf, noise_pdf_dx
from .numerics import DEFAULT_QUADRATURE, QuadratureSpec, gaussian_q, integrate

# The score integrand is cut at |t| = delta/2 + 8 sigma; past the cut a
# closed-form bound replaces the integral (see fisher_information).
_TAIL_CUT_SIGMAS = 8.0
_DEFAULT_THETA_SIGMAS = 5.0
_CEILING_SLACK = 1e-3


@dataclass(frozen=True)
class FisherTailParams:
    """Constants of the large-step tail bound.

    theta splits the integration range; mu is the margin by which the
    denominator's lower bound stays positive past the split; lam is the
    output-density floor (per signal unit) on the inner region, positive
    only while theta < delta/2.
    """

    theta: float
    mu: float
    lam: float

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")

    @classmethod
    def for_channel(cls, ch: ChannelParams,
                    theta: float | None = None) -> "FisherTailParams":
        """Evaluate mu and lam for the channel; theta defaults to 5 sigma."""
        if theta is None:
            theta = _DEFAULT_THETA_SIGMAS * ch.sigma
        s2 = ch.sigma * ch.sigma
        mu = 1.0 - s2 / (theta * theta) - math.exp(
            -(theta + 0.5 * ch.delta) * ch.delta / s2
        )
        lam = (gaussian_q(theta / ch.sigma)
               - gaussian_q(0.5 * ch.delta / ch.sigma)) / ch.delta
        return cls(theta=theta, mu=mu, lam=lam)


def fisher_information(x: float, ch: ChannelParams,
                       spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Fisher information of the location family t -> f_Z(t - x).

    Integrates score^2 times the density, i.e. (d/dx f_Z)^2 / f_Z, over
    |t - x| up to delta/2 + 8 sigma.  The discarded tail is replaced by a
    closed-form upper bound on its (positive) contribution: for
    mu_8(delta) > 0 the bound (1/delta) sqrt(2/(pi sigma^2)) e^{-32} / mu_8,
    otherwise the mean-value form (2/delta^2) e^{(delta/sigma)^2}
    Q((8 sigma - delta)/sigma); both are far below the quadrature tolerance
    at any parameters of interest.

    The integral is evaluated in the shifted variable, so the result is
    exactly independent of x.

    Raises:
        RuntimeError: if the result exceeds the 1/sigma^2 ceiling beyond
            slack, which would indicate a numerical defect.
    """
    sigma, delta = ch.sigma, ch.delta
    cut = 0.5 * delta + _TAIL_CUT_SIGMAS * sigma

    def integrand(t):
        t = np.asarray(t, dtype=float)
        d = np.atleast_1d(noise_pdf_dx(t, 0.0, ch))
        f = np.atleast_1d(noise_pdf(t, ch))
        out = np.zeros_like(d)
        pos = f > 0.0
        out[pos] = d[pos] * d[pos] / f[pos]
        return out if np.ndim(t) else float(out[0])

    # score^2 concentrates in a sigma-wide band at t ~ delta/2; seed the
    # subdivision there or a wide flat [0, cut] panel reads as zero
    core = 2.0 * integrate(integrand, 0.0, cut, spec,
                           points=edge_breakpoints(ch, [0.0]))
    th = _TAIL_CUT_SIGMAS * sigma
    mu8 = 1.0 - 1.0 / (_TAIL_CUT_SIGMAS ** 2) - math.exp(
        -(th + 0.5 * delta) * delta / (sigma * sigma)
    )
    if mu8 > 0:
        tail = math.sqrt(2.0 / (math.pi * sigma * sigma)) * math.exp(
            -0.5 * _TAIL_CUT_SIGMAS ** 2
        ) / (mu8 * delta)
    else:
        tail = (2.0 / (delta * delta)) * math.exp((delta / sigma) ** 2) * gaussian_q(
            (th - delta) / sigma
        )
    value = core + tail
    ceiling = 1.0 / (sigma * sigma)
    if value > ceiling * (1.0 + _CEILING_SLACK):
        raise RuntimeError(
            f"fisher information {value} exceeds ceiling {ceiling}; numerical defect"
        )
    return value


def low_snr_slope(ch: ChannelParams,
                  spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Capacity slope at zero power: half the Fisher information at 0.

    The value lies in (0, 1/(2 sigma^2)] up to tolerance, irrespective of
    the peak-to-average ratio.
    """
    return 0.5 * fisher_information(0.0, ch, spec)


def fisher_tail_upper_bound(ch: ChannelParams, tp: FisherTailParams) -> float:
    """Slope bound from the two-region split of the score integral.

    Valid when theta < delta/2 (inner density floor positive) and mu > 0
    (outer denominator margin positive); then the score integral before its
    1/delta prefactor is at most

        B = (1/sqrt(2 pi sigma^2)) [sqrt(2)/(lam delta) + e^{-theta^2/(2 sigma^2)}/mu]

    and the reported slope bound is B/(2 delta).  Wherever valid it weakly
    dominates low_snr_slope, and it vanishes like 1/delta as the step grows.

    Raises:
        ValueError: when a validity condition fails; the message carries the
            violated inequality.
    """
    half = 0.5 * ch.delta
    if not tp.theta < half:
        raise ValueError(
            f"tail bound invalid: theta = {tp.theta} must be < delta/2 = {half}"
        )
    if not tp.mu > 0:
        raise ValueError(
            f"tail bound invalid: mu = {tp.mu} must be > 0 "
            f"(1 - sigma^2/theta^2 - exp(-(theta + delta/2) delta / sigma^2))"
        )
    if not tp.lam > 0:
        raise ValueError(f"tail bound invalid: density floor lam = {tp.lam} must be > 0")
    s2 = ch.sigma * ch.sigma
    b = (math.sqrt(2.0) / (tp.lam * ch.delta)
         + math.exp(-0.5 * tp.theta * tp.theta / s2) / tp.mu) / math.sqrt(
        2.0 * math.pi * s2
    )
    return b / (2.0 * ch.delta)


def high_res_fisher_integrand_limit(y, sigma: float):
    """Vanishing-step limit of the per-step score integrand.

    Returns sqrt(2 pi sigma^2) (y^2/sigma^4) e^{-y^2/(2 sigma^2)}; dividing
    its integral by 4 pi sigma^2 recovers the Gaussian slope 1/(2 sigma^2).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    y = np.asarray(y, dtype=float)
    s2 = sigma * sigma
    out = math.sqrt(2.0 * math.pi * s2) * (y * y / (s2 * s2)) * np.exp(
        -0.5 * y * y / s2
    )
    if out.ndim == 0:
        return float(out)
    return out
