"""Analytic capacity bounds: a dual upper bound and a threshold-probe lower bound.

The upper bound comes from a dual (auxiliary output density) argument on the
normalized channel with effective noise scale eps = 1/delta; it is a valid
upper bound on the quantized-channel capacity for every peak limit and is
informative when delta is large.  The lower bound probes a one-bit threshold
comparison: the relative entropy between the threshold exceedance laws at a
probe input and at zero, divided by the squared probe, certifies a lower
bound on the low-power capacity slope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .channel_model import (ChannelParams, PowerConstraints, edge_breakpoints,
                            log_noise_pdf, noise_pdf, support_radius)
from .numerics import (DEFAULT_QUADRATURE, QuadratureSpec, gaussian_q, integrate,
                       log_gaussian_q_running_integral)

_SLOPE_CAP_SLACK = 1e-6

# default probe geometry: exceedance offset 5 sigma, cell counts 2^0..2^6
_DEFAULT_OFFSET_SIGMAS = 5.0
_DEFAULT_ELL0 = (1, 2, 4, 8, 16, 32, 64)


@dataclass(frozen=True)
class DualBoundParams:
    """Free parameters of the dual output density.

    upsilon is the density's normalizer, derived from (alpha, beta); kappa
    additionally needs the power budget and noise scale, so it is exposed as
    a method rather than a stored field.
    """

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0,1), got {self.beta}")

    @property
    def upsilon(self) -> float:
        """Normalizer 1 + 2[alpha - (1/pi) arctan(alpha/sqrt(beta))]; > 1."""
        return 1.0 + 2.0 * (
            self.alpha - math.atan(self.alpha / math.sqrt(self.beta)) / math.pi
        )

    def kappa(self, avg_power: float, sigma: float) -> float:
        """Curvature scale (P + sigma^2) / (alpha - 1/2)^2."""
        return (avg_power + sigma * sigma) / (self.alpha - 0.5) ** 2


class OptimizedDualBound(NamedTuple):
    value: float
    params: DualBoundParams


def _xi_log_xi_sup(c: float) -> float:
    """max of -xi*log(xi) over 0 < xi <= c, in closed form."""
    if c >= 1.0 / math.e:
        return 1.0 / math.e
    return -c * math.log(c)


def dual_upper_bound(p: PowerConstraints, ch: ChannelParams,
                     dp: DualBoundParams) -> float:
    """Upper bound on the quantized-channel capacity from a dual density.

    With eps = 1/delta and kappa = (P + sigma^2)/(alpha - 1/2)^2:

        log Upsilon
        + eps^2 kappa [log(pi/sqrt(beta)) + log(1 + beta[eps^2(P+sigma^2) + 1/12])]
        + sup_{0 < xi <= eps^2 kappa} |xi log xi|

    Valid for every peak amplitude; tight only when delta is large against
    both sqrt(P) and sigma.
    """
    eps = 1.0 / ch.delta
    varsum = p.avg_power + ch.sigma * ch.sigma
    c = eps * eps * dp.kappa(p.avg_power, ch.sigma)
    mid = math.log(math.pi) - 0.5 * math.log(dp.beta) + math.log1p(
        dp.beta * (eps * eps * varsum + 1.0 / 12.0)
    )
    return math.log(dp.upsilon) + c * mid + _xi_log_xi_sup(c)


def dual_upper_bound_optimized(p: PowerConstraints,
                               ch: ChannelParams) -> OptimizedDualBound:
    """Minimize dual_upper_bound over a fixed logarithmic parameter grid.

    alpha ranges over 1/2 + logspace(-4, log10(9.5), 48) (so up to 10) and
    beta over logspace(-8, log10(0.999), 48); ties break toward the lowest
    alpha, then the lowest beta, by scan order.
    """
    alphas = 0.5 + np.logspace(-4.0, math.log10(9.5), 48)
    betas = np.logspace(-8.0, math.log10(0.999), 48)
    best = None
    for a in alphas:
        for b in betas:
            dp = DualBoundParams(alpha=float(a), beta=float(b))
            val = dual_upper_bound(p, ch, dp)
            if best is None or val < best.value:
                best = OptimizedDualBound(value=val, params=dp)
    return best


@dataclass(frozen=True)
class ThresholdProbe:
    """Exceedance-test geometry: cell count ell0 and offset delta_offset.

    The detector compares the channel output against delta*ell0 -
    delta_offset; the matched probe input sits at delta*ell0 + delta/2.
    """

    ell0: int
    delta_offset: float

    def __post_init__(self) -> None:
        if not self.ell0 > 0:
            raise ValueError(f"ell0 must be a positive count, got {self.ell0}")
        if not self.delta_offset > 0:
            raise ValueError(f"delta_offset must be > 0, got {self.delta_offset}")

    def threshold(self, ch: ChannelParams) -> float:
        return ch.delta * self.ell0 - self.delta_offset

    def x_probe(self, ch: ChannelParams) -> float:
        return ch.delta * self.ell0 + 0.5 * ch.delta


def _log_interval_q(lo: float, hi: float, ch: ChannelParams) -> float:
    """log of (sigma/delta) * [G(lo) - G(hi)], stable in every regime.

    G is the running integral of Q; the difference is the average of Q over
    an interval of width delta/sigma, i.e. an exceedance probability
    averaged over the dither.
    """
    ga = log_gaussian_q_running_integral(lo)
    gb = log_gaussian_q_running_integral(hi)
    return (
        math.log(ch.sigma / ch.delta)
        + ga
        + math.log(-math.expm1(min(gb - ga, -1e-300)))
    )


def _log_exceed(x: float, tp: ThresholdProbe, ch: ChannelParams):
    """(log P[exceed | x], log P[not exceed | x]) for the dithered detector."""
    t = tp.threshold(ch)
    h = 0.5 * ch.delta
    lp = _log_interval_q((t - x - h) / ch.sigma, (t - x + h) / ch.sigma, ch)
    lc = _log_interval_q((x - t - h) / ch.sigma, (x - t + h) / ch.sigma, ch)
    return lp, lc


def threshold_prob(x: float, tp: ThresholdProbe, ch: ChannelParams,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """P(exceedance | X = x): the dither-averaged Q of the threshold gap.

    Computed as (1/delta) * integral of Q((T - x - u)/sigma) du over one
    dither period, T = delta*ell0 - delta_offset.  When the quadrature
    result underflows (threshold hundreds of sigmas past x), the closed-form
    log path supplies the value, which may still round to 0 in double
    precision.
    """
    t = tp.threshold(ch)
    h = 0.5 * ch.delta

    def integrand(u):
        return gaussian_q((t - x - u) / ch.sigma)

    # the Q transition sits at u = t - x, sigma-wide; seed it or a coarse
    # panel over a wide dither period lands on the flat sides only
    step = 13.0 * ch.sigma
    val = integrate(integrand, -h, h, spec,
                    points=[t - x - step, t - x, t - x + step]) / ch.delta
    if val <= 0.0:
        val = math.exp(_log_exceed(x, tp, ch)[0])
    return min(val, 1.0)


def threshold_kl(x: float, tp: ThresholdProbe, ch: ChannelParams) -> float:
    """Relative entropy between exceedance laws at probe x and at 0.

    Binary KL assembled in log scale: with p_x the exceedance probability
    at input x,

        D = p_x [log p_x - log p_0] + (1 - p_x) [log(1-p_x) - log(1-p_0)],

    which stays finite and accurate when p_0 underflows (thresholds far
    beyond the noise scale), where the textbook three-term form would need
    log of 0.
    """
    lp_x, lc_x = _log_exceed(x, tp, ch)
    lp_0, lc_0 = _log_exceed(0.0, tp, ch)
    px = math.exp(lp_x)
    cx = math.exp(lc_x)
    return max(px * (lp_x - lp_0) + cx * (lc_x - lc_0), 0.0)


def slope_lower_bound(ch: ChannelParams, ell0_list=None,
                      delta_offset: float | None = None) -> float:
    """Certified lower bound on the zero-power capacity slope.

    Maximizes threshold_kl(x_probe)/x_probe^2 over the cell counts in
    ell0_list (default powers of two up to 64) at the given exceedance
    offset (default 5 sigma).  Must not exceed the 1/(2 sigma^2) ceiling.

    Raises:
        RuntimeError: if the computed bound lands above the ceiling, which
            would indicate a numerical defect, not a channel property.
    """
    if delta_offset is None:
        delta_offset = _DEFAULT_OFFSET_SIGMAS * ch.sigma
    if ell0_list is None:
        ell0_list = _DEFAULT_ELL0
    ell0_list = list(ell0_list)
    if not ell0_list:
        raise ValueError("ell0_list must be nonempty")
    best = 0.0
    for ell0 in ell0_list:
        tp = ThresholdProbe(ell0=int(ell0), delta_offset=delta_offset)
        x = tp.x_probe(ch)
        best = max(best, threshold_kl(x, tp, ch) / (x * x))
    cap = 0.5 / (ch.sigma * ch.sigma)
    if best > cap + _SLOPE_CAP_SLACK:
        raise RuntimeError(
            f"slope bound {best} exceeds the ceiling {cap}; numerical defect"
        )
    return best


def kl_ratio_direct(x: float, ch: ChannelParams,
                    spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """D(f_Z(. - x) || f_Z) / x^2 by quadrature; diagnostic.

    The reference density enters through its log-scale form, so the ratio
    remains meaningful even when f_Z underflows at the shifted support.
    Only 0 <= value <= 1/(2 sigma^2) + slack is asserted; the supremum over
    x need not be attained at any finite probe.

    Raises:
        ValueError: if x == 0.
        RuntimeError: if the value escapes [0, 1/(2 sigma^2) + slack].
    """
    if x == 0:
        raise ValueError("kl_ratio_direct requires x != 0")
    r = support_radius(ch)

    def integrand(y):
        y = np.asarray(y, dtype=float)
        f1 = noise_pdf(y - x, ch)
        lf0 = log_noise_pdf(y, ch)
        f1 = np.atleast_1d(f1)
        lf0 = np.atleast_1d(lf0)
        out = np.zeros_like(f1)
        pos = f1 > 0.0
        out[pos] = f1[pos] * (np.log(f1[pos]) - lf0[pos])
        return out if np.ndim(y) else float(out[0])

    # edges of both densities (y = +-delta/2 and y = x +- delta/2) carry the
    # only structure once delta >> sigma
    val = integrate(integrand, x - r - ch.sigma, x + r + ch.sigma, spec,
                    points=edge_breakpoints(ch, [0.0, x])) / (x * x)
    val = max(val, 0.0)
    cap = 0.5 / (ch.sigma * ch.sigma)
    if val > cap + _SLOPE_CAP_SLACK:
        raise RuntimeError(
            f"kl ratio {val} exceeds the ceiling {cap}; numerical defect"
        )
    return val
