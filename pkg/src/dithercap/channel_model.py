"""Channel parameters and the equivalent additive noise Z = N + U.

N is Gaussian with standard deviation sigma, U is uniform dither on
[-delta/2, delta/2].  The composite density is the Gaussian-box convolution

    f_Z(z) = (1/delta) [Q((z - delta/2)/sigma) - Q((z + delta/2)/sigma)],

evaluated through a tail-safe path when both Q arguments are deep in the
right tail, where the direct difference would cancel catastrophically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .numerics import (SQRT2, SQRT_2PI, gaussian_q, gaussian_q_running_integral,
                       log_gaussian_q)

# Multiplier c in the effective noise support |z| <= delta/2 + c*sigma.
# Truncated mass is at most 2Q(10) ~ 1.5e-23.
SUPPORT_SIGMAS = 10.0

# Both Q arguments beyond this many sigmas triggers the log-domain path.
_TAIL_SWITCH = 6.0


@dataclass(frozen=True)
class ChannelParams:
    """Noise standard deviation and quantizer step size."""

    sigma: float
    delta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be finite and > 0, got {self.delta}")


@dataclass(frozen=True)
class PowerConstraints:
    """Average power P and peak amplitude A.

    peak_amplitude is None when the peak constraint is absent; an explicit
    variant rather than a large sentinel value.
    """

    avg_power: float
    peak_amplitude: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.avg_power) and self.avg_power >= 0):
            raise ValueError(f"avg_power must be finite and >= 0, got {self.avg_power}")
        if self.peak_amplitude is not None:
            if not (math.isfinite(self.peak_amplitude) and self.peak_amplitude > 0):
                raise ValueError(
                    f"peak_amplitude must be finite and > 0 or None, "
                    f"got {self.peak_amplitude}"
                )

    @property
    def bounded(self) -> bool:
        return self.peak_amplitude is not None

    @property
    def ratio(self) -> float:
        """Peak-to-average-power ratio K = A^2 / P (inf when either degenerates)."""
        if self.peak_amplitude is None or self.avg_power == 0:
            return math.inf
        return self.peak_amplitude ** 2 / self.avg_power


def support_radius(ch: ChannelParams, c: float = SUPPORT_SIGMAS) -> float:
    """Effective support radius delta/2 + c*sigma of the composite noise."""
    return 0.5 * ch.delta + c * ch.sigma


def edge_breakpoints(ch: ChannelParams, centers, pad_sigmas: float = 13.0) -> np.ndarray:
    """Kernel edges c +- delta/2 for each center, with +-pad_sigmas*sigma marks.

    The composite density is flat away from these edges once delta is large
    against sigma, so quadrature over a wide interval must be seeded with
    them; a coarse first panel reads the plateau as the whole story.
    """
    c = np.asarray(centers, dtype=float).ravel()
    half = 0.5 * ch.delta
    pad = pad_sigmas * ch.sigma
    edges = np.concatenate([c - half, c + half])
    return np.unique(np.concatenate([edges - pad, edges, edges + pad]))


def quantize(x, delta: float):
    """Quantizer index floor(x/delta).

    Args:
        x: scalar or array of real values.
        delta: step size > 0.

    Returns:
        Integer index i with i*delta <= x < (i+1)*delta.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    idx = np.floor(np.asarray(x, dtype=float) / delta).astype(np.int64)
    if np.ndim(x) == 0:
        return int(idx)
    return idx


def _q_difference(a, b):
    """Q(a) - Q(b) for a <= b elementwise, safe when both are deep tails.

    For a > _TAIL_SWITCH the direct difference of two tiny Q values loses
    relative accuracy, so the result is formed from log Q via expm1, which
    keeps full relative precision however deep the tail.
    """
    shape = np.shape(a)
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    direct = 0.5 * (erfc(a / SQRT2) - erfc(b / SQRT2))
    tail = a > _TAIL_SWITCH
    if np.any(tail):
        la = log_gaussian_q(a[tail])
        lb = log_gaussian_q(b[tail])
        with np.errstate(over="ignore", under="ignore"):
            safe = np.exp(la) * (-np.expm1(lb - la))
        direct = direct.copy()
        direct[tail] = safe
    return direct.reshape(shape)


def noise_pdf(z, ch: ChannelParams):
    """Density of Z = N + U at z.

    Symmetric in z by construction: the evaluation uses |z|, so f(z) and
    f(-z) are the same floating-point number.

    Args:
        z: scalar or array.
        ch: channel parameters.

    Returns:
        f_Z(z) = (1/delta)[Q((|z|-delta/2)/sigma) - Q((|z|+delta/2)/sigma)].
    """
    t = np.abs(np.asarray(z, dtype=float))
    h = 0.5 * ch.delta
    vals = _q_difference((t - h) / ch.sigma, (t + h) / ch.sigma) / ch.delta
    if np.ndim(z) == 0:
        return float(vals)
    return vals


def log_noise_pdf(z, ch: ChannelParams):
    """log f_Z(z), finite far beyond where noise_pdf underflows.

    Formed from log Q differences, so density ratios remain meaningful at
    offsets whose linear-scale density is below the smallest float.
    """
    t = np.atleast_1d(np.abs(np.asarray(z, dtype=float)))
    h = 0.5 * ch.delta
    la = log_gaussian_q((t - h) / ch.sigma)
    lb = log_gaussian_q((t + h) / ch.sigma)
    dl = lb - la
    with np.errstate(divide="ignore"):
        out = la + np.log(-np.expm1(dl)) - math.log(ch.delta)
    # dl ~ 0 needs t*delta/sigma^2 below machine epsilon; the box is then
    # pointlike and f collapses to the Gaussian factor alone
    tiny = dl > -1e-12
    if np.any(tiny):
        out[tiny] = -0.5 * (t[tiny] / ch.sigma) ** 2 - math.log(SQRT_2PI * ch.sigma)
    if np.ndim(z) == 0:
        return float(out[0])
    return out


def noise_pdf_dx(y, x, ch: ChannelParams):
    """Partial derivative in x of f_Z(y - x).

    Equals (1/(delta*sqrt(2 pi sigma^2))) [e^{-(t-delta/2)^2/(2 sigma^2)}
    - e^{-(t+delta/2)^2/(2 sigma^2)}] with t = y - x; odd in t, so the
    identity d(y, x) = -d(2x - y, x) holds exactly when 2x - y is exact.
    """
    t = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    h = 0.5 * ch.delta
    s2 = ch.sigma * ch.sigma
    vals = (np.exp(-0.5 * (t - h) ** 2 / s2) - np.exp(-0.5 * (t + h) ** 2 / s2)) / (
        ch.delta * SQRT_2PI * ch.sigma
    )
    if np.ndim(y) == 0 and np.ndim(x) == 0:
        return float(vals)
    return vals


def snqnr(p: PowerConstraints, ch: ChannelParams) -> float:
    """Signal-to-noise-and-quantization-noise ratio P / (sigma^2 + delta^2/12)."""
    return p.avg_power / (ch.sigma ** 2 + ch.delta ** 2 / 12.0)


def noise_tail_mass(t: float, ch: ChannelParams) -> float:
    """P(|Z| > t) in closed form.

    Writes the tail mass of the Gaussian-box convolution through the running
    integral of Q: P(Z > t) = (sigma/delta)[G(a) - G(b)] with
    a = (t - delta/2)/sigma, b = (t + delta/2)/sigma.

    Raises:
        ValueError: if t <= 0.
    """
    if not t > 0:
        raise ValueError(f"noise_tail_mass requires t > 0, got {t}")
    h = 0.5 * ch.delta
    a = (t - h) / ch.sigma
    b = (t + h) / ch.sigma
    one_sided = ch.sigma / ch.delta * (
        gaussian_q_running_integral(a) - gaussian_q_running_integral(b)
    )
    return min(1.0, max(0.0, 2.0 * one_sided))
