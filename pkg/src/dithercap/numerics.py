"""Special functions and adaptive quadrature shared by all other modules.

The Q-function is evaluated through the complementary error function so that
relative accuracy stays near machine precision over |x| <= 8 and degrades
gracefully (underflow, never garbage) beyond.  Quadrature is adaptive
interval bisection with an embedded Gauss-Kronrod (G7, K15) pair.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)

# 15-point Kronrod nodes on [-1, 1] (nonnegative half; symmetric) and weights,
# with the embedded 7-point Gauss weights on the shared nodes.
_KRONROD_NODES = np.array([
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993945,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
])
_KRONROD_WEIGHTS = np.array([
    0.2094821410847278,
    0.2044329400752989,
    0.1903505780647854,
    0.1690047266392679,
    0.1406532597155259,
    0.1047900103222502,
    0.0630920926299786,
    0.0229353220105292,
])
_GAUSS_WEIGHTS = np.array([
    0.4179591836734694,
    0.0,
    0.3818300505051189,
    0.0,
    0.2797053914892767,
    0.0,
    0.1294849661688697,
    0.0,
])

# Full symmetric node/weight vectors, ordered left to right.
_NODES = np.concatenate([-_KRONROD_NODES[:0:-1], _KRONROD_NODES])
_WK = np.concatenate([_KRONROD_WEIGHTS[:0:-1], _KRONROD_WEIGHTS])
_WG = np.concatenate([_GAUSS_WEIGHTS[:0:-1], _GAUSS_WEIGHTS])


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and subdivision budget for adaptive integration."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2 ** 16

    def __post_init__(self) -> None:
        if self.abs_tol < 0 or self.rel_tol < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one of abs_tol, rel_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUADRATURE = QuadratureSpec()


class ToleranceNotMetError(Exception):
    """Raised when the subdivision budget is exhausted before convergence.

    Carries the best available estimate and its error estimate.
    """

    def __init__(self, estimate: float, error_estimate: float):
        super().__init__(
            f"quadrature tolerance not met: estimate={estimate!r}, "
            f"error_estimate={error_estimate!r}"
        )
        self.estimate = estimate
        self.error_estimate = error_estimate


def gaussian_q(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x).

    Args:
        x: real scalar or array.

    Returns:
        Q(x), same shape as x.  Scalar input gives a float.
    """
    arr = np.asarray(x, dtype=float)
    out = 0.5 * erfc(arr / SQRT2)
    if np.ndim(x) == 0:
        return float(out)
    return out


def log_gaussian_q(x):
    """log Q(x), accurate far into the right tail.

    Uses the scaled complementary error function for x >= 0 so the result
    stays finite long after Q(x) itself underflows.
    """
    arr = np.asarray(x, dtype=float)
    pos = arr >= 0
    out = np.empty_like(arr)
    xp = arr[pos]
    out[pos] = np.log(0.5 * erfcx(xp / SQRT2)) - 0.5 * xp * xp
    xn = arr[~pos]
    if xn.size:
        # Q(x) = 1 - Q(-x); the complement is at most 1/2 here, so log1p is safe.
        out[~pos] = np.log1p(-0.5 * erfc(-xn / SQRT2))
    if np.ndim(x) == 0:
        return float(out)
    return out


def gaussian_q_bounds(x: float) -> tuple[float, float]:
    """Closed-form sandwich on Q(x) for x > 0.

    Returns:
        (lower, upper) with lower = e^{-x^2/2}(1 - x^{-2})/sqrt(2 pi x^2)
        and upper = e^{-x^2/2}/sqrt(2 pi x^2).

    Raises:
        ValueError: if x <= 0.
    """
    if not x > 0:
        raise ValueError(f"gaussian_q_bounds requires x > 0, got {x}")
    core = math.exp(-0.5 * x * x) / (SQRT_2PI * x)
    return core * (1.0 - 1.0 / (x * x)), core


def _eval_vectorized(f, t: np.ndarray) -> np.ndarray:
    """Evaluate f on an array of nodes, falling back to a scalar loop."""
    try:
        vals = np.asarray(f(t), dtype=float)
        if vals.shape == t.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(f(v)) for v in t], dtype=float)


def _gk15(f, a: float, b: float) -> tuple[float, float]:
    """One Gauss-Kronrod 15-point panel: (integral, error estimate)."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = _eval_vectorized(f, mid + half * _NODES)
    ik = half * float(vals @ _WK)
    ig = half * float(vals @ _WG)
    return ik, abs(ik - ig)


def integrate(f, a: float, b: float, spec: QuadratureSpec = DEFAULT_QUADRATURE,
              return_error: bool = False, points=None):
    """Adaptive estimate of the integral of f over [a, b].

    Bisects the interval with the largest error estimate until the summed
    error is below max(abs_tol, rel_tol * |integral|).

    Args:
        f: integrand; may accept numpy arrays (preferred) or scalars.
        a, b: integration limits with a <= b.
        spec: tolerances and subdivision budget.
        return_error: if True, return (value, error_estimate).
        points: optional interior breakpoints that seed the subdivision.
            Needed when sharp features sit far inside an otherwise flat
            interval; the first coarse panel cannot see them on its own.

    Raises:
        ToleranceNotMetError: when max_subdivisions is exhausted; carries the
            best estimate and its error estimate.
    """
    if b < a:
        raise ValueError(f"integrate requires a <= b, got a={a}, b={b}")
    if a == b:
        return (0.0, 0.0) if return_error else 0.0

    cuts = [a]
    if points is not None:
        eps = 1e-12 * (b - a)
        for pt in np.sort(np.asarray(points, dtype=float)):
            if pt - cuts[-1] > eps and b - pt > eps:
                cuts.append(float(pt))
    cuts.append(b)

    # heap entries: (-error, tiebreak, a, b, value)
    heap = []
    total = 0.0
    total_err = 0.0
    count = 0
    for lo, hi in zip(cuts, cuts[1:]):
        val, err = _gk15(f, lo, hi)
        heap.append((-err, count, lo, hi, val))
        total += val
        total_err += err
        count += 1
    heapq.heapify(heap)
    splits = 0
    while total_err > max(spec.abs_tol, spec.rel_tol * abs(total)):
        if splits >= spec.max_subdivisions:
            raise ToleranceNotMetError(total, total_err)
        neg_err, _, ia, ib, ival = heapq.heappop(heap)
        if neg_err == 0.0:
            # every remaining interval is already at zero estimated error;
            # the residual in total_err is accumulation noise
            heapq.heappush(heap, (neg_err, count, ia, ib, ival))
            break
        imid = 0.5 * (ia + ib)
        if imid <= ia or imid >= ib:
            # interval is at floating-point resolution; accept it as-is
            heapq.heappush(heap, (0.0, count, ia, ib, ival))
            count += 1
            total_err += neg_err  # remove this interval's error from the sum
            if total_err <= max(spec.abs_tol, spec.rel_tol * abs(total)):
                break
            continue
        vl, el = _gk15(f, ia, imid)
        vr, er = _gk15(f, imid, ib)
        total += vl + vr - ival
        total_err += el + er + neg_err
        heapq.heappush(heap, (-el, count, ia, imid, vl))
        heapq.heappush(heap, (-er, count + 1, imid, ib, vr))
        count += 2
        splits += 1
    if return_error:
        return total, total_err
    return total


def finite_diff(f, x: float, h: float) -> float:
    """Central difference (f(x+h) - f(x-h)) / (2h).

    Raises:
        ValueError: if h <= 0.
    """
    if not h > 0:
        raise ValueError(f"finite_diff requires h > 0, got {h}")
    return (float(f(x + h)) - float(f(x - h))) / (2.0 * h)


def gaussian_q_running_integral(c):
    """Integral of the Gaussian tail function from c to infinity.

    Equals phi(c) - c*Q(c); underflows to 0 around c = 38.  Use the log
    variant beyond that.  Scalar or array.
    """
    c = np.asarray(c, dtype=float)
    phi = np.exp(-0.5 * c * c) / SQRT_2PI
    # direct subtraction cancels for large c; switch to the product form
    # G(c) = phi(c) * [1 - c*sqrt(pi/2)*erfcx(c/sqrt(2))] there
    g = 1.0 - c * math.sqrt(math.pi / 2.0) * erfcx(np.maximum(c, -1.0) / SQRT2)
    out = np.where(c < 1.0,
                   np.maximum(phi - c * gaussian_q(c), 0.0),
                   phi * np.maximum(g, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def log_gaussian_q_running_integral(c: float) -> float:
    """log of gaussian_q_running_integral, stable for large positive c."""
    if c < 1.0:
        return math.log(gaussian_q_running_integral(c))
    # G(c) = phi(c) * g(c) with g(c) = 1 - c*sqrt(pi/2)*erfcx(c/sqrt(2))
    g = 1.0 - c * math.sqrt(math.pi / 2.0) * erfcx(c / SQRT2)
    if g > 0.0:
        log_g = math.log(g)
    else:
        # beyond c ~ 6e7 the subtraction loses g ~ 1/c^2 entirely
        log_g = -2.0 * math.log(c) + math.log1p(-3.0 / (c * c))
    return -0.5 * c * c - 0.5 * math.log(2.0 * math.pi) + log_g
