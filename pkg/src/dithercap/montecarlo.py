"""Seeded simulation of the dithered quantizer and statistical identity checks.

Sampling is counter-based: sample k consumes exactly counter block k of the
Philox generator (4 words per block: atom pick, Gaussian via inverse CDF,
dither, one spare), so any chunk partition of [0, n) reproduces the same
stream bit for bit and parallel generation is order-independent.  The checks compare empirical count tables
against quadrature values of the matching densities:

- the conditional pmf of the quantizer index given the dither equals the
  step times the composite output density at the shifted cell midpoint;
- the index entropies given dither (and input) equal the differential
  entropies of the composite laws minus log step;
- the plug-in conditional mutual information converges to the quadrature
  mutual information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

from .channel_model import ChannelParams, edge_breakpoints, noise_pdf, support_radius
from .info_measures import (InputDistribution, MIEstimate, differential_entropy,
                            mutual_information, output_pdf)
from .numerics import DEFAULT_QUADRATURE, SQRT_2PI, QuadratureSpec

_CHUNK = 1 << 20
_WORDS_PER_BLOCK = 4
_ENTROPY_BINS = 32
_MIN_EXPECTED = 50.0
# model probability below which a (bin, index) cell is not tested
_NEGLIGIBLE = 1e-3
# uniform draws of exactly 0 (probability 2^-53 each) would map to -inf
# under the inverse CDF; they are clipped, truncating the Gaussian beyond
# about 8.2 sigma
_U_FLOOR = 2.0 ** -54

_MAX_ATOMS = 16


@dataclass(frozen=True)
class SimRun:
    """Seeded sampling task: input law, channel, and sample count."""

    seed: int
    n_samples: int
    input: InputDistribution
    ch: ChannelParams

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")


class SampleRecord(NamedTuple):
    """One simulated use: input, dither, pre-quantizer value, and index."""

    x: float
    u: float
    y_index: int
    y_tilde: float


class InsufficientSamplesError(Exception):
    """A required count cell is below its expected-count floor."""

    def __init__(self, message: str, cells):
        super().__init__(message)
        self.cells = list(cells)


@dataclass(frozen=True)
class PmfCheckReport:
    """Cell-by-cell comparison outcome for the conditional pmf identity."""

    passed: bool
    cells_checked: int
    worst_deviation_sigmas: float
    worst_cell: tuple[int, int]
    allowance: float


@dataclass(frozen=True)
class EntropyCheckReport:
    """Sampled-vs-quadrature comparison of both entropy identities."""

    passed: bool
    output_entropy_estimate: float
    output_entropy_model: float
    output_tolerance: float
    noise_entropy_estimate: float
    noise_entropy_model: float
    noise_tolerance: float


def _sample_chunk(run: SimRun, start: int, count: int):
    """Arrays (atom_idx, x, u, y_tilde) for samples [start, start + count)."""
    bits = np.random.Philox(key=run.seed)
    bits.advance(start)
    uni = np.random.Generator(bits).random((count, _WORDS_PER_BLOCK))
    locs = np.array(run.input.locations)
    cum = np.cumsum(np.array(run.input.probabilities))
    cum[-1] = 1.0
    atom = np.searchsorted(cum, uni[:, 0], side="right")
    x = locs[atom]
    n = run.ch.sigma * ndtri(np.maximum(uni[:, 1], _U_FLOOR))
    u = (uni[:, 2] - 0.5) * run.ch.delta
    return atom, x, u, x + n


def simulate(run: SimRun):
    """Yield SampleRecord per use; deterministic given the SimRun fields."""
    done = 0
    while done < run.n_samples:
        count = min(_CHUNK, run.n_samples - done)
        atom, x, u, y_tilde = _sample_chunk(run, done, count)
        y_index = np.floor((y_tilde + u) / run.ch.delta).astype(np.int64)
        for k in range(count):
            yield SampleRecord(x=float(x[k]), u=float(u[k]),
                              y_index=int(y_index[k]), y_tilde=float(y_tilde[k]))
        done += count


_KEY_OFFSET = 2 ** 39
_KEY_SPAN = 2 ** 40


def _joint_counts(run: SimRun, u_bins: int, dithered: bool = True):
    """Sparse counts over (atom, u bin, index) plus per-bin totals.

    Returns (keys, counts, n_b): keys encode (atom * u_bins + bin) * 2^40 +
    index + 2^39.  With dithered False the quantizer sees y_tilde alone,
    the negative control for the pmf identity.
    """
    if u_bins < 1:
        raise ValueError(f"u_bins must be >= 1, got {u_bins}")
    width = run.ch.delta / u_bins
    table: dict[int, int] = {}
    n_b = np.zeros(u_bins, dtype=np.int64)
    done = 0
    while done < run.n_samples:
        count = min(_CHUNK, run.n_samples - done)
        atom, _x, u, y_tilde = _sample_chunk(run, done, count)
        b = np.minimum(((u + 0.5 * run.ch.delta) / width).astype(np.int64),
                       u_bins - 1)
        arg = y_tilde + u if dithered else y_tilde
        idx = np.floor(arg / run.ch.delta).astype(np.int64)
        np.add.at(n_b, b, 1)
        keys = (atom * u_bins + b) * _KEY_SPAN + idx + _KEY_OFFSET
        uniq, cnt = np.unique(keys, return_counts=True)
        for k, c in zip(uniq.tolist(), cnt.tolist()):
            table[k] = table.get(k, 0) + c
        done += count
    keys = np.array(sorted(table), dtype=np.int64)
    counts = np.array([table[k] for k in keys], dtype=np.int64)
    return keys, counts, n_b


def _split_keys(keys: np.ndarray, u_bins: int):
    """Decode key array into (atom, bin, index) columns."""
    idx = keys % _KEY_SPAN - _KEY_OFFSET
    ab = keys // _KEY_SPAN
    return ab // u_bins, ab % u_bins, idx


def _pmf_check(run: SimRun, u_bins: int, tol_sigmas: float,
               dithered: bool) -> PmfCheckReport:
    keys, counts, n_b = _joint_counts(run, u_bins, dithered=dithered)
    _atom, b_col, i_col = _split_keys(keys, u_bins)
    width = run.ch.delta / u_bins
    # candidate indices: all seen anywhere, tested where the model mass
    # at the bin center is non-negligible
    idx_lo, idx_hi = int(i_col.min()), int(i_col.max())
    indices = np.arange(idx_lo, idx_hi + 1)
    binned = np.zeros((u_bins, indices.size), dtype=np.int64)
    np.add.at(binned, (b_col, i_col - idx_lo), counts)
    # within-bin variation of the model probability: the density slope is
    # at most 1/(sqrt(2 pi) sigma delta) per unit u, times delta for the
    # cell mass, over half a bin width
    allowance = 0.5 * width / (SQRT_2PI * run.ch.sigma)
    undersized = []
    worst = 0.0
    worst_cell = (0, 0)
    checked = 0
    for b in range(u_bins):
        u_star = -0.5 * run.ch.delta + (b + 0.5) * width
        y_pts = run.ch.delta * indices + 0.5 * run.ch.delta - u_star
        model = run.ch.delta * output_pdf(y_pts, run.input, run.ch)
        test = model >= _NEGLIGIBLE
        expected = n_b[b] * model
        low = test & (expected < _MIN_EXPECTED)
        if np.any(low):
            undersized.extend((b, int(i)) for i in indices[low])
            continue
        if not np.any(test):
            continue
        freq = binned[b, test] / n_b[b]
        m = model[test]
        se = np.sqrt(m * (1.0 - m) / n_b[b])
        dev = np.abs(freq - m)
        sigmas = np.max(
            np.maximum(dev - allowance, 0.0) / se
        )
        checked += int(np.count_nonzero(test))
        if sigmas > worst:
            worst = float(sigmas)
            worst_cell = (b, int(indices[test][int(np.argmax(
                np.maximum(dev - allowance, 0.0) / se))]))
    if undersized:
        raise InsufficientSamplesError(
            f"{len(undersized)} cells below expected count {_MIN_EXPECTED}",
            undersized,
        )
    if checked == 0:
        raise InsufficientSamplesError("no testable cells at this sample size", [])
    return PmfCheckReport(
        passed=worst <= tol_sigmas,
        cells_checked=checked,
        worst_deviation_sigmas=worst,
        worst_cell=worst_cell,
        allowance=allowance,
    )


def conditional_pmf_check(run: SimRun, u_bins: int,
                          tol_sigmas: float) -> PmfCheckReport:
    """Verify the dithered index pmf against the composite output density.

    For each dither bin center u* and index i carrying non-negligible
    model mass, the empirical conditional frequency must match
    delta * output_pdf(delta i + delta/2 - u*) within tol_sigmas binomial
    standard errors plus a bin-discretization allowance.

    Raises:
        InsufficientSamplesError: when a tested cell's expected count
            falls below 50; the undersized cells ride along.
    """
    return _pmf_check(run, u_bins, tol_sigmas, dithered=True)


def _plugin_entropy_by_group(group_ids: np.ndarray, counts: np.ndarray,
                             group_totals: np.ndarray):
    """Count-weighted conditional entropy, bias correction, and surprisal var.

    group_ids maps each (group, symbol) cell to its group; returns the
    plug-in estimate of H(symbol | group) with the first-order
    (cells - 1)/(2 n) correction added per group, plus the empirical
    variance of the per-sample surprisal for the error bar.
    """
    n = float(group_totals.sum())
    p_cell = counts / n
    p_cond = counts / group_totals[group_ids]
    surprisal = -np.log(p_cond)
    est = float(p_cell @ surprisal)
    var = float(p_cell @ (surprisal - est) ** 2)
    correction = 0.0
    for g in np.unique(group_ids):
        m = int(np.count_nonzero(group_ids == g))
        n_g = float(group_totals[g])
        correction += (n_g / n) * (m - 1) / (2.0 * n_g)
    return est + correction, correction, var


def entropy_identity_check(run: SimRun,
                           spec: QuadratureSpec = DEFAULT_QUADRATURE
                           ) -> EntropyCheckReport:
    """Check both entropy identities against quadrature models.

    H(index | dither bin) is compared with h(X+Z) - log delta and
    H(index | dither bin, X) with h(Z) - log delta.  PASS iff each
    difference is within 3 x (statistical std + bias allowance), where the
    bias allowance folds the residual of the first-order correction and the
    dither-bin discretization.

    Raises:
        InsufficientSamplesError: when a dither bin has fewer samples than
            50 times its occupied cells.
    """
    u_bins = _ENTROPY_BINS
    keys, counts, n_b = _joint_counts(run, u_bins)
    atom_col, b_col, i_col = _split_keys(keys, u_bins)
    bad = []
    for b in range(u_bins):
        cells = int(np.count_nonzero(b_col == b))
        if n_b[b] < _MIN_EXPECTED * max(cells, 1):
            bad.append((b, cells))
    if bad:
        raise InsufficientSamplesError(
            f"{len(bad)} dither bins below {_MIN_EXPECTED} samples per cell", bad
        )
    n = float(run.n_samples)

    # H(index | dither bin): collapse atoms
    pair = b_col * _KEY_SPAN + (i_col + _KEY_OFFSET)
    uniq, inv = np.unique(pair, return_inverse=True)
    c_out = np.bincount(inv, weights=counts).astype(np.int64)
    g_out = (uniq // _KEY_SPAN).astype(np.int64)
    est_out, corr_out, var_out = _plugin_entropy_by_group(g_out, c_out, n_b)

    # H(index | dither bin, input atom)
    group_ab = atom_col * u_bins + b_col
    uniq_ab, inv_ab = np.unique(group_ab, return_inverse=True)
    totals_ab = np.zeros(uniq_ab.size, dtype=np.int64)
    np.add.at(totals_ab, inv_ab, counts)
    est_nz, corr_nz, var_nz = _plugin_entropy_by_group(inv_ab, counts, totals_ab)

    locs = run.input.locations
    r = support_radius(run.ch)
    hull = (min(locs) - r, max(locs) + r)
    model_out = differential_entropy(
        lambda y: output_pdf(y, run.input, run.ch), hull, spec,
        points=edge_breakpoints(run.ch, locs),
    ) - math.log(run.ch.delta)
    model_nz = differential_entropy(
        lambda z: noise_pdf(z, run.ch), (-r, r), spec,
        points=edge_breakpoints(run.ch, [0.0]),
    ) - math.log(run.ch.delta)

    width = run.ch.delta / u_bins
    bin_gap = (0.5 * width / run.ch.sigma) ** 2
    tol_out = 3.0 * (math.sqrt(var_out / n) + 0.5 * corr_out + bin_gap)
    tol_nz = 3.0 * (math.sqrt(var_nz / n) + 0.5 * corr_nz + bin_gap)
    return EntropyCheckReport(
        passed=(abs(est_out - model_out) <= tol_out
                and abs(est_nz - model_nz) <= tol_nz),
        output_entropy_estimate=est_out,
        output_entropy_model=model_out,
        output_tolerance=tol_out,
        noise_entropy_estimate=est_nz,
        noise_entropy_model=model_nz,
        noise_tolerance=tol_nz,
    )


def mi_estimate(run: SimRun, u_bins: int) -> MIEstimate:
    """Plug-in estimate of I(X; index | dither bin) with an error bar.

    The value is the count-weighted sum over dither bins of the per-bin
    plug-in mutual information, minus the first-order
    (rows - 1)(cols - 1)/(2 n) bias per bin.  The error field is a
    conservative band: three sampling standard deviations of the log-ratio
    plus half the bias correction.

    Raises:
        ValueError: for inputs with more than 16 atoms.
        InsufficientSamplesError: when a dither bin has fewer samples than
            50 times its occupied cells.
    """
    if len(run.input.atoms) > _MAX_ATOMS:
        raise ValueError(
            f"mi_estimate supports at most {_MAX_ATOMS} atoms, "
            f"got {len(run.input.atoms)}"
        )
    keys, counts, n_b = _joint_counts(run, u_bins)
    atom_col, b_col, i_col = _split_keys(keys, u_bins)
    bad = []
    for b in range(u_bins):
        cells = int(np.count_nonzero(b_col == b))
        if n_b[b] < _MIN_EXPECTED * max(cells, 1):
            bad.append((b, cells))
    if bad:
        raise InsufficientSamplesError(
            f"{len(bad)} dither bins below {_MIN_EXPECTED} samples per cell", bad
        )
    n = float(run.n_samples)
    value = 0.0
    var_sum = 0.0
    bias = 0.0
    for b in range(u_bins):
        sel = b_col == b
        if not np.any(sel):
            continue
        a = atom_col[sel]
        i = i_col[sel]
        c = counts[sel].astype(float)
        n_bin = float(n_b[b])
        atoms = np.unique(a)
        idxs = np.unique(i)
        row = np.zeros(atoms.max() + 1)
        np.add.at(row, a, c)
        col = {int(v): 0.0 for v in idxs}
        for iv, cv in zip(i.tolist(), c.tolist()):
            col[iv] += cv
        colv = np.array([col[int(v)] for v in i.tolist()])
        g = np.log(c * n_bin / (row[a] * colv))
        w = c / n
        contrib = float(w @ g)
        value += contrib
        mean_bin = contrib * n / n_bin
        var_sum += float(w @ (g - mean_bin) ** 2)
        bias += (atoms.size - 1) * (idxs.size - 1) / (2.0 * n_bin) * (n_bin / n)
    value -= bias
    error = 3.0 * math.sqrt(var_sum / n) + 0.5 * bias
    return MIEstimate(value=max(value, 0.0), error=error)


def sample_second_moment(run: SimRun) -> tuple[float, float]:
    """Empirical second moment of Z = N + U and its standard error."""
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < run.n_samples:
        count = min(_CHUNK, run.n_samples - done)
        _atom, x, u, y_tilde = _sample_chunk(run, done, count)
        z = (y_tilde - x) + u
        z2 = z * z
        total += float(z2.sum())
        total_sq += float((z2 * z2).sum())
        done += count
    n = run.n_samples
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)
