"""Command line front end: reproducible experiments emitting CSV or JSON.

Every output row carries the full resolved parameter set, so a table is
reproducible from any one of its rows.  Identical command lines give
byte-identical files; nothing time- or host-dependent is written.

Exit codes: 0 success, 2 usage, 3 validation, 4 computation error,
5 verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bounds import dual_upper_bound_optimized, slope_lower_bound
from .capacity_solver import (DEFAULT_SOLVER, NonConvergenceError, SolverConfig,
                              capacity)
from .channel_model import (ChannelParams, PowerConstraints, log_noise_pdf,
                            noise_pdf, snqnr, support_radius)
from .info_measures import (InputDistribution, gaussian_capacity,
                            mutual_information, one_bit_low_snr_slope)
from .low_snr import FisherTailParams, fisher_tail_upper_bound, low_snr_slope
from .montecarlo import (InsufficientSamplesError, SimRun, conditional_pmf_check,
                         entropy_identity_check, mi_estimate, simulate)
from .numerics import ToleranceNotMetError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_COMPUTATION = 4
EXIT_VERIFY_FAIL = 5

_MAX_WORKERS = 8


class ValidationError(ValueError):
    """Parameter values outside their documented ranges."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One parsed and validated experiment: command plus parameter map."""

    command: str
    params: dict


class _Parser(argparse.ArgumentParser):
    """argparse with a machine-readable usage-error record on stderr."""

    def error(self, message):
        _error_record("usage", self.prog, message)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _error_record(kind: str, where: str, message) -> None:
    rec = {"error": {"type": kind, "where": where, "message": str(message)}}
    print(json.dumps(rec), file=sys.stderr)


def _parse_grid(text: str) -> list[float]:
    """Grid syntax log:start:stop:count or lin:start:stop:count, sorted."""
    parts = text.split(":")
    if len(parts) != 4 or parts[0] not in ("log", "lin"):
        raise ValidationError(
            f"grid must be log:start:stop:count or lin:start:stop:count, got {text!r}"
        )
    try:
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise ValidationError(f"bad grid numbers in {text!r}: {exc}") from None
    if count < 1:
        raise ValidationError(f"grid count must be >= 1, got {count}")
    if parts[0] == "log":
        if start <= 0 or stop <= 0:
            raise ValidationError(f"log grid endpoints must be > 0, got {text!r}")
        vals = np.geomspace(start, stop, count)
    else:
        vals = np.linspace(start, stop, count)
    return [float(v) for v in np.sort(vals)]


def _parse_peak(text: str) -> float | None:
    """Peak amplitude flag: a positive number, or 'inf' for unconstrained."""
    if text.strip().lower() in ("inf", "infinity"):
        return None
    try:
        a = float(text)
    except ValueError:
        raise ValidationError(f"peak must be a number or 'inf', got {text!r}") from None
    if not (math.isfinite(a) and a > 0):
        raise ValidationError(f"peak must be > 0 or 'inf', got {text!r}")
    return a


def _parse_input(text: str) -> InputDistribution:
    """Input syntax binary:A, single:X, or atoms:x1:p1,x2:p2,..."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "binary":
            return InputDistribution.binary(float(rest))
        if kind == "single":
            return InputDistribution.single(float(rest))
        if kind == "atoms":
            locs, probs = [], []
            for seg in rest.split(","):
                x, _, p = seg.partition(":")
                locs.append(float(x))
                probs.append(float(p))
            return InputDistribution.from_arrays(locs, probs)
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(f"bad input spec {text!r}: {exc}") from None
    raise ValidationError(
        f"input must be binary:A, single:X, or atoms:x1:p1,..., got {text!r}"
    )


def _peak_cell(a: float | None):
    return "inf" if a is None else a


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _write_json(meta: dict, rows: list[dict]) -> str:
    return json.dumps({"meta": meta, "rows": rows}, indent=2) + "\n"


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit_table(cfg: ExperimentConfig, columns: list[str], rows: list[dict]) -> None:
    meta = {"command": cfg.command, "version": __version__}
    meta.update({k: v for k, v in cfg.params.items() if k not in ("out", "format")})
    if cfg.params["format"] == "json":
        text = _write_json(meta, rows)
    else:
        text = _write_csv(columns, rows)
    _emit(text, cfg.params["out"])


def _parallel(fn, items: list) -> list:
    """Map fn over items concurrently, preserving input order."""
    if len(items) <= 1:
        return [fn(v) for v in items]
    with ThreadPoolExecutor(max_workers=min(_MAX_WORKERS, len(items))) as ex:
        return list(ex.map(fn, items))


def _solver_config(p: dict) -> SolverConfig:
    return SolverConfig(
        grid_points=p["grid_points"], convergence_tol=p["tol"],
        max_iterations=p["max_iter"],
        peak_proxy_multiplier=p["peak_proxy"],
    )


def _capacity_row(p: dict, delta: float, avg: float, peak: float | None):
    """One solved sweep point; returns (row dict, error or None)."""
    ch = ChannelParams(sigma=p["sigma"], delta=delta)
    pc = PowerConstraints(avg_power=avg, peak_amplitude=peak)
    row = {
        "sigma_signal": p["sigma"], "delta_signal": delta,
        "avg_power_signal2": avg, "peak_signal": _peak_cell(peak),
        "grid_points": p["grid_points"], "convergence_tol_nats": p["tol"],
        "max_iterations": p["max_iter"], "peak_proxy_multiplier": p["peak_proxy"],
        "snqnr_linear": snqnr(pc, ch),
        "gaussian_capacity_nats": gaussian_capacity(
            PowerConstraints(avg_power=avg), ch.sigma),
        "capacity_nats": None, "upper_bound_nats": None,
        "duality_gap_nats": None, "power_used_signal2": None,
        "lagrange_multiplier_nats_per_power2": None,
        "iterations": None, "support_atoms": None,
    }
    try:
        res = capacity(pc, ch, _solver_config(p))
    except (NonConvergenceError, ValueError, ToleranceNotMetError) as exc:
        return row, exc
    row.update({
        "capacity_nats": res.rate, "upper_bound_nats": res.upper_bound,
        "duality_gap_nats": res.duality_gap_estimate,
        "power_used_signal2": res.power_used,
        "lagrange_multiplier_nats_per_power2": res.lagrange_multiplier,
        "iterations": res.iterations,
        "support_atoms": len(res.distribution.atoms),
    })
    return row, None


_CAP_COLUMNS = [
    "sigma_signal", "delta_signal", "avg_power_signal2", "peak_signal",
    "grid_points", "convergence_tol_nats", "max_iterations",
    "peak_proxy_multiplier", "capacity_nats", "upper_bound_nats",
    "duality_gap_nats", "power_used_signal2",
    "lagrange_multiplier_nats_per_power2", "iterations", "support_atoms",
    "snqnr_linear", "gaussian_capacity_nats",
]


def _run_pdf(cfg: ExperimentConfig) -> int:
    p = cfg.params
    ch = ChannelParams(sigma=p["sigma"], delta=p["delta"])
    zs = _parse_grid(p["z_grid"])
    fz = noise_pdf(np.array(zs), ch)
    lfz = log_noise_pdf(np.array(zs), ch)
    rows = [
        {"sigma_signal": p["sigma"], "delta_signal": p["delta"], "z_signal": z,
         "noise_pdf_per_signal": float(f), "log_noise_pdf": float(lf)}
        for z, f, lf in zip(zs, fz, lfz)
    ]
    cols = ["sigma_signal", "delta_signal", "z_signal",
            "noise_pdf_per_signal", "log_noise_pdf"]
    _emit_table(cfg, cols, rows)
    return EXIT_OK


def _run_capacity(cfg: ExperimentConfig) -> int:
    p = cfg.params
    row, err = _capacity_row(p, p["delta"], p["p"], p["a"])
    if err is not None:
        raise err
    _emit_table(cfg, _CAP_COLUMNS, [row])
    return EXIT_OK


def _run_sweep_delta(cfg: ExperimentConfig) -> int:
    p = cfg.params
    deltas = _parse_grid(p["delta_grid"])
    results = _parallel(lambda d: _capacity_row(p, d, p["p"], p["a"]), deltas)
    _emit_table(cfg, _CAP_COLUMNS, [row for row, _ in results])
    failures = [(d, err) for d, (_, err) in zip(deltas, results) if err is not None]
    if failures:
        msgs = "; ".join(f"delta={d}: {e}" for d, e in failures)
        _error_record("computation", cfg.command, f"{len(failures)} point(s) failed: {msgs}")
        return EXIT_COMPUTATION
    return EXIT_OK


def _run_sweep_power(cfg: ExperimentConfig) -> int:
    p = cfg.params
    powers = _parse_grid(p["p_grid"])

    def point(avg: float):
        # fixed ratio K gives a per-point peak A = sqrt(K * P)
        peak = math.sqrt(p["k"] * avg) if p["k"] is not None else p["a"]
        return _capacity_row(p, p["delta"], avg, peak)

    results = _parallel(point, powers)
    _emit_table(cfg, _CAP_COLUMNS, [row for row, _ in results])
    failures = [(avg, err) for avg, (_, err) in zip(powers, results) if err is not None]
    if failures:
        msgs = "; ".join(f"p={v}: {e}" for v, e in failures)
        _error_record("computation", cfg.command, f"{len(failures)} point(s) failed: {msgs}")
        return EXIT_COMPUTATION
    return EXIT_OK


def _run_slope(cfg: ExperimentConfig) -> int:
    p = cfg.params
    deltas = _parse_grid(p["delta_grid"])
    one_bit = one_bit_low_snr_slope(p["sigma"])

    def point(delta: float) -> dict:
        ch = ChannelParams(sigma=p["sigma"], delta=delta)
        tp = FisherTailParams.for_channel(ch, theta=p["theta"])
        try:
            tail = fisher_tail_upper_bound(ch, tp)
        except ValueError:
            tail = None
        return {
            "sigma_signal": p["sigma"], "delta_signal": delta,
            "theta_signal": tp.theta,
            "low_snr_slope_nats_per_power": low_snr_slope(ch),
            "one_bit_slope_nats_per_power": one_bit,
            "tail_bound_nats_per_power": tail,
            "tail_mu": tp.mu, "tail_lambda_per_signal": tp.lam,
        }

    rows = _parallel(point, deltas)
    cols = ["sigma_signal", "delta_signal", "theta_signal",
            "low_snr_slope_nats_per_power", "one_bit_slope_nats_per_power",
            "tail_bound_nats_per_power", "tail_mu", "tail_lambda_per_signal"]
    _emit_table(cfg, cols, rows)
    return EXIT_OK


def _run_bounds(cfg: ExperimentConfig) -> int:
    p = cfg.params
    deltas = _parse_grid(p["delta_grid"])
    ell0 = [2 ** k for k in range(int(p["ell0_max"]).bit_length()) if 2 ** k <= p["ell0_max"]]

    def point(delta: float) -> dict:
        ch = ChannelParams(sigma=p["sigma"], delta=delta)
        pc = PowerConstraints(avg_power=p["p"])
        offset = p["delta_offset"] if p["delta_offset"] is not None else 5.0 * ch.sigma
        dual = dual_upper_bound_optimized(pc, ch)
        return {
            "sigma_signal": p["sigma"], "delta_signal": delta,
            "avg_power_signal2": p["p"],
            "dual_bound_nats": dual.value,
            "dual_alpha": dual.params.alpha, "dual_beta": dual.params.beta,
            "dual_upsilon": dual.params.upsilon,
            "slope_lower_bound_nats_per_power": slope_lower_bound(
                ch, ell0_list=ell0, delta_offset=offset),
            "ell0_max": p["ell0_max"], "delta_offset_signal": offset,
            "gaussian_capacity_nats": gaussian_capacity(pc, ch.sigma),
        }

    rows = _parallel(point, deltas)
    cols = ["sigma_signal", "delta_signal", "avg_power_signal2",
            "dual_bound_nats", "dual_alpha", "dual_beta", "dual_upsilon",
            "slope_lower_bound_nats_per_power", "ell0_max",
            "delta_offset_signal", "gaussian_capacity_nats"]
    _emit_table(cfg, cols, rows)
    return EXIT_OK


def _run_simulate(cfg: ExperimentConfig) -> int:
    p = cfg.params
    run = SimRun(seed=p["seed"], n_samples=p["n"], input=_parse_input(p["input"]),
                 ch=ChannelParams(sigma=p["sigma"], delta=p["delta"]))
    rows = [
        {"seed": p["seed"], "n_samples": p["n"], "sigma_signal": p["sigma"],
         "delta_signal": p["delta"], "input": p["input"], "sample_index": k,
         "x_signal": rec.x, "dither_signal": rec.u, "y_index": rec.y_index,
         "y_tilde_signal": rec.y_tilde}
        for k, rec in enumerate(simulate(run))
    ]
    cols = ["seed", "n_samples", "sigma_signal", "delta_signal", "input",
            "sample_index", "x_signal", "dither_signal", "y_index",
            "y_tilde_signal"]
    _emit_table(cfg, cols, rows)
    return EXIT_OK


def _run_verify(cfg: ExperimentConfig) -> int:
    p = cfg.params
    d = _parse_input(p["input"])
    ch = ChannelParams(sigma=p["sigma"], delta=p["delta"])
    run = SimRun(seed=p["seed"], n_samples=p["n"], input=d, ch=ch)
    common = {"seed": p["seed"], "n_samples": p["n"], "sigma_signal": p["sigma"],
              "delta_signal": p["delta"], "input": p["input"],
              "u_bins": p["u_bins"]}

    pmf = conditional_pmf_check(run, p["u_bins"], p["pmf_sigmas"])
    ent = entropy_identity_check(run)
    est = mi_estimate(run, p["u_bins"])
    quad = mutual_information(d, ch)
    mi_ok = abs(est.value - quad.value) <= est.error

    rows = [
        dict(common, check="conditional_pmf", passed=pmf.passed,
             cells_checked=pmf.cells_checked,
             worst_deviation_sigmas=pmf.worst_deviation_sigmas,
             tol_sigmas=p["pmf_sigmas"]),
        dict(common, check="entropy_identity", passed=ent.passed,
             output_entropy_estimate_nats=ent.output_entropy_estimate,
             output_entropy_model_nats=ent.output_entropy_model,
             output_tolerance_nats=ent.output_tolerance,
             noise_entropy_estimate_nats=ent.noise_entropy_estimate,
             noise_entropy_model_nats=ent.noise_entropy_model,
             noise_tolerance_nats=ent.noise_tolerance),
        dict(common, check="mi_agreement", passed=mi_ok,
             mi_estimate_nats=est.value, mi_error_bar_nats=est.error,
             mi_quadrature_nats=quad.value),
    ]
    cols = list(common) + [
        "check", "passed", "cells_checked", "worst_deviation_sigmas",
        "tol_sigmas", "output_entropy_estimate_nats",
        "output_entropy_model_nats", "output_tolerance_nats",
        "noise_entropy_estimate_nats", "noise_entropy_model_nats",
        "noise_tolerance_nats", "mi_estimate_nats", "mi_error_bar_nats",
        "mi_quadrature_nats",
    ]
    _emit_table(cfg, cols, rows)
    failed = [r["check"] for r in rows if not r["passed"]]
    if failed:
        _error_record("verification", cfg.command, f"FAIL: {', '.join(failed)}")
        return EXIT_VERIFY_FAIL
    return EXIT_OK


_RUNNERS = {
    "pdf": _run_pdf,
    "capacity": _run_capacity,
    "sweep-delta": _run_sweep_delta,
    "sweep-power": _run_sweep_power,
    "slope": _run_slope,
    "bounds": _run_bounds,
    "simulate": _run_simulate,
    "verify": _run_verify,
}


def run(config: ExperimentConfig) -> int:
    """Execute one validated experiment; returns the process exit code."""
    return _RUNNERS[config.command](config)


def _add_common(sp, default_format="csv"):
    sp.add_argument("--out", default="-", help="output path, or - for stdout")
    sp.add_argument("--format", choices=("csv", "json"), default=default_format,
                    help="output format (default %(default)s)")


def _add_solver_flags(sp):
    sp.add_argument("--grid-points", type=int, default=DEFAULT_SOLVER.grid_points,
                    help="solver support grid size, odd (default %(default)s)")
    sp.add_argument("--tol", type=float, default=DEFAULT_SOLVER.convergence_tol,
                    help="duality gap target in nats (default %(default)s)")
    sp.add_argument("--max-iter", type=int, default=DEFAULT_SOLVER.max_iterations,
                    help="iteration budget (default %(default)s)")
    sp.add_argument("--peak-proxy", type=float,
                    default=DEFAULT_SOLVER.peak_proxy_multiplier,
                    help="grid half-width in sqrt(P) units when peak is inf "
                         "(default %(default)s)")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="dithercap",
        description="Experiments on the Gaussian channel behind a dithered "
                    "uniform quantizer: densities, capacity, low-SNR slopes, "
                    "bounds, and seeded simulation checks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pdf", help="tabulate the composite noise density")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--z-grid", default=None,
                    help="lin:/log: grid of z values (default spans the "
                         "effective support)")
    _add_common(sp)

    sp = sub.add_parser("capacity", help="solve one capacity point")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--p", type=float, required=True, help="average power P")
    sp.add_argument("--a", default="inf", help="peak amplitude A, or inf")
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("sweep-delta", help="capacity across a step-size grid")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--a", default="inf", help="peak amplitude A, or inf")
    sp.add_argument("--delta-grid", required=True, help="log:/lin: grid of delta")
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("sweep-power", help="capacity across a power grid")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--p-grid", required=True, help="log:/lin: grid of P")
    sp.add_argument("--a", default="inf", help="fixed peak amplitude A, or inf")
    sp.add_argument("--k", type=float, default=None,
                    help="peak-to-average ratio K = A^2/P; overrides --a")
    _add_solver_flags(sp)
    _add_common(sp)

    sp = sub.add_parser("slope", help="low-SNR slope and tail bound vs delta")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta-grid", required=True, help="log:/lin: grid of delta")
    sp.add_argument("--theta", type=float, default=None,
                    help="tail split point (default 5 sigma)")
    _add_common(sp)

    sp = sub.add_parser("bounds", help="dual upper and threshold lower bounds")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--delta-grid", required=True, help="log:/lin: grid of delta")
    sp.add_argument("--ell0-max", type=int, default=64,
                    help="largest threshold cell count; powers of two up to "
                         "this are swept (default %(default)s)")
    sp.add_argument("--delta-offset", type=float, default=None,
                    help="exceedance offset (default 5 sigma)")
    _add_common(sp)

    sp = sub.add_parser("simulate", help="emit the raw seeded sample stream")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n", type=int, default=1000, help="samples (default %(default)s)")
    sp.add_argument("--input", default="binary:1",
                    help="binary:A, single:X, or atoms:x1:p1,... (default %(default)s)")
    _add_common(sp)

    sp = sub.add_parser("verify", help="run the simulation identity checks")
    sp.add_argument("--sigma", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n", type=int, default=1_000_000,
                    help="samples (default %(default)s)")
    sp.add_argument("--input", default="binary:1",
                    help="binary:A, single:X, or atoms:x1:p1,... (default %(default)s)")
    sp.add_argument("--u-bins", type=int, default=8,
                    help="dither bins (default %(default)s)")
    sp.add_argument("--pmf-sigmas", type=float, default=4.0,
                    help="cell tolerance in binomial sigmas (default %(default)s)")
    _add_common(sp, default_format="json")

    return parser


def _config_from_args(args) -> ExperimentConfig:
    p = dict(vars(args))
    p.pop("command")
    if "sigma" in p and not p["sigma"] > 0:
        raise ValidationError(f"sigma must be > 0, got {p['sigma']}")
    if "delta" in p and p["delta"] is not None and not p["delta"] > 0:
        raise ValidationError(f"delta must be > 0, got {p['delta']}")
    if "p" in p and not p["p"] >= 0:
        raise ValidationError(f"p must be >= 0, got {p['p']}")
    if "a" in p:
        p["a"] = _parse_peak(p["a"])
    if "k" in p and p["k"] is not None and not p["k"] > 0:
        raise ValidationError(f"k must be > 0, got {p['k']}")
    if "n" in p and p["n"] < 1:
        raise ValidationError(f"n must be >= 1, got {p['n']}")
    if "u_bins" in p and p["u_bins"] < 1:
        raise ValidationError(f"u-bins must be >= 1, got {p['u_bins']}")
    if "ell0_max" in p and p["ell0_max"] < 1:
        raise ValidationError(f"ell0-max must be >= 1, got {p['ell0_max']}")
    if "theta" in p and p["theta"] is not None and not p["theta"] > 0:
        raise ValidationError(f"theta must be > 0, got {p['theta']}")
    for key in ("delta_grid", "p_grid"):
        if key in p:
            _parse_grid(p[key])
    if "z_grid" in p:
        if p["z_grid"] is None:
            r = support_radius(ChannelParams(sigma=p["sigma"], delta=p["delta"]))
            p["z_grid"] = f"lin:{-r:.17g}:{r:.17g}:401"
        else:
            _parse_grid(p["z_grid"])
    if "input" in p:
        _parse_input(p["input"])
    if "grid_points" in p:
        # surface solver-domain violations as validation, not computation
        try:
            _solver_config(p)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
    return ExperimentConfig(command=args.command, params=p)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
    except ValidationError as exc:
        _error_record("validation", args.command, exc)
        return EXIT_VALIDATION
    try:
        return run(config)
    except (NonConvergenceError, ToleranceNotMetError, InsufficientSamplesError,
            ValueError, ArithmeticError, RuntimeError) as exc:
        _error_record("computation", config.command, exc)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
