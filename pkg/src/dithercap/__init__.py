"""Capacity and low-SNR analysis of the Gaussian channel behind a dithered
infinite-level uniform quantizer of step delta.

The equivalent channel adds Z = N + U, Gaussian noise plus independent
uniform dither over one quantizer cell.  Modules: channel densities and
constraints (channel_model), information functionals (info_measures), the
grid capacity solver (capacity_solver), Fisher-information slopes
(low_snr), analytic upper/lower bounds (bounds), seeded simulation checks
(montecarlo), quadrature and Q-function primitives (numerics), and the
command line front end (cli).
"""

from .bounds import (
    DualBoundParams,
    OptimizedDualBound,
    ThresholdProbe,
    dual_upper_bound,
    dual_upper_bound_optimized,
    kl_ratio_direct,
    slope_lower_bound,
    threshold_kl,
    threshold_prob,
)
from .capacity_solver import (
    DEFAULT_SOLVER,
    CapacityResult,
    NonConvergenceError,
    SolverConfig,
    capacity,
    capacity_sweep,
    unquantized_capacity_numeric,
)
from .channel_model import (
    ChannelParams,
    PowerConstraints,
    edge_breakpoints,
    log_noise_pdf,
    noise_pdf,
    noise_pdf_dx,
    noise_tail_mass,
    quantize,
    snqnr,
    support_radius,
)
from .info_measures import (
    InputDistribution,
    MIEstimate,
    binary_entropy_nats,
    differential_entropy,
    gaussian_capacity,
    mutual_information,
    one_bit_capacity,
    one_bit_low_snr_slope,
    output_pdf,
)
from .low_snr import (
    FisherTailParams,
    fisher_information,
    fisher_tail_upper_bound,
    high_res_fisher_integrand_limit,
    low_snr_slope,
)
from .montecarlo import (
    EntropyCheckReport,
    InsufficientSamplesError,
    PmfCheckReport,
    SampleRecord,
    SimRun,
    conditional_pmf_check,
    entropy_identity_check,
    mi_estimate,
    sample_second_moment,
    simulate,
)
from .numerics import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    ToleranceNotMetError,
    finite_diff,
    gaussian_q,
    integrate,
    log_gaussian_q,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityResult",
    "ChannelParams",
    "DEFAULT_QUADRATURE",
    "DEFAULT_SOLVER",
    "DualBoundParams",
    "EntropyCheckReport",
    "FisherTailParams",
    "InputDistribution",
    "InsufficientSamplesError",
    "MIEstimate",
    "NonConvergenceError",
    "OptimizedDualBound",
    "PmfCheckReport",
    "PowerConstraints",
    "QuadratureSpec",
    "SampleRecord",
    "SimRun",
    "SolverConfig",
    "ThresholdProbe",
    "ToleranceNotMetError",
    "binary_entropy_nats",
    "capacity",
    "capacity_sweep",
    "conditional_pmf_check",
    "differential_entropy",
    "dual_upper_bound",
    "dual_upper_bound_optimized",
    "edge_breakpoints",
    "entropy_identity_check",
    "finite_diff",
    "fisher_information",
    "fisher_tail_upper_bound",
    "gaussian_capacity",
    "gaussian_q",
    "high_res_fisher_integrand_limit",
    "integrate",
    "kl_ratio_direct",
    "log_gaussian_q",
    "log_noise_pdf",
    "low_snr_slope",
    "mi_estimate",
    "mutual_information",
    "noise_pdf",
    "noise_pdf_dx",
    "noise_tail_mass",
    "one_bit_capacity",
    "one_bit_low_snr_slope",
    "output_pdf",
    "quantize",
    "sample_second_moment",
    "simulate",
    "slope_lower_bound",
    "snqnr",
    "support_radius",
    "threshold_kl",
    "threshold_prob",
    "unquantized_capacity_numeric",
]
