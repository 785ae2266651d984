"""Kernel interpolation and quadrature with continuous volume-sampled
node designs: spectral models, stable symmetric-polynomial closed forms,
per-design Gram computations, exact and MCMC samplers, and bound
certificates, validated by Monte Carlo at desk scale."""

from .bounds import (
    BoundReport,
    beta_n,
    bound_report,
    error_upper_bound,
    family_beta_bound,
    head_tail_error_bound,
    neg_power_norm_sq,
    smoothness_error_bound,
    width_lower_bound,
)
from .gram import (
    ConsistencyError,
    Design,
    GramFactor,
    SingularDesignError,
    cross_leverage,
    error_mode_decomposition,
    gram,
    gram_from_kernel,
    interpolation_error_sq,
    leverage,
    leverage_matrix,
    optimal_weights,
    power_function,
    worst_case_error_sq,
)
from .quad import (
    QuadratureRule,
    bias_closed_form,
    make_rule,
    quadrature_estimate,
    true_integral,
    uniform_error_bound,
)
from .sampler import (
    McmcDiagnostics,
    RngStream,
    SamplerStallError,
    mcmc_acceptance_ratio,
    sample_iid,
    sample_projection_dpp,
    sample_subset,
    sample_vs_exact,
    sample_vs_mcmc,
)
from .spectra import (
    BasisMismatchError,
    CoefficientVector,
    L2,
    RKHS,
    SpectralModel,
    TailBound,
    classical_kernel_closed_form,
    coeff_eval,
    default_truncation,
    eigenfunction_eval,
    eigenfunction_matrix,
    eigenvalue,
    embed,
    embedding_eval,
    embedding_norm_sq,
    kernel_eval,
    kernel_matrix,
    tail_mass,
    truncation_diagnostic,
)
from .sympoly import (
    EspTable,
    brute_force_esp,
    delta_n,
    esp_table,
    expected_cross_leverage,
    expected_eig_error,
    expected_eig_error_profile,
    expected_embedding_error,
    expected_leverage,
    expected_leverage_profile,
    log_normalization,
    mixture_weight,
    spectrum_table,
)

__version__ = "0.1.0"
