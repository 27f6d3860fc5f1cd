"""Differentially private release of functions with Gaussian-process noise."""

from .audit import AuditReport, analytic_dp_check, power_experiment, sobolev_norm_1d
from .errors import (
    ConvergenceError,
    DegenerateDataError,
    GpdpError,
    LicenseError,
    NumericError,
    ParameterError,
    StateFileError,
)
from .estimators import (
    BandwidthEstimate,
    Dataset,
    ReleasedFunction,
    kde_build,
    kde_build_aniso,
    load_csv,
    release_function,
    rule_of_thumb_bandwidth,
    svm_objective,
    svm_train,
)
from .gp_noise import NoiseSampler, QueryState
from .kernels import GramMatrix, KernelSpec, gram, kernel_eval
from .privacy import (
    PrivacyParams,
    Provenance,
    SensitivityBound,
    c_beta,
    gaussian_mechanism_vector,
    mahalanobis_sensitivity,
    noise_scale,
)
from .rkhs import (
    RkhsElement,
    evaluate_points,
    projection_quadratic_form,
    rkhs_eval,
    rkhs_inner,
    rkhs_norm,
)
from .sensitivity import (
    empirical_rkhs_sensitivity,
    erm_sensitivity,
    kde_sensitivity_anisotropic,
    kde_sensitivity_gaussian,
    kde_sensitivity_sobolev,
)

__version__ = "0.1.0"
