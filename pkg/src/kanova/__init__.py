"""FANOVA and KANOVA decompositions, projected kernels and Gaussian random fields."""

__version__ = "0.1.0"

from .decomposition import (
    FAMILY_NAMES,
    DecomposedKernel,
    ProductKernel,
    ProjectorSpec,
    additive_components,
    check_spd,
    family_kernel,
    kanova_term_generic,
    kanova_term_product,
    standard_family,
)
from .design import is_latin, lhs_maximin
from .errors import (
    DegenerateError,
    EvaluationError,
    InvalidArgumentError,
    KanovaError,
    NotPositiveDefiniteError,
    PreconditionError,
    ResourceLimitError,
)
from .experiment import ExperimentConfig, ResultTable, criterion_c, run_experiment
from .fanova import (
    GridFunction,
    fanova_effect,
    nystrom_spectrum,
    quadform_coeffs,
    sobol_indices,
    sobol_moment,
    sobol_path_samples,
)
from .grf import (
    GrfModel,
    cholesky_jitter,
    conditional_effect_cov,
    gram,
    krige_predict,
    simulate_paths,
    tau2_for_mismatch,
)
from .kernels import CentredKernel1D, Kernel1D, centre_kernel1d, parse_kernel
from .quadrature import Interval, Measure1D, ProductMeasure, gauss_legendre, tensor_rule

__all__ = [
    "FAMILY_NAMES",
    "CentredKernel1D",
    "DecomposedKernel",
    "DegenerateError",
    "EvaluationError",
    "ExperimentConfig",
    "GridFunction",
    "GrfModel",
    "Interval",
    "InvalidArgumentError",
    "KanovaError",
    "Kernel1D",
    "Measure1D",
    "NotPositiveDefiniteError",
    "PreconditionError",
    "ProductKernel",
    "ProductMeasure",
    "ProjectorSpec",
    "ResourceLimitError",
    "ResultTable",
    "additive_components",
    "centre_kernel1d",
    "check_spd",
    "cholesky_jitter",
    "conditional_effect_cov",
    "criterion_c",
    "family_kernel",
    "fanova_effect",
    "gauss_legendre",
    "gram",
    "is_latin",
    "kanova_term_generic",
    "kanova_term_product",
    "krige_predict",
    "lhs_maximin",
    "nystrom_spectrum",
    "parse_kernel",
    "quadform_coeffs",
    "run_experiment",
    "simulate_paths",
    "sobol_indices",
    "sobol_moment",
    "sobol_path_samples",
    "standard_family",
    "tau2_for_mismatch",
    "tensor_rule",
]
