"""Differentially private moment estimation in the weighted p0 model."""

from .estimator import (
    EstimateResult,
    MomentSystem,
    SolveOptions,
    SolveReport,
    Status,
    contrast_statistics,
    estimate,
    fixed_point_solve,
    newton_solve,
    residual,
    theoretical_covariance,
)
from .model import (
    ApproxInverse,
    BiDegree,
    InfoMatrix,
    ModelSpec,
    ParameterVector,
    WeightMatrix,
    approx_inverse,
    bi_degrees,
    edge_moments,
    edge_pmf,
    expected_degrees,
    fisher_information,
    log_normalizer,
    sample_graph,
)
from .privacy import (
    NoiseScale,
    PrivacyBudget,
    PrivateBiDegree,
    dp_log_ratio,
    noise_scale,
    privatize,
    sample_dlaplace,
    sum_noise_variance,
)

__version__ = "0.1.0"
