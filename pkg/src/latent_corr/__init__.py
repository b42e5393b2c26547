"""Latent one-factor threshold models: likelihood, estimators and experiments."""

__version__ = "0.1.0"

from .dist import StandardizedDistribution, from_name, gumbel, laplace, logistic, scaled_t, std_normal  # noqa: E402
from .errors import (  # noqa: E402
    DataQualityWarning,
    DegenerateFrequencyError,
    DegenerateFrequencyWarning,
    DomainError,
    FormatError,
    NumericalError,
    ParameterError,
)
from .estimators import EstimateRecord, binary_mle, hidden_pairs, trinary_moment, ustat_common_corr  # noqa: E402
from .likelihood import (  # noqa: E402
    kl_divergence,
    log_likelihood,
    normalized_loglik_curve,
    prop1_limit,
    prop2_limit,
    scaled_likelihood,
)
from .model import (  # noqa: E402
    BinarySample,
    LatentSample,
    ModelConfig,
    TrinarySample,
    discretize_binary,
    discretize_trinary,
    simulate_latent,
)

__all__ = [
    "BinarySample",
    "DataQualityWarning",
    "DegenerateFrequencyError",
    "DegenerateFrequencyWarning",
    "DomainError",
    "EstimateRecord",
    "FormatError",
    "LatentSample",
    "ModelConfig",
    "NumericalError",
    "ParameterError",
    "StandardizedDistribution",
    "TrinarySample",
    "__version__",
    "binary_mle",
    "discretize_binary",
    "discretize_trinary",
    "from_name",
    "gumbel",
    "hidden_pairs",
    "kl_divergence",
    "laplace",
    "log_likelihood",
    "logistic",
    "normalized_loglik_curve",
    "prop1_limit",
    "prop2_limit",
    "scaled_likelihood",
    "scaled_t",
    "simulate_latent",
    "std_normal",
    "trinary_moment",
    "ustat_common_corr",
]
