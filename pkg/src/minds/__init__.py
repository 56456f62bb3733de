"""Joint latent-mixture modeling of mixed binary/continuous data.

Fits a Bayesian hierarchical model in which subjects belong to latent
clusters, cluster centers live in a low-dimensional trait space, and both a
binary item modality and a continuous measure modality load on the shared
traits. Inference is by Gibbs sampling with exact Polya-Gamma augmentation
for the binary modality.
"""

from .core import ChainResult, MixedDataset, ModelConfig, ParameterState, joint_log_likelihood
from .errors import DimensionError, IngestionError, MindsError, NumericalError
from .gibbs import SamplerSchedule, gibbs_sweep, resolve_identifiability, run_chain
from .predict import predict_memberships

__version__ = "0.1.0"

__all__ = [
    "ChainResult",
    "DimensionError",
    "IngestionError",
    "MindsError",
    "MixedDataset",
    "ModelConfig",
    "NumericalError",
    "ParameterState",
    "SamplerSchedule",
    "__version__",
    "gibbs_sweep",
    "joint_log_likelihood",
    "predict_memberships",
    "resolve_identifiability",
    "run_chain",
]
