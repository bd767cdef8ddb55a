"""Sample-adaptive audio data augmentation with Bayesian policy search."""
__version__ = "0.1.0"

from .augment import AugmentationKind, AugmentationStrength, FeatureMatrix, Waveform, map_lambda
from .betafn import inc_beta
from .errors import DomainError, InputError, NumericalError, SapAugError, StateError
from .policy import PolicyParams, PolicySet, lambda_of_rank, rank_losses

__all__ = [
    "AugmentationKind",
    "AugmentationStrength",
    "DomainError",
    "FeatureMatrix",
    "InputError",
    "NumericalError",
    "PolicyParams",
    "PolicySet",
    "SapAugError",
    "StateError",
    "Waveform",
    "inc_beta",
    "lambda_of_rank",
    "map_lambda",
    "rank_losses",
]
