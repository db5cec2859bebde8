"""Separability meta-evaluation: how distinguishable are two models' outputs on an input?"""

from sepkit.alignment import (
    AlignmentEstimate,
    estimate_cross_alignment,
    estimate_self_alignment,
    min_max_normalize,
)
from sepkit.corpus import Generation, GenerationSet
from sepkit.elo import EloConfig, EloTable, Match, bootstrap_ci, replay, sep_weight
from sepkit.errors import (
    ConfigError,
    DegenerateGenerationError,
    MissingAuxiliaryError,
    SamplingError,
    SepkitError,
    ValidationError,
)
from sepkit.ratings import ConsistencyRecord, RatingSet, consistency, preference_strength
from sepkit.separability import SeparabilityRecord, distribution_stats, finalize_run, separability
from sepkit.textsim import similarity

__version__ = "0.1.0"

__all__ = [
    "AlignmentEstimate",
    "ConfigError",
    "ConsistencyRecord",
    "DegenerateGenerationError",
    "EloConfig",
    "EloTable",
    "Generation",
    "GenerationSet",
    "Match",
    "MissingAuxiliaryError",
    "RatingSet",
    "SamplingError",
    "SepkitError",
    "SeparabilityRecord",
    "ValidationError",
    "bootstrap_ci",
    "consistency",
    "distribution_stats",
    "estimate_cross_alignment",
    "estimate_self_alignment",
    "finalize_run",
    "min_max_normalize",
    "preference_strength",
    "replay",
    "sep_weight",
    "separability",
    "similarity",
]
