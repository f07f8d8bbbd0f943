"""Hierarchical Banzhaf interaction over pre-extracted video/text embeddings."""

from .alignment import (
    HierarchyConfig,
    HierarchyResult,
    SimilarityGame,
    alignment_matrix,
    coalition_similarity,
    run_hierarchy,
    similarity_score,
)
from .errors import ConfigError, HBIError, NumericError
from .features import FeatureMatrix, Level, Modality
from .game import (
    AdditiveGame,
    CharacteristicFn,
    InteractionEstimate,
    InteractionMap,
    PlayerSet,
    TabularGame,
    UnanimityGame,
    exact_interaction,
    interaction_matrix,
    sampled_interaction,
)
from .merge import ClusterAssignment, MergeConfig, dpc_knn, weighted_merge
from .objectives import (
    LossReport,
    LossWeights,
    banzhaf_loss,
    contrastive_loss,
    distillation_loss,
    to_distributions,
    total_loss,
)
from .reconstruction import GateConfig, cross_modal_text, cross_modal_video, fuse, reconstruct

__version__ = "0.1.0"
