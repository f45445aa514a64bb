"""Link-prediction solver: embedding models, training, and ranking."""

from .models import (
    MODEL_KINDS,
    EmbeddingModel,
    circular_correlation,
    circular_convolution,
    init_model,
    load_model,
    save_model,
    score,
    score_batch,
    score_convkb,
    score_hole,
    score_transe,
)
from .rank import filtered_ranking, predict_tail, rank_filtered
from .train import (
    TrainConfig,
    TrainingDivergedError,
    loss_and_gradients,
    negative_sample,
    train,
)

__all__ = [
    "MODEL_KINDS",
    "EmbeddingModel",
    "TrainConfig",
    "TrainingDivergedError",
    "circular_correlation",
    "circular_convolution",
    "filtered_ranking",
    "init_model",
    "load_model",
    "loss_and_gradients",
    "negative_sample",
    "predict_tail",
    "rank_filtered",
    "save_model",
    "score",
    "score_batch",
    "score_convkb",
    "score_hole",
    "score_transe",
    "train",
]
