"""Few-shot classification by episodic semi-hard triplet mining.

Episodes pair a labeled support set with queries; per query the farthest
same-class and nearest other-class support embeddings are averaged into a
hinge loss that trains a small embedding network. Includes a pseudo-labeling
semi-supervised extension, a prototypical-loss baseline, and an N-way K-shot
evaluation harness.
"""

from .data import (Dataset, Sample, SplitSpec, SyntheticSpec, generate_synthetic,
                   load_csv, random_class_split, save_csv, split)
from .episodes import Episode, EpisodeConfig, sample_episode
from .errors import (ConfigurationError, ConsistencyError, CsvFormatError, FewshotError,
                     MiningError, SamplingError, ShapeError, TrainingError)
from .evaluate import EvalConfig, EvalReport, evaluate, infer, infer_batch
from .mining import (MiningConfig, MiningResult, distance_matrix, episode_loss,
                     loss_grad_embeddings, mine)
from .net import EmbeddingNet, ForwardTrace, Gradients, load_checkpoint, save_checkpoint
from .proto import Prototypes, proto_infer, proto_loss, prototypes
from .pseudo import PseudoLabel, augment_support, pseudo_label
from .train import AdamState, TrainConfig, Trainer, TrainLog, adam_step, lr_at, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ConfigurationError", "ConsistencyError", "CsvFormatError", "Dataset",
    "EmbeddingNet", "Episode", "EpisodeConfig", "EvalConfig", "EvalReport", "FewshotError",
    "ForwardTrace", "Gradients", "MiningConfig", "MiningError", "MiningResult",
    "Prototypes", "PseudoLabel", "Sample", "SamplingError", "ShapeError", "SplitSpec",
    "SyntheticSpec", "TrainConfig", "TrainLog", "Trainer", "TrainingError", "adam_step",
    "augment_support", "distance_matrix", "episode_loss", "evaluate", "generate_synthetic",
    "infer", "infer_batch", "load_checkpoint", "load_csv", "loss_grad_embeddings", "lr_at",
    "mine", "proto_infer", "proto_loss", "prototypes", "pseudo_label", "random_class_split",
    "sample_episode", "save_checkpoint", "save_csv", "split", "train",
]
