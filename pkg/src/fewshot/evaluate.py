"""Nearest-support inference and the N-way K-shot evaluation harness."""

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .episodes import EpisodeConfig, sample_episode
from .errors import ConfigurationError
from .mining import distance_matrix
from .net import EmbeddingNet


def infer(query_embedding: np.ndarray, emb_support: np.ndarray, support_labels, n_pos: int) -> int:
    """Label a query by majority vote over its min(n_pos, |support|) nearest
    support samples.

    Boundary ties go to the lower support index; vote ties to the class with
    the smaller mean distance among its voters, then to the lower class id.
    """
    s_labels = np.asarray(support_labels, dtype=np.int64)
    if len(s_labels) == 0:
        raise ConfigurationError("support set is empty")
    d = np.sqrt(np.sum((np.asarray(query_embedding, dtype=np.float64) - emb_support) ** 2, axis=1))
    return _vote(d, s_labels, n_pos)


def _vote(dist_row: np.ndarray, s_labels: np.ndarray, n_pos: int) -> int:
    k = min(n_pos, len(s_labels))
    order = np.lexsort((np.arange(len(s_labels)), dist_row))
    neighbors = order[:k]
    votes: dict[int, list[float]] = {}
    for j in neighbors:
        votes.setdefault(int(s_labels[j]), []).append(float(dist_row[j]))
    # (-count, mean distance, class id): most votes, then closest voters, then lowest id
    return min(votes, key=lambda c: (-len(votes[c]), float(np.mean(votes[c])), c))


def infer_batch(emb_query: np.ndarray, emb_support: np.ndarray, support_labels, n_pos: int):
    """Vectorized distance computation, per-row voting; returns an int64 array."""
    s_labels = np.asarray(support_labels, dtype=np.int64)
    dists = distance_matrix(emb_query, emb_support)
    return np.array([_vote(dists[i], s_labels, n_pos) for i in range(dists.shape[0])],
                    dtype=np.int64)


@dataclass(frozen=True)
class EvalConfig:
    way: int = 5
    shot: int = 1
    n_queries_per_class: int = 15
    episodes: int = 1000
    n_pos: int = 3
    seed: int = 0

    def validate(self):
        if self.way < 2 or self.shot < 1 or self.episodes < 1:
            raise ConfigurationError("need way >= 2, shot >= 1, episodes >= 1")
        if self.n_queries_per_class < 1 or self.n_pos < 1:
            raise ConfigurationError("need n_queries_per_class >= 1 and n_pos >= 1")


@dataclass
class EvalReport:
    """Per-episode accuracies with mean and 95% normal-approximation CI."""

    episode_accuracies: list[float]
    mean_accuracy: float
    ci95: float
    config: dict
    seed: int

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    def accuracies_to_csv(self, path):
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["episode", "accuracy"])
            for i, acc in enumerate(self.episode_accuracies):
                writer.writerow([i, f"{acc:.17g}"])


def _episode_accuracy(net: EmbeddingNet, ds: Dataset, ep_cfg: EpisodeConfig,
                      n_pos: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    ep = sample_episode(ds, None, ep_cfg, rng)
    emb_s, _ = net.forward(ds.features_by_id(ep.support_ids))
    emb_q, _ = net.forward(ds.features_by_id(ep.query_ids))
    predicted = infer_batch(emb_q, emb_s, ep.support_labels, n_pos)
    return float(np.mean(predicted == ep.query_labels))


def evaluate(net: EmbeddingNet, test_ds: Dataset, cfg: EvalConfig, threads: int = 1) -> EvalReport:
    """Run cfg.episodes seeded episodes and aggregate episode accuracies.

    Episode i uses rng seed cfg.seed + i, so results are identical whether
    episodes run sequentially or in a thread pool.
    """
    cfg.validate()
    if len(test_ds.classes) < cfg.way:
        raise ConfigurationError(
            f"test data has {len(test_ds.classes)} classes, need {cfg.way}")
    need = cfg.shot + cfg.n_queries_per_class
    for k in test_ds.classes:
        if len(test_ds.class_index[k]) < need:
            raise ConfigurationError(f"test class {k} has fewer than {need} samples")

    ep_cfg = EpisodeConfig(n_classes=cfg.way, n_support=cfg.shot,
                           n_query=cfg.n_queries_per_class)
    seeds = [cfg.seed + i for i in range(cfg.episodes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            accs = list(pool.map(
                lambda s: _episode_accuracy(net, test_ds, ep_cfg, cfg.n_pos, s), seeds))
    else:
        accs = [_episode_accuracy(net, test_ds, ep_cfg, cfg.n_pos, s) for s in seeds]

    accs = [float(a) for a in accs]
    mean = float(np.mean(accs))
    std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    ci95 = 1.96 * std / np.sqrt(len(accs))
    return EvalReport(accs, mean, float(ci95), asdict(cfg), cfg.seed)
