"""Semi-hard triplet selection over a query-support distance matrix and its exact gradients.

Per query, the positive distance is the mean of the k farthest same-class
support distances and the negative distance the mean of the k nearest
other-class distances; the per-query hinge is max(pos - neg + margin, 0) and
the episode loss is the sum over queries.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConsistencyError, MiningError, ShapeError

# Coincident embeddings make the distance gradient singular; treat as flat.
ZERO_DISTANCE_GUARD = 1e-12


@dataclass(frozen=True)
class MiningConfig:
    """How many positives/negatives are averaged, and the hinge margin."""

    n_pos: int = 3
    n_neg: int = 5
    margin: float = 0.3

    def validate(self):
        if self.n_pos < 1 or self.n_neg < 1:
            raise ConfigurationError("n_pos and n_neg must be >= 1")
        if self.margin < 0:
            raise ConfigurationError("margin must be >= 0")


@dataclass
class MiningResult:
    """Selection record for one query, kept for gradient routing and introspection."""

    pos_distance: float
    neg_distance: float
    loss: float
    pos_columns: np.ndarray
    neg_columns: np.ndarray


def distance_matrix(emb_query: np.ndarray, emb_support: np.ndarray) -> np.ndarray:
    """Plain (non-squared) Euclidean distances, queries along rows."""
    q = np.asarray(emb_query, dtype=np.float64)
    s = np.asarray(emb_support, dtype=np.float64)
    if q.ndim != 2 or s.ndim != 2 or q.shape[1] != s.shape[1]:
        raise ShapeError(f"embedding dims differ: {q.shape} vs {s.shape}")
    diff = q[:, None, :] - s[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _top_k(dists: np.ndarray, columns: np.ndarray, k: int, largest: bool) -> np.ndarray:
    # ties at the k-th boundary go to the lower column index
    key = -dists if largest else dists
    order = np.lexsort((columns, key))
    return columns[order[:k]]


def mine(dists: np.ndarray, query_labels, support_labels, cfg: MiningConfig) -> list[MiningResult]:
    """Select averaged farthest positives and nearest negatives for every query.

    Selection counts clamp to the available positives/negatives. A query with
    no positive or no negative support column is an error.
    """
    cfg.validate()
    dists = np.asarray(dists, dtype=np.float64)
    q_labels = np.asarray(query_labels, dtype=np.int64)
    s_labels = np.asarray(support_labels, dtype=np.int64)
    if dists.shape != (len(q_labels), len(s_labels)):
        raise ShapeError(
            f"distance matrix {dists.shape} does not match labels "
            f"({len(q_labels)} queries, {len(s_labels)} support)")

    columns = np.arange(len(s_labels))
    results = []
    for i in range(len(q_labels)):
        pos_mask = s_labels == q_labels[i]
        n_pos_avail = int(pos_mask.sum())
        n_neg_avail = len(s_labels) - n_pos_avail
        if n_pos_avail == 0:
            raise MiningError(f"query {i} (class {q_labels[i]}) has no positive support samples")
        if n_neg_avail == 0:
            raise MiningError(f"query {i} (class {q_labels[i]}) has no negative support samples")

        pos_cols = _top_k(dists[i, pos_mask], columns[pos_mask],
                          min(cfg.n_pos, n_pos_avail), largest=True)
        neg_cols = _top_k(dists[i, ~pos_mask], columns[~pos_mask],
                          min(cfg.n_neg, n_neg_avail), largest=False)
        d_pos = float(np.mean(dists[i, pos_cols]))
        d_neg = float(np.mean(dists[i, neg_cols]))
        loss = max(d_pos - d_neg + cfg.margin, 0.0)
        results.append(MiningResult(d_pos, d_neg, loss, pos_cols, neg_cols))
    return results


def episode_loss(results: list[MiningResult]) -> float:
    """Sum (not mean) of the per-query hinge losses."""
    if not results:
        raise ConfigurationError("episode_loss needs at least one mining result")
    return float(sum(r.loss for r in results))


def loss_grad_embeddings(emb_query: np.ndarray, emb_support: np.ndarray,
                         results: list[MiningResult], cfg: MiningConfig):
    """Exact gradient of the episode loss w.r.t. every query and support embedding.

    The selected index sets are held fixed (the selection is piecewise
    constant in the embeddings). Inactive hinges contribute nothing, and
    pair contributions vanish below the coincident-point guard.
    """
    q = np.asarray(emb_query, dtype=np.float64)
    s = np.asarray(emb_support, dtype=np.float64)
    if len(results) != q.shape[0]:
        raise ConsistencyError(f"{len(results)} results for {q.shape[0]} queries")
    grad_q = np.zeros_like(q)
    grad_s = np.zeros_like(s)
    for i, res in enumerate(results):
        _check_fresh(q[i], s, res)
        if res.loss <= 0.0:
            continue
        for cols, sign in ((res.pos_columns, 1.0), (res.neg_columns, -1.0)):
            scale = sign / len(cols)
            for j in cols:
                diff = q[i] - s[j]
                dist = float(np.sqrt(diff @ diff))
                if dist < ZERO_DISTANCE_GUARD:
                    continue
                g = (scale / dist) * diff
                grad_q[i] += g
                grad_s[j] -= g
    return grad_q, grad_s


def _check_fresh(q_row: np.ndarray, s: np.ndarray, res: MiningResult):
    # results computed on different embeddings would route gradients nonsensically
    for cols, stored in ((res.pos_columns, res.pos_distance), (res.neg_columns, res.neg_distance)):
        d = np.sqrt(np.sum((q_row[None, :] - s[cols]) ** 2, axis=1))
        if abs(float(np.mean(d)) - stored) > 1e-9:
            raise ConsistencyError("mining results are stale for these embeddings")
