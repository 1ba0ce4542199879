"""Prototype baseline: per-class mean embeddings, softmax loss over squared
distances, nearest-prototype inference."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError


@dataclass
class Prototypes:
    """Class means over support embeddings, rows ordered by ascending class id."""

    class_ids: np.ndarray
    vectors: np.ndarray


def prototypes(emb_support: np.ndarray, support_labels) -> Prototypes:
    """Unweighted per-class mean of the support embeddings."""
    emb = np.asarray(emb_support, dtype=np.float64)
    labels = np.asarray(support_labels, dtype=np.int64)
    if emb.shape[0] != len(labels):
        raise ShapeError("one label per support embedding required")
    if len(labels) == 0:
        raise ConfigurationError("support set is empty")
    class_ids = np.unique(labels)
    vectors = np.vstack([emb[labels == k].mean(axis=0) for k in class_ids])
    return Prototypes(class_ids, vectors)


def proto_loss(emb_query: np.ndarray, query_labels, protos: Prototypes):
    """Mean cross-entropy of softmax over negative squared prototype distances.

    Returns (loss, grad wrt query embeddings, grad wrt prototype vectors),
    both gradients exact for the mean-reduced loss.
    """
    q = np.asarray(emb_query, dtype=np.float64)
    labels = np.asarray(query_labels, dtype=np.int64)
    row_of = {int(k): r for r, k in enumerate(protos.class_ids)}
    missing = set(labels.tolist()) - set(row_of)
    if missing:
        raise ConfigurationError(f"queries of classes {sorted(missing)} have no prototype")

    diff = q[:, None, :] - protos.vectors[None, :, :]          # (n_q, n_c, m)
    logits = -np.sum(diff * diff, axis=2)                      # negative squared distance
    logits_shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(logits_shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)

    n_q = q.shape[0]
    target_rows = np.array([row_of[int(t)] for t in labels])
    loss = float(-np.mean(logits_shifted[np.arange(n_q), target_rows]
                          - np.log(exp.sum(axis=1)))) + 0.0  # +0.0 folds -0.0

    dlogits = probs.copy()
    dlogits[np.arange(n_q), target_rows] -= 1.0
    dlogits /= n_q
    grad_q = np.einsum("ik,ikm->im", dlogits, -2.0 * diff)
    grad_protos = np.einsum("ik,ikm->km", dlogits, 2.0 * diff)
    return loss, grad_q, grad_protos


def proto_grad_to_support(grad_protos: np.ndarray, support_labels,
                          protos: Prototypes) -> np.ndarray:
    """Push prototype gradients back onto the support embeddings (mean backprop)."""
    labels = np.asarray(support_labels, dtype=np.int64)
    row_of = {int(k): r for r, k in enumerate(protos.class_ids)}
    counts = {int(k): int((labels == k).sum()) for k in protos.class_ids}
    grad_s = np.zeros((len(labels), grad_protos.shape[1]))
    for j, lab in enumerate(labels.tolist()):
        grad_s[j] = grad_protos[row_of[lab]] / counts[lab]
    return grad_s


def proto_infer(emb_query: np.ndarray, protos: Prototypes) -> np.ndarray:
    """Nearest prototype per query; exact ties go to the lower class id."""
    q = np.asarray(emb_query, dtype=np.float64)
    diff = q[:, None, :] - protos.vectors[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    # class_ids are sorted, so argmin's first-hit rule is the lower-id tie-break
    return protos.class_ids[np.argmin(d2, axis=1)]
