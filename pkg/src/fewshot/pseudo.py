"""Pseudo-labeling of an unlabeled draw against the support set, and support augmentation."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ConsistencyError
from .evaluate import _vote
from .mining import distance_matrix


@dataclass(frozen=True)
class PseudoLabel:
    """One assignment: sample id, voted class, mean distance to the voting neighbors."""

    sample_id: int
    label: int
    confidence: float


def pseudo_label(emb_unlabeled: np.ndarray, emb_support: np.ndarray, support_labels,
                 unlabeled_ids, n_pos: int) -> list[PseudoLabel]:
    """Assign each unlabeled embedding the label the nearest-support vote produces.

    This is the same rule test-time inference uses; the label decision itself
    is discrete, so no gradient flows through it. The recorded confidence
    (mean distance to the winning class's voters) is diagnostic only.
    """
    s_labels = np.asarray(support_labels, dtype=np.int64)
    if len(s_labels) == 0:
        raise ConfigurationError("support set is empty")
    if len(np.unique(s_labels)) < 2:
        raise ConfigurationError("pseudo-labeling needs support from at least 2 classes")
    emb_r = np.asarray(emb_unlabeled, dtype=np.float64)
    if emb_r.shape[0] != len(unlabeled_ids):
        raise ConfigurationError("one id per unlabeled embedding required")

    dists = distance_matrix(emb_r, emb_support)
    out = []
    k = min(n_pos, len(s_labels))
    for i, sid in enumerate(unlabeled_ids):
        label = _vote(dists[i], s_labels, n_pos)
        order = np.lexsort((np.arange(len(s_labels)), dists[i]))
        voter_d = [float(dists[i, j]) for j in order[:k] if int(s_labels[j]) == label]
        out.append(PseudoLabel(int(sid), int(label), float(np.mean(voter_d))))
    return out


def augment_support(support: tuple[tuple[int, int], ...],
                    pseudo: list[PseudoLabel]) -> list[tuple[int, int]]:
    """Concatenate pseudo-labeled entries after the original support.

    Original-first ordering keeps the mining tie-breaks stable; colliding ids
    would make gradient routing ambiguous and are rejected.
    """
    support_ids = {sid for sid, _ in support}
    for p in pseudo:
        if p.sample_id in support_ids:
            raise ConsistencyError(f"pseudo-labeled id {p.sample_id} already in the support set")
    return list(support) + [(p.sample_id, p.label) for p in pseudo]
