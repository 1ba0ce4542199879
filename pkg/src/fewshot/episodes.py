"""Episode construction: sampled class subset, support/query sets, optional unlabeled pool draw."""

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, SamplingError

UNLABELED_MODES = ("none", "weakly_labeled", "completely_unlabeled")


@dataclass(frozen=True)
class EpisodeConfig:
    """Shape of one episode.

    n_unlabeled counts unlabeled samples per class slot; 0 means supervised.
    In weakly_labeled mode the unlabeled draw is class-conditioned on hidden
    labels; completely_unlabeled draws uniformly from the whole pool.
    """

    n_classes: int
    n_support: int
    n_query: int
    n_unlabeled: int = 0
    unlabeled_mode: str = "none"

    def validate(self):
        if self.n_classes < 2 or self.n_support < 1 or self.n_query < 1:
            raise ConfigurationError("need n_classes >= 2, n_support >= 1, n_query >= 1")
        if self.n_unlabeled < 0:
            raise ConfigurationError("n_unlabeled must be >= 0")
        if self.unlabeled_mode not in UNLABELED_MODES:
            raise ConfigurationError(f"unlabeled_mode must be one of {UNLABELED_MODES}")


@dataclass(frozen=True)
class Episode:
    """One few-shot task: (id, class) pairs for support and query, plus unlabeled ids."""

    support: tuple[tuple[int, int], ...]
    query: tuple[tuple[int, int], ...]
    unlabeled: tuple[int, ...]
    class_set: tuple[int, ...]

    @property
    def support_ids(self):
        return [sid for sid, _ in self.support]

    @property
    def support_labels(self):
        return np.array([lab for _, lab in self.support], dtype=np.int64)

    @property
    def query_ids(self):
        return [sid for sid, _ in self.query]

    @property
    def query_labels(self):
        return np.array([lab for _, lab in self.query], dtype=np.int64)


def sample_episode(ds_labeled: Dataset, ds_unlabeled: Dataset | None,
                   cfg: EpisodeConfig, rng: np.random.Generator) -> Episode:
    """Draw one episode: n_classes distinct classes, then per class n_support
    support and n_query query samples without replacement, then the unlabeled
    draw if configured. Deterministic given the rng state.
    """
    cfg.validate()
    classes = ds_labeled.classes
    if len(classes) < cfg.n_classes:
        raise SamplingError(
            f"need {cfg.n_classes} classes, labeled pool has {len(classes)}")
    need = cfg.n_support + cfg.n_query
    for k in classes:
        if len(ds_labeled.class_index[k]) < need:
            raise SamplingError(
                f"class {k} has {len(ds_labeled.class_index[k])} samples, needs {need}")

    chosen = rng.choice(np.array(classes, dtype=np.int64), size=cfg.n_classes, replace=False)
    support, query = [], []
    for k in chosen.tolist():
        pool = ds_labeled.class_index[k]
        picked = rng.choice(pool, size=need, replace=False)
        support.extend((int(s), k) for s in picked[:cfg.n_support])
        query.extend((int(s), k) for s in picked[cfg.n_support:])

    unlabeled: list[int] = []
    if cfg.unlabeled_mode != "none" and cfg.n_unlabeled > 0:
        if ds_unlabeled is None or len(ds_unlabeled) == 0:
            raise SamplingError("unlabeled draw requested but the unlabeled pool is empty")
        if cfg.unlabeled_mode == "weakly_labeled":
            if not ds_unlabeled.hidden_labels:
                raise SamplingError("weakly_labeled mode needs hidden labels on the unlabeled pool")
            by_class: dict[int, list[int]] = {}
            for sid, lab in ds_unlabeled.hidden_labels.items():
                by_class.setdefault(lab, []).append(sid)
            for k in chosen.tolist():
                pool = sorted(by_class.get(k, []))
                if len(pool) < cfg.n_unlabeled:
                    raise SamplingError(
                        f"class {k} has {len(pool)} unlabeled samples, needs {cfg.n_unlabeled}")
                picked = rng.choice(np.array(pool, dtype=np.int64),
                                    size=cfg.n_unlabeled, replace=False)
                unlabeled.extend(int(s) for s in picked)
        else:
            total = cfg.n_classes * cfg.n_unlabeled
            if len(ds_unlabeled) < total:
                raise SamplingError(
                    f"unlabeled pool has {len(ds_unlabeled)} samples, needs {total}")
            picked = rng.choice(ds_unlabeled.ids, size=total, replace=False)
            unlabeled.extend(int(s) for s in picked)

    return Episode(tuple(support), tuple(query), tuple(unlabeled),
                   tuple(int(k) for k in chosen))
