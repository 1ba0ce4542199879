"""Data model, synthetic cluster generation, class-disjoint splits, CSV and manifest I/O."""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, CsvFormatError

UNLABELED = -1


@dataclass(frozen=True)
class Sample:
    """One data point: stable id, feature vector, optional class label."""

    id: int
    features: np.ndarray
    label: int | None


class Dataset:
    """Immutable collection of samples with a class index over the labeled ones.

    Unlabeled samples carry label ``None``. When a dataset is produced by
    stripping labels (see :func:`split`), the original labels are kept in
    ``hidden_labels`` so class-conditioned sampling of "unlabeled" data stays
    possible; they are never exposed through the :class:`Sample` interface.
    """

    def __init__(self, ids, features, labels, hidden_labels=None):
        ids = np.array(ids, dtype=np.int64)
        features = np.array(features, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64)
        if features.ndim != 2:
            raise ConfigurationError("features must be a 2-D array")
        if not (len(ids) == len(features) == len(labels)):
            raise ConfigurationError("ids, features and labels must have equal length")
        if len(ids):
            if int(ids.min()) < 0:
                raise ConfigurationError("sample ids must be non-negative")
            if len(np.unique(ids)) != len(ids):
                raise ConfigurationError("sample ids must be unique")
        if not np.all(np.isfinite(features)):
            raise ConfigurationError("features must be finite")
        if np.any((labels != UNLABELED) & (labels < 1)):
            raise ConfigurationError("class labels must be >= 1")

        self.ids = ids
        self.features = features
        self.labels = labels
        self.hidden_labels = dict(hidden_labels) if hidden_labels else {}
        self._row_of = {int(sid): row for row, sid in enumerate(ids)}

        index: dict[int, list[int]] = {}
        for sid, lab in zip(ids.tolist(), labels.tolist()):
            if lab != UNLABELED:
                index.setdefault(lab, []).append(sid)
        self.class_index = {k: np.array(v, dtype=np.int64) for k, v in sorted(index.items())}

        for arr in (self.ids, self.features, self.labels):
            arr.setflags(write=False)

    def __len__(self):
        return len(self.ids)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> list[int]:
        """Sorted class ids present among the labeled samples."""
        return list(self.class_index)

    def sample_by_id(self, sid: int) -> Sample:
        row = self._row_of[int(sid)]
        lab = int(self.labels[row])
        return Sample(int(sid), self.features[row], None if lab == UNLABELED else lab)

    def features_by_id(self, sids) -> np.ndarray:
        """Feature rows for a sequence of sample ids, in the given order."""
        rows = [self._row_of[int(s)] for s in sids]
        return self.features[rows]

    def equals(self, other: "Dataset") -> bool:
        return (
            np.array_equal(self.ids, other.ids)
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.hidden_labels == other.hidden_labels
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic Gaussian clusters: one mean per class, shared noise scale."""

    num_classes: int
    samples_per_class: int
    feature_dim: int
    class_mean_scale: float
    noise_sigma: float
    seed: int

    def validate(self):
        if self.num_classes < 1 or self.samples_per_class < 1 or self.feature_dim < 1:
            raise ConfigurationError("num_classes, samples_per_class and feature_dim must be >= 1")
        if not self.noise_sigma > 0:
            raise ConfigurationError("noise_sigma must be > 0")
        if not np.isfinite(self.class_mean_scale):
            raise ConfigurationError("class_mean_scale must be finite")


@dataclass(frozen=True)
class SplitSpec:
    """Class-disjoint train/val/test assignment plus the per-class labeled fraction."""

    train_classes: tuple[int, ...]
    val_classes: tuple[int, ...]
    test_classes: tuple[int, ...]
    labeled_fraction: float = 1.0


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw class means from a scaled standard Gaussian, then samples around them.

    Fully deterministic given ``spec.seed``; ids run 0..n-1 in class order and
    labels run 1..num_classes.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    means = spec.class_mean_scale * rng.standard_normal((spec.num_classes, spec.feature_dim))
    blocks = []
    for k in range(spec.num_classes):
        noise = spec.noise_sigma * rng.standard_normal((spec.samples_per_class, spec.feature_dim))
        blocks.append(means[k] + noise)
    features = np.vstack(blocks)
    n = spec.num_classes * spec.samples_per_class
    ids = np.arange(n, dtype=np.int64)
    labels = np.repeat(np.arange(1, spec.num_classes + 1, dtype=np.int64), spec.samples_per_class)
    return Dataset(ids, features, labels)


def _take(ds: Dataset, sids, strip_labels=False) -> Dataset:
    rows = [ds._row_of[int(s)] for s in sids]
    ids = ds.ids[rows]
    features = ds.features[rows]
    if strip_labels:
        hidden = {int(ds.ids[r]): int(ds.labels[r]) for r in rows}
        labels = np.full(len(rows), UNLABELED, dtype=np.int64)
        return Dataset(ids, features, labels, hidden_labels=hidden)
    return Dataset(ids, features, ds.labels[rows])


def split(ds: Dataset, spec: SplitSpec, seed: int):
    """Partition ``ds`` into (train_labeled, train_unlabeled, val, test).

    Within each train class, ceil(labeled_fraction * n) samples are kept
    labeled (seeded choice without replacement) and the rest move to the
    unlabeled pool with labels stripped but remembered in ``hidden_labels``.
    Val and test keep every sample of their assigned classes.
    """
    train = tuple(sorted(spec.train_classes))
    val = tuple(sorted(spec.val_classes))
    test = tuple(sorted(spec.test_classes))
    sets = [set(train), set(val), set(test)]
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise ConfigurationError("train/val/test class sets must be pairwise disjoint")
    known = set(ds.class_index)
    missing = (sets[0] | sets[1] | sets[2]) - known
    if missing:
        raise ConfigurationError(f"classes not present in the dataset: {sorted(missing)}")
    if not 0.0 < spec.labeled_fraction <= 1.0:
        raise ConfigurationError("labeled_fraction must be in (0, 1]")

    rng = np.random.default_rng(seed)
    labeled_ids: list[int] = []
    unlabeled_ids: list[int] = []
    for k in train:
        class_ids = ds.class_index[k]
        n_lab = math.ceil(spec.labeled_fraction * len(class_ids))
        chosen = rng.choice(class_ids, size=n_lab, replace=False)
        chosen_set = set(chosen.tolist())
        labeled_ids.extend(sorted(chosen_set))
        unlabeled_ids.extend(int(s) for s in class_ids if int(s) not in chosen_set)

    out = (
        _take(ds, labeled_ids),
        _take(ds, unlabeled_ids, strip_labels=True),
        _take(ds, [s for k in val for s in ds.class_index[k]]),
        _take(ds, [s for k in test for s in ds.class_index[k]]),
    )
    # an empty val/test is fine when its class set was left empty on purpose
    for name, classes, part in (("train", train, out[0]), ("val", val, out[2]),
                                ("test", test, out[3])):
        if classes and len(part) == 0:
            raise ConfigurationError(f"{name} split is empty")
    if not train:
        raise ConfigurationError("train split is empty")
    return out


def random_class_split(ds: Dataset, train_fraction: float, val_fraction: float,
                       labeled_fraction: float, seed: int) -> SplitSpec:
    """Assign classes to train/val/test by seeded shuffle; test gets the remainder."""
    if train_fraction <= 0 or val_fraction < 0 or train_fraction + val_fraction >= 1.0:
        raise ConfigurationError("need 0 < train_fraction and train_fraction + val_fraction < 1")
    classes = np.array(ds.classes, dtype=np.int64)
    k = len(classes)
    n_train = max(1, round(train_fraction * k))
    n_val = max(1, round(val_fraction * k)) if val_fraction > 0 else 0
    if n_train + n_val >= k:
        raise ConfigurationError(f"fractions leave no test classes (have {k} classes)")
    perm = np.random.default_rng(seed).permutation(classes)
    return SplitSpec(
        train_classes=tuple(int(c) for c in perm[:n_train]),
        val_classes=tuple(int(c) for c in perm[n_train:n_train + n_val]),
        test_classes=tuple(int(c) for c in perm[n_train + n_val:]),
        labeled_fraction=labeled_fraction,
    )


def save_csv(ds: Dataset, path):
    """Write ``id,label,f0..f{F-1}`` rows; empty label field means unlabeled.

    Floats are rendered with 17 significant digits so a load round-trips
    bit-exactly. UTF-8, LF line endings.
    """
    path = Path(path)
    cols = ",".join(f"f{j}" for j in range(ds.feature_dim))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"id,label,{cols}\n")
        for row in range(len(ds)):
            lab = int(ds.labels[row])
            lab_txt = "" if lab == UNLABELED else str(lab)
            feats = ",".join(f"{x:.17g}" for x in ds.features[row])
            fh.write(f"{int(ds.ids[row])},{lab_txt},{feats}\n")


def load_csv(path) -> Dataset:
    """Parse a dataset CSV written by :func:`save_csv`; errors carry line numbers."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if len(header) < 3 or header[0] != "id" or header[1] != "label":
        raise CsvFormatError(f"{path}: line 1: header must be id,label,f0,...")
    dim = len(header) - 2

    ids, labels, rows = [], [], []
    seen: set[int] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise CsvFormatError(
                f"{path}: line {lineno}: expected {dim + 2} fields, got {len(parts)}")
        try:
            sid = int(parts[0])
        except ValueError:
            raise CsvFormatError(f"{path}: line {lineno}: bad id {parts[0]!r}") from None
        if sid in seen:
            raise CsvFormatError(f"{path}: line {lineno}: duplicate id {sid}")
        seen.add(sid)
        if parts[1] == "":
            lab = UNLABELED
        else:
            try:
                lab = int(parts[1])
            except ValueError:
                raise CsvFormatError(f"{path}: line {lineno}: bad label {parts[1]!r}") from None
        try:
            feats = [float(x) for x in parts[2:]]
        except ValueError:
            raise CsvFormatError(f"{path}: line {lineno}: non-numeric feature") from None
        ids.append(sid)
        labels.append(lab)
        rows.append(feats)
    return Dataset(ids, np.array(rows, dtype=np.float64).reshape(len(rows), dim), labels)


def save_split_manifest(path, spec: SplitSpec, seed: int):
    """Record the split spec and seed so the split is reproducible from this file alone."""
    payload = {
        "split": {
            "seed": seed,
            "labeled_fraction": spec.labeled_fraction,
            "train_classes": sorted(spec.train_classes),
            "val_classes": sorted(spec.val_classes),
            "test_classes": sorted(spec.test_classes),
        }
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_split_manifest(path) -> tuple[SplitSpec, int]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        s = payload["split"]
        spec = SplitSpec(
            train_classes=tuple(s["train_classes"]),
            val_classes=tuple(s["val_classes"]),
            test_classes=tuple(s["test_classes"]),
            labeled_fraction=float(s["labeled_fraction"]),
        )
        return spec, int(s["seed"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"{path}: malformed split manifest: {exc}") from None
