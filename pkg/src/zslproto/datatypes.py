"""Core in-memory types: attribute matrices, feature datasets, prototypes.

All numeric payloads are float64 in memory (solver precision); the on-disk
bundle format stores float32 (see bundle.py). Instances validate their
invariants on construction, their arrays are made read-only, and they are
safe to share across threads afterwards.

Class indexing is 0-based throughout: seen classes occupy indices
0..num_seen-1, unseen classes num_seen..num_seen+num_unseen-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

SPLIT_NAMES = ("train_seen", "test_seen", "test_unseen")


def _finite_matrix(values, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if arr.ndim != 2:
        raise DataError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"{name} has a non-finite entry at row {i}, column {j}")
    return arr


def _int_vector(values, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.int64))
    if arr.ndim != 1:
        raise DataError(f"{name} must be a 1-d index vector, got shape {arr.shape}")
    return arr


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class AttributeMatrix:
    """Class-by-attribute score matrix shared by seen and unseen classes.

    Row c holds the semantic descriptor of class c; seen-class rows come
    first. ``class_names`` is optional presentation metadata carried through
    bundle round-trips.
    """

    values: np.ndarray
    num_seen: int
    num_unseen: int
    class_ids: np.ndarray = field(default=None)  # type: ignore[assignment]
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        values = _finite_matrix(self.values, "attribute matrix")
        if self.num_seen < 1 or self.num_unseen < 0:
            raise DataError(
                f"invalid class counts: num_seen={self.num_seen}, num_unseen={self.num_unseen}"
            )
        total = self.num_seen + self.num_unseen
        if values.shape[0] != total:
            raise DataError(
                f"attribute matrix has {values.shape[0]} rows, expected "
                f"num_seen + num_unseen = {total}"
            )
        class_ids = (
            np.arange(total, dtype=np.int64)
            if self.class_ids is None
            else _int_vector(self.class_ids, "class_ids")
        )
        if class_ids.shape[0] != total:
            raise DataError(f"class_ids has length {class_ids.shape[0]}, expected {total}")
        if self.class_names is not None and len(self.class_names) != total:
            raise DataError(f"class_names has length {len(self.class_names)}, expected {total}")
        _freeze(values, class_ids)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "class_ids", class_ids)
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen

    @property
    def attr_dim(self) -> int:
        return self.values.shape[1]

    @property
    def seen_rows(self) -> np.ndarray:
        """View of the seen-class rows (first num_seen rows)."""
        return self.values[: self.num_seen]

    @property
    def unseen_rows(self) -> np.ndarray:
        """View of the unseen-class rows (last num_unseen rows)."""
        return self.values[self.num_seen :]


@dataclass(frozen=True)
class FeatureDataset:
    """Labeled visual feature vectors plus seen/unseen split bookkeeping.

    ``splits`` maps each of train_seen / test_seen / test_unseen to a row
    index list. Split lists are disjoint and in bounds; train_seen and
    test_seen rows carry seen-class labels, test_unseen rows carry
    unseen-class labels.
    """

    features: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray]
    num_seen: int
    num_unseen: int

    def __post_init__(self):
        features = _finite_matrix(self.features, "feature matrix")
        labels = _int_vector(self.labels, "labels")
        n = features.shape[0]
        if labels.shape[0] != n:
            raise DataError(f"{labels.shape[0]} labels for {n} feature rows")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise DataError("label outside 0..num_classes-1")

        splits = {}
        seen_so_far = np.zeros(n, dtype=bool)
        for name in SPLIT_NAMES:
            if name not in self.splits:
                raise DataError(f"missing split '{name}'")
            idx = _int_vector(self.splits[name], f"split '{name}'")
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise DataError(f"split '{name}' has an out-of-bounds index")
            if np.any(seen_so_far[idx]):
                raise DataError(f"split '{name}' overlaps another split")
            seen_so_far[idx] = True
            splits[name] = idx
        unknown = set(self.splits) - set(SPLIT_NAMES)
        if unknown:
            raise DataError(f"unknown split names: {sorted(unknown)}")

        for name in ("train_seen", "test_seen"):
            if splits[name].size and labels[splits[name]].max() >= self.num_seen:
                raise DataError(f"split '{name}' contains an unseen-class label")
        if splits["test_unseen"].size and labels[splits["test_unseen"]].min() < self.num_seen:
            raise DataError("split 'test_unseen' contains a seen-class label")

        _freeze(features, labels, *splits.values())
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "splits", splits)

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def split_features(self, name: str) -> np.ndarray:
        return self.features[self.splits[name]]

    def split_labels(self, name: str) -> np.ndarray:
        return self.labels[self.splits[name]]


@dataclass(frozen=True)
class PrototypeSet:
    """Synthesized cluster centers standing in for unseen-class samples.

    One row per prototype; ``lambdas[i]`` records the ridge strength that
    generated row i. May be empty (zero rows).
    """

    prototypes: np.ndarray
    labels: np.ndarray
    lambdas: np.ndarray
    num_seen: int
    num_unseen: int

    def __post_init__(self):
        protos = _finite_matrix(self.prototypes, "prototype matrix")
        labels = _int_vector(self.labels, "prototype labels")
        lambdas = np.ascontiguousarray(np.asarray(self.lambdas, dtype=np.float64))
        if labels.shape[0] != protos.shape[0] or lambdas.shape[0] != protos.shape[0]:
            raise DataError("prototypes, labels, and lambdas must have equal length")
        if labels.size and (labels.min() < self.num_seen or labels.max() >= self.num_classes):
            raise DataError("prototype label is not an unseen class index")
        if lambdas.size and not np.all(np.isfinite(lambdas)):
            raise DataError("non-finite lambda value")
        _freeze(protos, labels, lambdas)
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "lambdas", lambdas)

    def __len__(self) -> int:
        return self.prototypes.shape[0]

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen


@dataclass(frozen=True)
class TrainingSet:
    """Unified training view: real train_seen rows followed by prototypes.

    ``is_synthetic`` flags prototype rows. Row order is fixed here;
    shuffling happens inside the training loop from its own seed stream.
    """

    features: np.ndarray
    labels: np.ndarray
    is_synthetic: np.ndarray
    num_seen: int
    num_unseen: int

    def __post_init__(self):
        features = _finite_matrix(self.features, "training features")
        labels = _int_vector(self.labels, "training labels")
        flags = np.ascontiguousarray(np.asarray(self.is_synthetic, dtype=bool))
        if labels.shape[0] != features.shape[0] or flags.shape[0] != features.shape[0]:
            raise DataError("training features, labels, and flags must have equal length")
        _freeze(features, labels, flags)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "is_synthetic", flags)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen
