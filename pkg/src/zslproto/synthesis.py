"""Prototype synthesis for unseen classes.

The seen-to-unseen relation is learned by ridge-coding each unseen
attribute row against the seen attribute rows; applying the same
coefficients to the seen class means yields an estimated cluster center.
Drawing several ridge strengths per class produces several prototypes,
each capturing a slightly different mix of seen classes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import read_labels, read_matrix, write_labels, write_matrix
from .datatypes import AttributeMatrix, FeatureDataset, PrototypeSet, TrainingSet
from .errors import ConfigError, DataError, NumericalError
from .rng import substream

PROTO_MATRIX_FILE = "prototypes.zfb"
PROTO_LABELS_FILE = "labels.zfb"
PROTO_LAMBDAS_FILE = "lambdas.zfb"
PROTO_META_FILE = "meta.json"


@dataclass(frozen=True)
class ClassMeans:
    """Per-class mean features of the seen classes, one column per class."""

    means: np.ndarray  # feature_dim x num_seen
    counts: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if means.ndim != 2 or counts.shape != (means.shape[1],):
            raise DataError("means must be feature_dim x num_seen with one count per class")
        if counts.size and counts.min() < 1:
            raise DataError("every seen class needs at least one training sample")
        if not np.all(np.isfinite(means)):
            raise DataError("non-finite class mean")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "counts", counts)

    @property
    def num_seen(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class SparseCode:
    """Ridge-coding coefficients over the seen classes for one target."""

    coefficients: np.ndarray
    lam: float
    target_class: int = -1

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=np.float64)
        if coef.ndim != 1 or not np.all(np.isfinite(coef)):
            raise DataError("coefficients must be a finite 1-d vector")
        if self.lam < 0 or not np.isfinite(self.lam):
            raise DataError(f"ridge strength must be finite and >= 0, got {self.lam}")
        object.__setattr__(self, "coefficients", coef)


def compute_seen_means(dataset: FeatureDataset) -> ClassMeans:
    """Arithmetic mean of the train_seen features of each seen class."""
    feats = dataset.split_features("train_seen")
    labels = dataset.split_labels("train_seen")
    means = np.empty((dataset.feature_dim, dataset.num_seen))
    counts = np.empty(dataset.num_seen, dtype=np.int64)
    for c in range(dataset.num_seen):
        rows = feats[labels == c]
        if rows.shape[0] == 0:
            raise DataError(f"seen class {c} has no training samples")
        means[:, c] = rows.mean(axis=0)
        counts[c] = rows.shape[0]
    return ClassMeans(means=means, counts=counts)


def ridge_code(
    target_row: np.ndarray,
    seen_rows: np.ndarray,
    lam: float,
    target_class: int = -1,
) -> SparseCode:
    """Solve the regularized reconstruction of one attribute row.

    Minimizes ||target - seen_rows.T @ alpha||^2 + lam * ||alpha||^2 via the
    closed-form normal equations in float64. With lam = 0 the normal matrix
    must be invertible.
    """
    target = np.asarray(target_row, dtype=np.float64).ravel()
    rows = np.asarray(seen_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != target.shape[0]:
        raise DataError(
            f"seen rows have shape {rows.shape}, incompatible with target of length {target.shape[0]}"
        )
    if lam < 0 or not np.isfinite(lam):
        raise ConfigError(f"ridge strength must be finite and >= 0, got {lam}")

    design = rows.T  # attr_dim x num_seen
    gram = design.T @ design + lam * np.eye(rows.shape[0])
    rhs = design.T @ target
    try:
        alpha = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"singular normal matrix at ridge strength {lam}") from e
    if not np.all(np.isfinite(alpha)):
        raise NumericalError(f"non-finite coefficients at ridge strength {lam}")
    return SparseCode(coefficients=alpha, lam=float(lam), target_class=target_class)


def synthesize_prototype(means: ClassMeans, code: SparseCode) -> np.ndarray:
    """Estimated cluster center: the coefficient-weighted mix of seen means."""
    if code.coefficients.shape[0] != means.num_seen:
        raise DataError(
            f"{code.coefficients.shape[0]} coefficients for {means.num_seen} seen classes"
        )
    return means.means @ code.coefficients


def generate_prototype_set(
    attrs: AttributeMatrix,
    means: ClassMeans,
    per_class: int,
    lambda_min: float,
    lambda_max: float,
    seed: int,
) -> PrototypeSet:
    """Synthesize ``per_class`` prototypes for every unseen class.

    Ridge strengths are drawn uniformly from [lambda_min, lambda_max] on the
    "lambda" substream of ``seed``, independently per class in class order,
    and sorted ascending so prototype identity is stable. Expects the
    attribute matrix the rest of the pipeline uses (re-scored when msas is
    enabled).
    """
    if per_class < 1:
        raise ConfigError(f"per_class must be >= 1, got {per_class}")
    if not (0 < lambda_min <= lambda_max) or not np.isfinite(lambda_max):
        raise ConfigError(
            f"need 0 < lambda_min <= lambda_max, got [{lambda_min}, {lambda_max}]"
        )
    if means.num_seen != attrs.num_seen:
        raise DataError(
            f"class means cover {means.num_seen} classes, attributes expect {attrs.num_seen}"
        )

    rng = substream(seed, "lambda")
    draws = [
        np.sort(rng.uniform(lambda_min, lambda_max, size=per_class))
        for _ in range(attrs.num_unseen)
    ]

    protos = np.empty((attrs.num_unseen * per_class, means.means.shape[0]))
    labels = np.empty(attrs.num_unseen * per_class, dtype=np.int64)
    lambdas = np.empty(attrs.num_unseen * per_class)
    row = 0
    for k in range(attrs.num_unseen):
        target_class = attrs.num_seen + k
        target_row = attrs.values[target_class]
        for lam in draws[k]:
            code = ridge_code(target_row, attrs.seen_rows, lam, target_class=target_class)
            protos[row] = synthesize_prototype(means, code)
            labels[row] = target_class
            lambdas[row] = lam
            row += 1
    return PrototypeSet(
        prototypes=protos,
        labels=labels,
        lambdas=lambdas,
        num_seen=attrs.num_seen,
        num_unseen=attrs.num_unseen,
    )


def augment_training_set(dataset: FeatureDataset, protos: PrototypeSet) -> TrainingSet:
    """Concatenate real train_seen rows with synthesized prototypes."""
    real = dataset.split_features("train_seen")
    if len(protos) and protos.prototypes.shape[1] != dataset.feature_dim:
        raise DataError(
            f"prototype dimension {protos.prototypes.shape[1]} does not match "
            f"feature dimension {dataset.feature_dim}"
        )
    if protos.num_seen != dataset.num_seen or protos.num_unseen != dataset.num_unseen:
        raise DataError("prototype set and dataset disagree on class counts")
    if len(protos):
        features = np.vstack([real, protos.prototypes])
    else:
        features = real.copy()
    labels = np.concatenate([dataset.split_labels("train_seen"), protos.labels])
    flags = np.concatenate(
        [np.zeros(real.shape[0], dtype=bool), np.ones(len(protos), dtype=bool)]
    )
    return TrainingSet(
        features=features,
        labels=labels,
        is_synthetic=flags,
        num_seen=dataset.num_seen,
        num_unseen=dataset.num_unseen,
    )


def save_prototypes(protos: PrototypeSet, path: Path | str) -> None:
    """Persist a prototype set as a directory (float64 payloads)."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_matrix(path / PROTO_MATRIX_FILE, protos.prototypes, float64=True)
    write_labels(path / PROTO_LABELS_FILE, protos.labels)
    write_matrix(path / PROTO_LAMBDAS_FILE, protos.lambdas.reshape(-1, 1), float64=True)
    meta = {"num_seen": protos.num_seen, "num_unseen": protos.num_unseen}
    (path / PROTO_META_FILE).write_text(json.dumps(meta, sort_keys=True) + "\n", encoding="utf-8")


def load_prototypes(path: Path | str) -> PrototypeSet:
    path = Path(path)
    meta = json.loads((path / PROTO_META_FILE).read_text(encoding="utf-8"))
    protos = read_matrix(path / PROTO_MATRIX_FILE, expect_float64=True)
    labels = read_labels(path / PROTO_LABELS_FILE)
    lambdas = read_matrix(path / PROTO_LAMBDAS_FILE, expect_float64=True).ravel()
    return PrototypeSet(
        prototypes=protos,
        labels=labels,
        lambdas=lambdas,
        num_seen=int(meta["num_seen"]),
        num_unseen=int(meta["num_unseen"]),
    )
