"""Inference, per-class accuracy metrics, and prototype alignment analysis.

Conventional inference restricts the argmax to unseen columns; generalized
inference searches all columns. Accuracies are averaged per class so rare
classes weigh as much as common ones, and the balanced score is the
harmonic mean of the seen and unseen averages. Argmax ties break toward
the lowest class index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .classifier import ContrastiveClassifier, compatibility_scores, encode_semantics
from .datatypes import AttributeMatrix, FeatureDataset, PrototypeSet
from .errors import DataError


@dataclass
class EvalReport:
    """Per-class Top-1 accuracies, in percent."""

    t1_czsl: float
    acc_unseen: float
    acc_seen: float
    harmonic: float
    per_class: list[float]
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t1_czsl", "acc_unseen", "acc_seen", "harmonic"):
            v = getattr(self, name)
            if not (0.0 <= v <= 100.0):
                raise DataError(f"{name} must lie in [0, 100], got {v}")

    def to_dict(self) -> dict:
        return {
            "t1_czsl": self.t1_czsl,
            "acc_unseen": self.acc_unseen,
            "acc_seen": self.acc_seen,
            "harmonic": self.harmonic,
            "per_class": list(self.per_class),
            "config_echo": self.config_echo,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")

    def csv_row(self) -> tuple[list[str], list[str]]:
        header = ["t1_czsl", "acc_unseen", "acc_seen", "harmonic"]
        return header, [repr(getattr(self, name)) for name in header]


def predict_czsl(scores: np.ndarray, num_seen: int) -> np.ndarray:
    """Global class index of the best unseen column, per row."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    return num_seen + np.argmax(scores[:, num_seen:], axis=1)


def predict_gzsl(scores: np.ndarray) -> np.ndarray:
    """Global class index of the best column over all classes, per row."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    return np.argmax(scores, axis=1)


def per_class_top1(predictions: np.ndarray, labels: np.ndarray, class_subset) -> float:
    """Mean over classes of the in-class accuracy, in percent.

    Every class in the subset counts equally regardless of its sample count.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    subset = list(class_subset)
    if not subset:
        raise DataError("class subset must be non-empty")
    accs = []
    for c in subset:
        mask = labels == c
        if not mask.any():
            raise DataError(f"class {c} has no test samples")
        accs.append(float((predictions[mask] == c).mean()))
    return 100.0 * float(np.mean(accs))


def harmonic_mean(acc_unseen: float, acc_seen: float) -> float:
    """Balanced score 2US/(U+S); zero when either side is zero."""
    if acc_unseen < 0 or acc_seen < 0:
        raise DataError("accuracies must be >= 0")
    if acc_unseen + acc_seen == 0:
        return 0.0
    return 2.0 * acc_unseen * acc_seen / (acc_unseen + acc_seen)


def _scores_chunked(model, features, embeds):
    """Score test rows in slices; caps the fused-tensor footprint.

    Rows are independent, so slicing changes nothing but peak memory.
    """
    n = features.shape[0]
    if n == 0:
        return np.zeros((0, embeds.shape[0]))
    chunk = max(1, 50_000 // embeds.shape[0])
    if n <= chunk:
        return compatibility_scores(model, features, embeds)
    parts = [
        compatibility_scores(model, features[start : start + chunk], embeds)
        for start in range(0, n, chunk)
    ]
    return np.vstack(parts)


def evaluate_model(
    model: ContrastiveClassifier,
    dataset: FeatureDataset,
    attrs: AttributeMatrix,
    config_echo: dict | None = None,
) -> EvalReport:
    """Score the test splits and assemble the metric report.

    ``attrs`` must be the attribute matrix the model was trained with
    (re-scored when msas was enabled).
    """
    embeds = encode_semantics(model, attrs)
    num_seen = dataset.num_seen

    unseen_feats = dataset.split_features("test_unseen")
    unseen_labels = dataset.split_labels("test_unseen")
    unseen_scores = _scores_chunked(model, unseen_feats, embeds)
    czsl_preds = predict_czsl(unseen_scores, num_seen)
    unseen_classes = range(num_seen, dataset.num_classes)
    t1 = per_class_top1(czsl_preds, unseen_labels, unseen_classes)

    gzsl_unseen_preds = predict_gzsl(unseen_scores)
    acc_u = per_class_top1(gzsl_unseen_preds, unseen_labels, unseen_classes)

    seen_feats = dataset.split_features("test_seen")
    seen_labels = dataset.split_labels("test_seen")
    gzsl_seen_preds = predict_gzsl(_scores_chunked(model, seen_feats, embeds))
    acc_s = per_class_top1(gzsl_seen_preds, seen_labels, range(num_seen))

    per_class = [
        per_class_top1(gzsl_seen_preds, seen_labels, [c]) for c in range(num_seen)
    ] + [
        per_class_top1(gzsl_unseen_preds, unseen_labels, [c]) for c in unseen_classes
    ]
    return EvalReport(
        t1_czsl=t1,
        acc_unseen=acc_u,
        acc_seen=acc_s,
        harmonic=harmonic_mean(acc_u, acc_s),
        per_class=per_class,
        config_echo=config_echo or {},
    )


# ---------------------------------------------------------------------------
# prototype alignment against real sub-clusters


def kmeans_subclusters(
    features: np.ndarray, k: int, seed: int, max_iters: int = 100
) -> np.ndarray:
    """Lloyd iterations with seeded farthest-point initialization.

    Deterministic under ``seed``; an emptied cluster is re-seeded from the
    point farthest from its assigned centroid.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if k < 1 or k > n:
        raise DataError(f"k must be in 1..{n}, got {k}")
    rng = np.random.default_rng(int(seed))

    centroids = np.empty((k, features.shape[1]))
    centroids[0] = features[rng.integers(n)]
    dist = np.linalg.norm(features - centroids[0], axis=1)
    for j in range(1, k):
        centroids[j] = features[np.argmax(dist)]
        dist = np.minimum(dist, np.linalg.norm(features - centroids[j], axis=1))

    assign = np.full(n, -1)
    for _ in range(max_iters):
        d2 = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        nearest = np.sqrt(d2[np.arange(n), new_assign])
        for j in range(k):
            members = new_assign == j
            if members.any():
                centroids[j] = features[members].mean(axis=0)
            else:
                farthest = int(np.argmax(nearest))
                centroids[j] = features[farthest]
                new_assign[farthest] = j
                nearest[farthest] = 0.0
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centroids


def prototype_alignment(
    protos: PrototypeSet,
    features: np.ndarray,
    labels: np.ndarray,
    k: int,
    seed: int = 0,
) -> dict[int, float]:
    """Scale-normalized distance from prototypes to real sub-cluster centers.

    For each unseen class, clusters its real features into k groups and
    reports the mean distance from each prototype to its nearest centroid,
    divided by the RMS feature norm of the class. Test-only analysis; the
    real unseen features never touch training.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    out: dict[int, float] = {}
    for c in range(protos.num_seen, protos.num_classes):
        class_feats = features[labels == c]
        if class_feats.shape[0] < k:
            raise DataError(f"class {c} has {class_feats.shape[0]} samples, need >= k={k}")
        class_protos = protos.prototypes[protos.labels == c]
        if class_protos.shape[0] == 0:
            raise DataError(f"no prototypes for class {c}")
        centroids = kmeans_subclusters(class_feats, k, seed=seed + c)
        d = np.linalg.norm(class_protos[:, None, :] - centroids[None, :, :], axis=2)
        nearest = d.min(axis=1).mean()
        scale = float(np.sqrt((class_feats**2).sum(axis=1).mean()))
        out[c] = float(nearest / scale) if scale > 0 else float(nearest)
    return out
