"""Synthetic fixture worlds with known ground truth.

Seen classes are Gaussian clusters around random means. Each unseen class
is planted as a convex combination of seen classes: its attribute row and
its true feature-space mean use the same combination weights, so ridge
coding of attributes can recover the unseen means exactly in the
zero-noise limit.
"""

from __future__ import annotations

import numpy as np

from .datatypes import AttributeMatrix, FeatureDataset
from .errors import ConfigError

# Class means are spread wider than the attribute noise so that moderate
# noise_scale values leave classes separable; attribute rows are scaled up
# so ridge strengths around 1 barely shrink the recovered combinations.
_MEAN_SCALE = 2.0
_ATTR_SCALE = 3.0


def make_synthetic_world(
    seed: int,
    num_seen: int,
    num_unseen: int,
    feature_dim: int,
    attr_dim: int,
    samples_per_seen_class: int,
    noise_scale: float,
) -> tuple[FeatureDataset, AttributeMatrix, np.ndarray]:
    """Build a deterministic labeled world and return its hidden truth.

    Returns (dataset, attributes, true_unseen_means) where row k of
    true_unseen_means is the planted feature-space mean of unseen class k.
    Test splits hold max(2, samples_per_seen_class // 4) rows per class.
    """
    if num_seen < 2 or num_unseen < 1:
        raise ConfigError(
            f"need at least 2 seen and 1 unseen class, got ({num_seen}, {num_unseen})"
        )
    if attr_dim < num_unseen:
        raise ConfigError(f"attr_dim must be >= num_unseen, got {attr_dim} < {num_unseen}")
    if feature_dim < 1 or attr_dim < 1 or samples_per_seen_class < 1:
        raise ConfigError("degenerate parameters: zero samples or zero dimension")
    if noise_scale < 0 or not np.isfinite(noise_scale):
        raise ConfigError(f"noise_scale must be finite and >= 0, got {noise_scale}")

    rng = np.random.default_rng(int(seed))
    seen_means = _MEAN_SCALE * rng.standard_normal((num_seen, feature_dim))
    seen_attrs = _ATTR_SCALE * rng.standard_normal((num_seen, attr_dim))

    # Uniform positives renormalized over a random pair of seen classes:
    # weights sum to 1, so every unseen class stays inside the convex hull
    # of the seen means, but sits on a hull edge. Edges keep unseen classes
    # far from each other while close enough to their two parents that
    # generalized inference is genuinely contested. The 1..2 draw bounds
    # both weights away from 0, so no unseen mean collapses onto a parent.
    weights = np.zeros((num_unseen, num_seen))
    support_size = min(2, num_seen)
    for k in range(num_unseen):
        support = rng.choice(num_seen, size=support_size, replace=False)
        raw = rng.uniform(1.0, 2.0, size=support_size)
        weights[k, support] = raw / raw.sum()
    unseen_means = weights @ seen_means
    unseen_attrs = weights @ seen_attrs

    n_test = max(2, samples_per_seen_class // 4)

    def draw(mean: np.ndarray, count: int) -> np.ndarray:
        return mean + noise_scale * rng.standard_normal((count, feature_dim))

    blocks, labels = [], []
    for c in range(num_seen):
        blocks.append(draw(seen_means[c], samples_per_seen_class))
        labels.append(np.full(samples_per_seen_class, c))
    for c in range(num_seen):
        blocks.append(draw(seen_means[c], n_test))
        labels.append(np.full(n_test, c))
    for k in range(num_unseen):
        blocks.append(draw(unseen_means[k], n_test))
        labels.append(np.full(n_test, num_seen + k))

    features = np.vstack(blocks)
    labels = np.concatenate(labels)
    n_train = num_seen * samples_per_seen_class
    n_test_seen = num_seen * n_test
    splits = {
        "train_seen": np.arange(n_train),
        "test_seen": np.arange(n_train, n_train + n_test_seen),
        "test_unseen": np.arange(n_train + n_test_seen, features.shape[0]),
    }

    dataset = FeatureDataset(
        features=features,
        labels=labels,
        splits=splits,
        num_seen=num_seen,
        num_unseen=num_unseen,
    )
    attrs = AttributeMatrix(
        values=np.vstack([seen_attrs, unseen_attrs]),
        num_seen=num_seen,
        num_unseen=num_unseen,
    )
    return dataset, attrs, unseen_means
