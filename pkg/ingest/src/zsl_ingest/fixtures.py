"""Toy archive writer for tests and demos."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import savemat


def write_toy_archive(
    out_dir: Path | str,
    seed: int = 0,
    num_seen: int = 3,
    num_unseen: int = 1,
    feature_dim: int = 5,
    attr_dim: int = 6,
    rows_per_class: int = 4,
):
    """Write a small MAT archive pair; returns (features_rows, attributes, labels).

    Classes are numbered 1..K+L with seen ids first, so a converted bundle
    keeps row payloads in archive order. Features are float32 so the
    archive-to-bundle trip is bitwise lossless. ``features_rows`` is
    returned row-per-sample (the transpose of the on-disk layout).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    total = num_seen + num_unseen
    n = total * rows_per_class

    features_rows = rng.standard_normal((n, feature_dim)).astype(np.float32)
    labels = np.repeat(np.arange(1, total + 1), rows_per_class)
    attributes = rng.random((total, attr_dim)).astype(np.float32)

    per_class = rows_per_class
    seen_rows = np.arange(num_seen * per_class) + 1  # 1-based
    trainval = np.concatenate(
        [seen_rows[c * per_class : c * per_class + per_class - 1] for c in range(num_seen)]
    )
    test_seen = np.array([seen_rows[c * per_class + per_class - 1] for c in range(num_seen)])
    test_unseen = np.arange(num_seen * per_class, n) + 1

    savemat(
        out_dir / "features.mat",
        {"features": features_rows.T, "labels": labels.reshape(-1, 1)},
    )
    savemat(
        out_dir / "splits.mat",
        {
            "att": attributes,
            "trainval_loc": trainval.reshape(-1, 1),
            "test_seen_loc": test_seen.reshape(-1, 1),
            "test_unseen_loc": test_unseen.reshape(-1, 1),
        },
    )
    return features_rows, attributes, labels
