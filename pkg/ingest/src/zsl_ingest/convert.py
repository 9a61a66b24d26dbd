"""MAT-archive to bundle conversion.

The archive follows the common benchmark release layout:

  features file: {"features": d_v x N matrix, "labels": N 1-based class ids}
  splits file:   {"att": (K+L) x d_a class-attribute matrix,
                  "trainval_loc", "test_seen_loc", "test_unseen_loc":
                  1-based row index vectors}

Conversion shifts indices to 0-based, reorders classes seen-first (sorted
by original id within each group), and records the permutation plus the
normalization choice under metadata "source". Float32 payloads survive
bit-exactly when normalization is off.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import loadmat

from .errors import ArchiveError, UsageError
from .zfb import write_bundle

SPLIT_KEYS = {
    "trainval_loc": "train_seen",
    "test_seen_loc": "test_seen",
    "test_unseen_loc": "test_unseen",
}


def _load_key(path: Path, mat: dict, key: str) -> np.ndarray:
    if key not in mat:
        raise ArchiveError(f"{path.name}: missing key '{key}' (found {sorted(k for k in mat if not k.startswith('__'))})")
    return np.asarray(mat[key])


def _index_vector(path: Path, mat: dict, key: str, n_total: int) -> np.ndarray:
    raw = np.ravel(_load_key(path, mat, key)).astype(np.int64)
    if raw.size and (raw.min() < 1 or raw.max() > n_total):
        raise ArchiveError(
            f"{path.name}: split '{key}' has index outside 1..{n_total}"
        )
    return raw - 1  # 1-based archive convention to 0-based


def convert_archive(
    features_path: Path | str,
    splits_path: Path | str,
    out_dir: Path | str,
    normalize: str = "none",
) -> dict:
    """Convert one archive pair into a bundle directory; returns a summary."""
    if normalize not in ("none", "l2"):
        raise UsageError(f"unknown normalization '{normalize}' (use none or l2)")
    features_path, splits_path = Path(features_path), Path(splits_path)
    for p in (features_path, splits_path):
        if not p.exists():
            raise ArchiveError(f"{p}: missing file")
    try:
        feat_mat = loadmat(features_path)
        split_mat = loadmat(splits_path)
    except Exception as e:  # scipy raises several parse error types
        raise ArchiveError(f"could not parse archive: {e}") from e

    features = _load_key(features_path, feat_mat, "features")
    labels = np.ravel(_load_key(features_path, feat_mat, "labels")).astype(np.int64)
    attributes = _load_key(splits_path, split_mat, "att")

    if features.ndim != 2:
        raise ArchiveError(f"{features_path.name}: features must be a d_v x N matrix")
    n_total = features.shape[1]
    if labels.shape[0] != n_total:
        raise ArchiveError(
            f"{features_path.name}: {labels.shape[0]} labels for {n_total} feature columns"
        )
    if not np.all(np.isfinite(features)):
        raise ArchiveError(f"{features_path.name}: non-finite feature entry")
    if not np.all(np.isfinite(attributes)):
        raise ArchiveError(f"{splits_path.name}: non-finite attribute entry")

    classes = np.unique(labels)
    if classes.min() < 1:
        raise ArchiveError(f"{features_path.name}: labels must be 1-based positive ids")
    if attributes.ndim != 2 or attributes.shape[0] != classes.shape[0]:
        raise ArchiveError(
            f"{splits_path.name}: attribute matrix has shape {attributes.shape}, "
            f"expected ({classes.shape[0]}, d_a) for {classes.shape[0]} label values"
        )

    splits = {
        SPLIT_KEYS[key]: _index_vector(splits_path, split_mat, key, n_total)
        for key in SPLIT_KEYS
    }
    seen_ids = np.unique(
        np.concatenate([labels[splits["train_seen"]], labels[splits["test_seen"]]])
    )
    unseen_ids = np.unique(labels[splits["test_unseen"]])
    if np.intersect1d(seen_ids, unseen_ids).size:
        raise ArchiveError("a class id appears in both seen and unseen splits")
    covered = np.union1d(seen_ids, unseen_ids)
    stray = np.setdiff1d(classes, covered)
    if stray.size:
        raise ArchiveError(f"class ids {stray.tolist()} appear in no split")

    # seen-first internal ordering, sorted by original id within each group
    class_order = np.concatenate([seen_ids, unseen_ids])
    remap = {int(orig): internal for internal, orig in enumerate(class_order)}
    new_labels = np.array([remap[int(y)] for y in labels], dtype=np.int64)

    # archive stores class attributes by ascending original id
    order_rows = np.searchsorted(classes, class_order)
    attributes_internal = attributes[order_rows]

    features_rows = np.ascontiguousarray(features.T)
    if normalize == "l2":
        norms = np.linalg.norm(features_rows.astype(np.float64), axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        features_rows = features_rows / norms

    class_names = [f"class_{int(orig):04d}" for orig in class_order]
    write_bundle(
        Path(out_dir),
        features=features_rows,
        attributes=attributes_internal,
        labels=new_labels,
        splits=splits,
        num_seen=seen_ids.shape[0],
        num_unseen=unseen_ids.shape[0],
        class_names=class_names,
        source={
            "class_order": [int(c) for c in class_order],
            "normalize": normalize,
            "features_file": features_path.name,
            "splits_file": splits_path.name,
        },
    )
    return {
        "n_total": int(n_total),
        "num_seen": int(seen_ids.shape[0]),
        "num_unseen": int(unseen_ids.shape[0]),
        "d_v": int(features_rows.shape[1]),
        "d_a": int(attributes.shape[1]),
        "splits": {name: int(idx.shape[0]) for name, idx in splits.items()},
    }
