"""Outside-in revalidation of a bundle directory.

Re-checks every datamodel invariant from this side of the fence: file
structure and magics, checksums, manifest dimension agreement, split
disjointness and bounds, label ranges per split, finiteness. Collects all
violations instead of stopping at the first.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ArchiveError
from .zfb import read_labels, read_matrix, sha256_hex

SPLIT_NAMES = ("train_seen", "test_seen", "test_unseen")


def verify_bundle(path: Path | str) -> dict:
    """Validate the bundle; returns a summary dict or raises ArchiveError
    listing every violation found."""
    path = Path(path)
    problems: list[str] = []

    meta_path = path / "metadata.json"
    if not meta_path.exists():
        raise ArchiveError("metadata.json: missing file")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ArchiveError(f"metadata.json: invalid JSON ({e})") from e
    if meta.get("version") != 1:
        problems.append(f"metadata.json: unsupported version {meta.get('version')!r}")

    checks_path = path / "checksums.json"
    if checks_path.exists():
        recorded = json.loads(checks_path.read_text(encoding="utf-8"))
        for name, digest in recorded.items():
            target = path / name
            if not target.exists():
                problems.append(f"{name}: missing file")
            elif sha256_hex(target) != digest:
                problems.append(f"{name}: checksum mismatch")

    features = attributes = labels = None
    for name, reader in (
        ("features.zfb", read_matrix),
        ("attributes.zfb", read_matrix),
        ("labels.zfb", read_labels),
    ):
        try:
            value = reader(path / name)
            if name == "features.zfb":
                features = value
            elif name == "attributes.zfb":
                attributes = value
            else:
                labels = value
        except ArchiveError as e:
            problems.append(str(e))

    summary: dict = {}
    if features is not None and attributes is not None and labels is not None:
        num_seen = int(meta.get("num_seen", -1))
        num_unseen = int(meta.get("num_unseen", -1))
        n_total = features.shape[0]
        if labels.shape[0] != n_total:
            problems.append(f"labels.zfb: {labels.shape[0]} labels for {n_total} rows")
        if features.shape[1] != meta.get("d_v"):
            problems.append(
                f"features.zfb: {features.shape[1]} columns, manifest says {meta.get('d_v')}"
            )
        if attributes.shape != (num_seen + num_unseen, meta.get("d_a")):
            problems.append(
                f"attributes.zfb: shape {attributes.shape}, manifest says "
                f"({num_seen + num_unseen}, {meta.get('d_a')})"
            )
        if not np.all(np.isfinite(features)):
            problems.append("features.zfb: non-finite entry")
        if not np.all(np.isfinite(attributes)):
            problems.append("attributes.zfb: non-finite entry")
        if labels.size and (labels.min() < 0 or labels.max() >= num_seen + num_unseen):
            problems.append("labels.zfb: label outside class range")

        seen_rows = np.zeros(n_total, dtype=bool)
        split_sizes = {}
        for name in SPLIT_NAMES:
            idx = np.asarray(meta.get("splits", {}).get(name, []), dtype=np.int64)
            split_sizes[name] = int(idx.shape[0])
            if idx.size and (idx.min() < 0 or idx.max() >= n_total):
                problems.append(f"metadata.json: split '{name}' out of bounds")
                continue
            if np.any(seen_rows[idx]):
                problems.append(f"metadata.json: split '{name}' overlaps another split")
            seen_rows[idx] = True
            if idx.size:
                split_labels = labels[idx]
                if name in ("train_seen", "test_seen") and split_labels.max() >= num_seen:
                    problems.append(f"metadata.json: split '{name}' holds an unseen-class label")
                if name == "test_unseen" and split_labels.min() < num_seen:
                    problems.append(f"metadata.json: split '{name}' holds a seen-class label")

        norms = np.linalg.norm(features.astype(np.float64), axis=1)
        summary = {
            "n_total": int(n_total),
            "num_seen": num_seen,
            "num_unseen": num_unseen,
            "d_v": int(features.shape[1]),
            "d_a": int(attributes.shape[1]),
            "splits": split_sizes,
            "feature_norm_min": float(norms.min()) if norms.size else 0.0,
            "feature_norm_mean": float(norms.mean()) if norms.size else 0.0,
            "feature_norm_max": float(norms.max()) if norms.size else 0.0,
        }

    if problems:
        raise ArchiveError("; ".join(problems))
    return summary


def format_summary(summary: dict) -> str:
    lines = [
        "OK",
        f"classes: {summary['num_seen']} seen + {summary['num_unseen']} unseen",
        f"rows: {summary['n_total']} x {summary['d_v']} features, "
        f"{summary['d_a']} attributes per class",
        "splits: "
        + ", ".join(f"{name}={size}" for name, size in summary["splits"].items()),
        f"feature L2 norms: min {summary['feature_norm_min']:.4f}, "
        f"mean {summary['feature_norm_mean']:.4f}, max {summary['feature_norm_max']:.4f}",
    ]
    return "\n".join(lines)
