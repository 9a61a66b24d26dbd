"""Standalone reader/writer for the ZFB bundle container.

Deliberately independent of the consumer package so `verify` re-checks the
format from the outside. Layout:

  features.zfb / attributes.zfb: magic b"ZFB1", little-endian u64 rows and
  cols, then rows*cols little-endian float32, row-major.
  labels.zfb: magic b"ZFL1", little-endian u64 count, count little-endian
  u32 entries.
  metadata.json: version, d_v, d_a, num_seen, num_unseen, class_names,
  splits (0-based index lists).
  checksums.json: SHA-256 hex of each binary file.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ArchiveError

MATRIX_MAGIC = b"ZFB1"
LABELS_MAGIC = b"ZFL1"


def write_matrix(path: Path, matrix: np.ndarray) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes(order="C"))


def write_labels(path: Path, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(LABELS_MAGIC)
        fh.write(struct.pack("<Q", arr.shape[0]))
        fh.write(arr.tobytes(order="C"))


def read_matrix(path: Path) -> np.ndarray:
    if not path.exists():
        raise ArchiveError(f"{path.name}: missing file")
    raw = path.read_bytes()
    if raw[:4] != MATRIX_MAGIC:
        raise ArchiveError(f"{path.name}: bad magic bytes {raw[:4]!r}")
    if len(raw) < 20:
        raise ArchiveError(f"{path.name}: truncated header")
    rows, cols = struct.unpack_from("<QQ", raw, 4)
    if len(raw) != 20 + rows * cols * 4:
        raise ArchiveError(f"{path.name}: payload size does not match {rows}x{cols}")
    return np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=20).reshape(rows, cols)


def read_labels(path: Path) -> np.ndarray:
    if not path.exists():
        raise ArchiveError(f"{path.name}: missing file")
    raw = path.read_bytes()
    if raw[:4] != LABELS_MAGIC:
        raise ArchiveError(f"{path.name}: bad magic bytes {raw[:4]!r}")
    if len(raw) < 12:
        raise ArchiveError(f"{path.name}: truncated header")
    (count,) = struct.unpack_from("<Q", raw, 4)
    if len(raw) != 12 + count * 4:
        raise ArchiveError(f"{path.name}: payload size does not match count {count}")
    return np.frombuffer(raw, dtype="<u4", count=count, offset=12).astype(np.int64)


def sha256_hex(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_bundle(
    out_dir: Path,
    features: np.ndarray,
    attributes: np.ndarray,
    labels: np.ndarray,
    splits: dict[str, np.ndarray],
    num_seen: int,
    num_unseen: int,
    class_names: list[str],
    source: dict,
) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metadata = {
        "version": 1,
        "d_v": int(features.shape[1]),
        "d_a": int(attributes.shape[1]),
        "num_seen": int(num_seen),
        "num_unseen": int(num_unseen),
        "class_names": class_names,
        "splits": {name: np.asarray(idx).tolist() for name, idx in splits.items()},
        "source": source,
    }
    (out_dir / "metadata.json").write_text(
        json.dumps(metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_matrix(out_dir / "features.zfb", features)
    write_matrix(out_dir / "attributes.zfb", attributes)
    write_labels(out_dir / "labels.zfb", labels)
    checksums = {
        name: sha256_hex(out_dir / name)
        for name in ("features.zfb", "attributes.zfb", "labels.zfb")
    }
    (out_dir / "checksums.json").write_text(
        json.dumps(checksums, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
