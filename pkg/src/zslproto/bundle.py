"""Portable on-disk container for feature, attribute, and label matrices.

A bundle directory ("ZFB", version 1) holds five files:

  metadata.json    UTF-8 JSON: {"version": 1, "d_v", "d_a", "num_seen",
                   "num_unseen", "class_names": [...], "splits":
                   {"train_seen": [...], "test_seen": [...],
                   "test_unseen": [...]}}; split index lists are 0-based.
  features.zfb     magic b"ZFB1", two little-endian u64 (rows, cols), then
                   rows*cols little-endian IEEE-754 float32, row-major.
  attributes.zfb   same float32 matrix layout.
  labels.zfb       magic b"ZFL1", little-endian u64 count, then count
                   little-endian u32 class indices.
  checksums.json   SHA-256 hex digest of each binary file, verified on load.

A float64 matrix variant uses magic b"ZFB8" with 8-byte elements; it backs
model weights and persisted prototypes, never bundle payloads.

Matrices are float32 on disk and promoted to float64 in memory, so a
save/load cycle is the identity on float32 payload bits.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .datatypes import SPLIT_NAMES, AttributeMatrix, FeatureDataset
from .errors import BundleFormatError, DataError

MAGIC_F32 = b"ZFB1"
MAGIC_F64 = b"ZFB8"
MAGIC_LABELS = b"ZFL1"

_MATRIX_DTYPES = {MAGIC_F32: np.dtype("<f4"), MAGIC_F64: np.dtype("<f8")}

METADATA_FILE = "metadata.json"
FEATURES_FILE = "features.zfb"
ATTRIBUTES_FILE = "attributes.zfb"
LABELS_FILE = "labels.zfb"
CHECKSUMS_FILE = "checksums.json"


def write_matrix(path: Path | str, matrix: np.ndarray, *, float64: bool = False) -> None:
    """Write a 2-d array in the binary matrix container."""
    magic = MAGIC_F64 if float64 else MAGIC_F32
    arr = np.ascontiguousarray(np.asarray(matrix), dtype=_MATRIX_DTYPES[magic])
    if arr.ndim != 2:
        raise DataError(f"can only serialize 2-d matrices, got shape {arr.shape}")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<QQ", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes(order="C"))


def read_matrix(path: Path | str, *, expect_float64: bool = False) -> np.ndarray:
    """Read a binary matrix container, returning float64 in memory.

    Raises BundleFormatError naming the file and byte offset on any
    structural problem: missing file, bad magic, truncated header or
    payload, or a non-finite entry.
    """
    path = Path(path)
    name = path.name
    if not path.exists():
        raise BundleFormatError("missing file", filename=name)
    raw = path.read_bytes()
    expected_magic = MAGIC_F64 if expect_float64 else MAGIC_F32
    if len(raw) < 4 or raw[:4] != expected_magic:
        raise BundleFormatError(
            f"bad magic bytes {raw[:4]!r}, expected {expected_magic!r}",
            filename=name,
            offset=0,
        )
    if len(raw) < 20:
        raise BundleFormatError("truncated header", filename=name, offset=len(raw))
    rows, cols = struct.unpack_from("<QQ", raw, 4)
    dtype = _MATRIX_DTYPES[expected_magic]
    expected = 20 + rows * cols * dtype.itemsize
    if len(raw) != expected:
        raise BundleFormatError(
            f"payload is {len(raw) - 20} bytes, expected {rows}x{cols} "
            f"elements ({expected - 20} bytes)",
            filename=name,
            offset=min(len(raw), expected),
        )
    flat = np.frombuffer(raw, dtype=dtype, count=rows * cols, offset=20)
    bad = np.flatnonzero(~np.isfinite(flat))
    if bad.size:
        raise BundleFormatError(
            f"non-finite value at element {bad[0]}",
            filename=name,
            offset=20 + int(bad[0]) * dtype.itemsize,
        )
    return flat.astype(np.float64).reshape(rows, cols)


def write_labels(path: Path | str, labels: np.ndarray) -> None:
    arr = np.asarray(labels, dtype=np.int64)
    if arr.ndim != 1:
        raise DataError(f"labels must be 1-d, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFFFFFF):
        raise DataError("label out of u32 range")
    with open(path, "wb") as fh:
        fh.write(MAGIC_LABELS)
        fh.write(struct.pack("<Q", arr.shape[0]))
        fh.write(arr.astype("<u4").tobytes(order="C"))


def read_labels(path: Path | str) -> np.ndarray:
    path = Path(path)
    name = path.name
    if not path.exists():
        raise BundleFormatError("missing file", filename=name)
    raw = path.read_bytes()
    if len(raw) < 4 or raw[:4] != MAGIC_LABELS:
        raise BundleFormatError(
            f"bad magic bytes {raw[:4]!r}, expected {MAGIC_LABELS!r}", filename=name, offset=0
        )
    if len(raw) < 12:
        raise BundleFormatError("truncated header", filename=name, offset=len(raw))
    (count,) = struct.unpack_from("<Q", raw, 4)
    expected = 12 + count * 4
    if len(raw) != expected:
        raise BundleFormatError(
            f"payload is {len(raw) - 12} bytes, expected {count} u32 labels",
            filename=name,
            offset=min(len(raw), expected),
        )
    return np.frombuffer(raw, dtype="<u4", count=count, offset=12).astype(np.int64)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _canonical_json(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def save_bundle(dataset: FeatureDataset, attrs: AttributeMatrix, path: Path | str) -> None:
    """Write a dataset and its attribute matrix as a bundle directory.

    Invariant violations are refused before anything is written.
    """
    if attrs.num_seen != dataset.num_seen or attrs.num_unseen != dataset.num_unseen:
        raise DataError(
            "attribute matrix and dataset disagree on class counts: "
            f"({attrs.num_seen}, {attrs.num_unseen}) vs ({dataset.num_seen}, {dataset.num_unseen})"
        )
    for name, arr in (("features", dataset.features), ("attributes", attrs.values)):
        if not np.all(np.isfinite(arr)):
            raise DataError(f"refusing to write bundle: non-finite {name} entry")

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    class_names = attrs.class_names or tuple(
        f"class_{i:03d}" for i in range(attrs.num_classes)
    )
    metadata = {
        "version": 1,
        "d_v": dataset.feature_dim,
        "d_a": attrs.attr_dim,
        "num_seen": dataset.num_seen,
        "num_unseen": dataset.num_unseen,
        "class_names": list(class_names),
        "splits": {name: dataset.splits[name].tolist() for name in SPLIT_NAMES},
    }
    (path / METADATA_FILE).write_bytes(_canonical_json(metadata))
    write_matrix(path / FEATURES_FILE, dataset.features)
    write_matrix(path / ATTRIBUTES_FILE, attrs.values)
    write_labels(path / LABELS_FILE, dataset.labels)
    checksums = {
        name: _sha256(path / name) for name in (FEATURES_FILE, ATTRIBUTES_FILE, LABELS_FILE)
    }
    (path / CHECKSUMS_FILE).write_bytes(_canonical_json(checksums))


def load_bundle(path: Path | str) -> tuple[FeatureDataset, AttributeMatrix]:
    """Load and fully validate a bundle directory.

    Dimensions are cross-checked against the manifest; binary checksums are
    verified when checksums.json is present.
    """
    path = Path(path)
    meta_path = path / METADATA_FILE
    if not meta_path.exists():
        raise BundleFormatError("missing file", filename=METADATA_FILE)
    try:
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise BundleFormatError(f"invalid JSON: {e}", filename=METADATA_FILE) from e
    if metadata.get("version") != 1:
        raise BundleFormatError(
            f"unsupported bundle version {metadata.get('version')!r}", filename=METADATA_FILE
        )
    for key in ("d_v", "d_a", "num_seen", "num_unseen", "class_names", "splits"):
        if key not in metadata:
            raise BundleFormatError(f"manifest key '{key}' missing", filename=METADATA_FILE)

    checks_path = path / CHECKSUMS_FILE
    if checks_path.exists():
        recorded = json.loads(checks_path.read_text(encoding="utf-8"))
        for name, digest in recorded.items():
            target = path / name
            if not target.exists():
                raise BundleFormatError("missing file", filename=name)
            if _sha256(target) != digest:
                raise BundleFormatError("checksum mismatch", filename=name)

    features = read_matrix(path / FEATURES_FILE)
    attributes = read_matrix(path / ATTRIBUTES_FILE)
    labels = read_labels(path / LABELS_FILE)

    num_seen = int(metadata["num_seen"])
    num_unseen = int(metadata["num_unseen"])
    if features.shape[1] != int(metadata["d_v"]):
        raise BundleFormatError(
            f"feature matrix has {features.shape[1]} columns, manifest says {metadata['d_v']}",
            filename=FEATURES_FILE,
        )
    if attributes.shape != (num_seen + num_unseen, int(metadata["d_a"])):
        raise BundleFormatError(
            f"attribute matrix has shape {attributes.shape}, manifest says "
            f"({num_seen + num_unseen}, {metadata['d_a']})",
            filename=ATTRIBUTES_FILE,
        )
    if labels.shape[0] != features.shape[0]:
        raise BundleFormatError(
            f"{labels.shape[0]} labels for {features.shape[0]} feature rows",
            filename=LABELS_FILE,
        )

    try:
        attrs = AttributeMatrix(
            values=attributes,
            num_seen=num_seen,
            num_unseen=num_unseen,
            class_names=tuple(str(n) for n in metadata["class_names"]),
        )
        dataset = FeatureDataset(
            features=features,
            labels=labels,
            splits={name: np.asarray(idx, dtype=np.int64) for name, idx in metadata["splits"].items()},
            num_seen=num_seen,
            num_unseen=num_unseen,
        )
    except DataError as e:
        raise BundleFormatError(str(e), filename=METADATA_FILE) from e
    return dataset, attrs
