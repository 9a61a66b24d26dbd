"""Class-to-class semantic similarity masks.

Each class's attribute row is reconstructed from all class rows (itself
included) under a squared-L2 penalty that keeps any single coefficient,
notably the self term, from dominating. Raw coefficients are clamped at
zero and normalized into a probability-like row; these rows mask the
unseen-class scores inside the training loss and are never used at
inference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datatypes import AttributeMatrix
from .errors import ConfigError, DataError, NumericalError

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SimilarityMatrix:
    """Row-stochastic class-to-class similarities, one row per class."""

    values: np.ndarray
    phi: float
    num_seen: int
    num_unseen: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        total = self.num_seen + self.num_unseen
        if values.shape != (total, total):
            raise DataError(f"similarity matrix must be {total}x{total}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("non-finite similarity entry")
        if values.min() < 0 or values.max() > 1:
            raise DataError("similarity entries must lie in [0, 1]")
        sums = values.sum(axis=1)
        if np.any(np.abs(sums - 1) > ROW_SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1)))
            raise DataError(f"row {bad} sums to {sums[bad]!r}, expected 1")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def num_classes(self) -> int:
        return self.num_seen + self.num_unseen

    def unseen_row(self, class_index: int) -> np.ndarray:
        """Similarities from ``class_index`` to the unseen classes."""
        return self.values[class_index, self.num_seen :]


def solve_similarity_row(attr_row: np.ndarray, all_rows: np.ndarray, phi: float) -> np.ndarray:
    """Raw similarity coefficients of one class against every class.

    Minimizes ||a_p - sum_q a_q s_q||^2 + phi * ||s||^2 over all classes
    including p itself, via the closed-form normal equations in float64.
    """
    if not (phi > 0 and np.isfinite(phi)):
        raise ConfigError(f"phi must be a positive finite scalar, got {phi}")
    target = np.asarray(attr_row, dtype=np.float64).ravel()
    rows = np.asarray(all_rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != target.shape[0]:
        raise DataError(
            f"attribute rows have shape {rows.shape}, incompatible with row of length {target.shape[0]}"
        )
    design = rows.T  # attr_dim x num_classes
    gram = design.T @ design + phi * np.eye(rows.shape[0])
    raw = np.linalg.solve(gram, design.T @ target)
    if not np.all(np.isfinite(raw)):
        raise NumericalError("non-finite similarity coefficients")
    return raw


def normalize_similarity(raw: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero, then scale the row to sum to one.

    Falls back to the uniform row when everything clamps to zero.
    """
    raw = np.asarray(raw, dtype=np.float64).ravel()
    if not np.all(np.isfinite(raw)):
        raise DataError("non-finite raw similarity value")
    clamped = np.maximum(raw, 0.0)
    total = clamped.sum()
    if total <= 0.0:
        return np.full(raw.shape[0], 1.0 / raw.shape[0])
    return clamped / total


def build_similarity_matrix(attrs: AttributeMatrix, phi: float) -> SimilarityMatrix:
    """Solve and normalize one similarity row per class.

    Expects the attribute matrix the rest of the pipeline uses (re-scored
    when msas is enabled). Every row shares the same regularized normal
    matrix, so it is factored once and solved against all targets together;
    this matches the row-at-a-time solve and keeps benchmark-sized
    matrices (hundreds of classes) cheap.
    """
    if not (phi > 0 and np.isfinite(phi)):
        raise ConfigError(f"phi must be a positive finite scalar, got {phi}")
    n = attrs.num_classes
    design = attrs.values.T  # attr_dim x num_classes
    gram = design.T @ design + phi * np.eye(n)
    raw_all = np.linalg.solve(gram, design.T @ attrs.values.T)  # column p = raw row p
    if not np.all(np.isfinite(raw_all)):
        raise NumericalError("non-finite similarity coefficients")
    values = np.empty((n, n))
    for p in range(n):
        values[p] = normalize_similarity(raw_all[:, p])
    return SimilarityMatrix(
        values=values, phi=float(phi), num_seen=attrs.num_seen, num_unseen=attrs.num_unseen
    )
