"""Model-specific attribute re-scoring (msas).

Entries strictly above the threshold are doubled, then the whole matrix is
rescaled: out[i][j] = (a[i][j] + a[i][j] * [a[i][j] > threshold]) * weight.
Ties at the threshold are left untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .datatypes import AttributeMatrix
from .errors import ConfigError


@dataclass(frozen=True)
class MsasConfig:
    """Re-scoring hyperparameters: global weight and reinforcement threshold."""

    weight: float
    threshold: float

    def __post_init__(self):
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ConfigError(f"weight must be a positive finite scalar, got {self.weight}")
        if not math.isfinite(self.threshold):
            raise ConfigError(f"threshold must be finite, got {self.threshold}")


def rescore_attributes(attrs: AttributeMatrix, cfg: MsasConfig) -> AttributeMatrix:
    """Return a re-scored copy of ``attrs``; the input is not modified."""
    a = attrs.values
    mask = a > cfg.threshold
    rescored = (a + a * mask) * cfg.weight
    return replace(attrs, values=rescored)
