"""Benchmark-archive converter for the ZFB feature-bundle format."""

from .convert import convert_archive
from .errors import ArchiveError, IngestError, UsageError
from .fixtures import write_toy_archive
from .verify import verify_bundle

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "IngestError",
    "UsageError",
    "convert_archive",
    "verify_bundle",
    "write_toy_archive",
]
