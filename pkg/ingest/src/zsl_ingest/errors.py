"""Errors and exit codes, mirroring the consumer pipeline's convention."""


class IngestError(Exception):
    exit_code = 1


class UsageError(IngestError):
    """Bad flags or inconsistent options."""

    exit_code = 2


class ArchiveError(IngestError):
    """Malformed or inconsistent archive/bundle data."""

    exit_code = 3
