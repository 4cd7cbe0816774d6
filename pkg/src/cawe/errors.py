"""Shared exception types, mapped to CLI exit codes in cli.py."""


class CaweError(Exception):
    """Base class for package errors."""


class FormatError(CaweError):
    """Malformed or corrupted data / file format (CLI exit code 2)."""


class DivergenceError(CaweError):
    """Non-finite loss or parameters during training (CLI exit code 3)."""
