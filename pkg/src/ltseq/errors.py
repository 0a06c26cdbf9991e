"""Shared exception types mapped to CLI exit codes."""


class LtseqError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(LtseqError):
    """Invalid configuration value or malformed config/grammar file."""

    exit_code = 2


class DataError(LtseqError):
    """Empty or malformed input data (corpora, parse files, sentences)."""

    exit_code = 3


class NumericalError(LtseqError):
    """Non-finite values where finite ones are required (e.g. NaN loss)."""

    exit_code = 4


class AlignmentError(LtseqError):
    """Mismatched parallel inputs (leaf counts, corpus lengths, coverage)."""

    exit_code = 5
