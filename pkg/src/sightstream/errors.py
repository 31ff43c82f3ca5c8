"""Exception hierarchy shared across the package.

Every class carries an ``exit_code`` so the command line can map failures
onto its documented process exit codes: 2 for usage or configuration
problems, 3 for data-contract violations, 4 for internal invariant
violations (the base class default).
"""

from __future__ import annotations


class SightStreamError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class ConfigError(SightStreamError, ValueError):
    """Invalid configuration file, flag set, or parameter combination."""

    exit_code = 2


class ParameterError(SightStreamError, ValueError):
    """A scalar argument is outside its legal range."""

    exit_code = 2


class RejectedInputError(SightStreamError, ValueError):
    """Input contains non-finite values, or negatives where forbidden."""

    exit_code = 3


class DimensionError(SightStreamError, ValueError):
    """Vector or matrix shapes do not line up."""

    exit_code = 3


class DegenerateClassError(SightStreamError, ValueError):
    """A classifier weight row is all-zero and cannot seed a prototype."""

    exit_code = 3


class StreamContractError(SightStreamError, ValueError):
    """A stream record violates the dimensions or field contract of its stream."""

    exit_code = 3


class FormatError(SightStreamError, ValueError):
    """A file does not match its documented schema."""

    exit_code = 3


class ParseError(FormatError):
    """A line of a streamed file could not be parsed; message names the line."""


class IncompatibleVersionError(FormatError):
    """File carries a format major version this build does not understand."""


class ValidationError(SightStreamError, ValueError):
    """Well-formed input failed a semantic validity check."""

    exit_code = 3


class InsufficientDataError(SightStreamError, ValueError):
    """Not enough data to compute the requested statistic."""

    exit_code = 3
