"""Exception hierarchy.

Every error raised by the library derives from :class:`HBIError`. The two
intermediate classes map onto CLI exit codes: :class:`ConfigError` (exit 2)
for bad configuration or malformed inputs, :class:`NumericError` (exit 3)
for numeric-domain violations.
"""

from __future__ import annotations


class HBIError(ValueError):
    exit_code = 1


class ConfigError(HBIError):
    exit_code = 2


class NumericError(HBIError):
    exit_code = 3


# configuration / input errors
class ClusterCountExceedsTokens(ConfigError):
    pass


class TooFewTokens(ConfigError):
    pass


class MissingLevel(ConfigError):
    pass


class UnloadedWeights(ConfigError):
    pass


class MatrixFileError(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


# numeric-domain errors
class IdenticalPlayers(NumericError):
    pass


class EnumerationTooLarge(NumericError):
    pass


class ZeroSamples(NumericError):
    pass


class EmptyModality(NumericError):
    pass


class DimMismatch(NumericError):
    pass


class ZeroNormRow(NumericError):
    pass


class ShapeMismatch(NumericError):
    pass


class NonFiniteInput(NumericError):
    pass


class InconsistentAssignment(NumericError):
    pass


class NonSquare(NumericError):
    pass


class NonPositiveTau(NumericError):
    pass
