"""Exception types raised across the package.

Everything derived from :class:`ValidationError` maps to CLI exit code 1.
Filesystem failures surface as the builtin :class:`OSError` (exit code 2).
"""


class FaceNMSError(Exception):
    """Base class for all package errors."""


class ValidationError(FaceNMSError, ValueError):
    """Input violates a documented precondition or invariant."""


class ZeroNorm(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class DegenerateCenter(ValidationError):
    """Cluster center has (near) zero norm, so its direction is undefined."""


class FormatError(ValidationError):
    pass


class NormError(ValidationError):
    pass


class DuplicateIdentity(ValidationError):
    pass


class FingerprintMismatch(ValidationError):
    pass


class UnknownIdentity(ValidationError):
    pass


class UnknownFaceIndex(ValidationError):
    pass


class ManifestError(ValidationError):
    """Manifest is internally inconsistent (empty identity, bad totals...)."""


class GroupTooLarge(ValidationError):
    pass


class MissingScore(ValidationError):
    pass


class MalformedScoreFile(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class MissingIdentity(ValidationError):
    pass


class InsufficientPairs(ValidationError):
    pass
