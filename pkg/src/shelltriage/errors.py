"""Exception hierarchy shared across the package.

Every error raised by shelltriage derives from ShellTriageError so callers
can catch one base. Validation-style errors and I/O errors are kept in
separate branches because the CLI maps them to different exit codes.
"""

from __future__ import annotations


class ShellTriageError(Exception):
    """Base class for all shelltriage errors."""


class ValidationError(ShellTriageError):
    """Bad input content or arguments (CLI exit code 1)."""


class IoFailure(ShellTriageError):
    """Filesystem or serialization failure (CLI exit code 2)."""


# manifest ingestion

class ManifestError(ValidationError):
    pass


class MissingFieldError(ManifestError):
    pass


class DuplicateIdError(ManifestError):
    pass


class UnknownCoastError(ManifestError):
    pass


class UnknownShellClassError(ManifestError):
    pass


class EmptyManifestError(ManifestError):
    pass


class BadRatiosError(ManifestError):
    pass


class MissingEmbeddingError(ValidationError):
    pass


# image decoding and embedding backends

class DecodeFailure(ValidationError):
    pass


class UnsupportedFormatError(DecodeFailure):
    pass


class ModelLoadFailure(ShellTriageError):
    pass


class DimensionMismatchError(ValidationError):
    pass


class NonFiniteEmbeddingError(ValidationError):
    pass


# vector index

class ZeroVectorError(ValidationError):
    pass


class EmptyIndexError(ValidationError):
    pass


class IndexFileError(IoFailure):
    """Malformed persisted index."""


class BadMagicError(IndexFileError):
    pass


class VersionMismatchError(IndexFileError):
    pass


class CorruptPayloadError(IndexFileError):
    pass


# gate / classify / evaluation

class EmptyInDomainError(ValidationError):
    pass


class MissingClassError(ValidationError):
    pass


class EmptyInputError(ValidationError):
    pass


class NoInDomainCategoryError(ValidationError):
    pass


# service auth

class AuthError(ShellTriageError):
    pass
