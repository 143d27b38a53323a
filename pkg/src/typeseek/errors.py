"""Exception hierarchy shared by all typeseek modules."""


class TypeseekError(Exception):
    """Base class for all errors raised by this package."""


# --- corpus ---------------------------------------------------------------

class CorpusValidationError(TypeseekError):
    """A document or span violates a structural invariant."""


class UnbalancedMarkersError(TypeseekError):
    """Marked text contains an odd number of ## marker tokens."""


class EmptySpanError(TypeseekError):
    """A marked region between ## tokens is empty."""


# --- representations ------------------------------------------------------

class DimMismatchError(TypeseekError):
    """Vector dimensionality disagrees with what a key/model/index expects."""


class UnknownComponentError(TypeseekError):
    """Component name is not a valid registrable component identifier."""


class DanglingSpanRefError(TypeseekError):
    """A representation record references a document/span not in the corpus."""


class DumpFormatError(TypeseekError):
    """A representation dump file is malformed or truncated."""


class InvalidParamsError(TypeseekError):
    """Synthetic-generation parameters are out of range."""


class MissingVectorError(TypeseekError):
    """No stored vector for a (key, doc, span) lookup."""


# --- sweep ----------------------------------------------------------------

class InsufficientDataError(TypeseekError):
    """The corpus cannot supply the requested types/mentions sample."""


class ZeroVectorError(TypeseekError):
    """Cosine similarity is undefined for an all-zero vector."""


class EmptyInputError(TypeseekError):
    """An operation received an empty score list where values are required."""


# --- projection -----------------------------------------------------------

class NonFiniteLossError(TypeseekError):
    """Training produced a NaN or infinite loss."""


class TypeWithoutMentionsError(TypeseekError):
    """A training type has no labeled mentions in the corpus."""


class TypeSplitViolationError(TypeseekError):
    """A held-out test type was requested for training."""


class CorruptCheckpointError(TypeseekError):
    """A model checkpoint file is truncated or has a bad magic/header."""


# --- index ----------------------------------------------------------------

class NonFiniteVectorError(TypeseekError):
    """An index vector contains NaN/inf or cannot be normalized."""


class CorruptIndexError(TypeseekError):
    """An index file fails magic, length, or checksum validation."""


# --- lexical --------------------------------------------------------------

class UnknownDocError(TypeseekError):
    """BM25 scoring was asked about a document that was never indexed."""


# --- evaluation -----------------------------------------------------------

class EmptyRelevantError(TypeseekError):
    """R-Precision is undefined for a query with no relevant documents."""


class QuerySetMismatchError(TypeseekError):
    """Systems under comparison were not evaluated on identical query sets."""


# --- cli ------------------------------------------------------------------

class MissingVariantDataError(TypeseekError):
    """The dump lacks a key or token variant required by the ablation grid."""
