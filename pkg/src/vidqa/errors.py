"""Exception types shared across the engine.

Every recoverable engine failure raises an EngineError subclass so callers
can catch one base class at pipeline boundaries while tests assert the
precise condition.
"""


class EngineError(Exception):
    """Base class for all engine errors."""


# --- transcript / manifest ingestion -----------------------------------

class MissingHeader(EngineError):
    """First non-blank line of a WEBVTT source is not the WEBVTT header."""


class MalformedTimestamp(EngineError):
    """Cue timing does not match HH:MM:SS.mmm or MM:SS.mmm forms."""


class NonMonotonicCues(EngineError):
    """Cue start is not strictly before its end."""


class DuplicateTimestamp(EngineError):
    """Two frame manifest records share a timestamp."""


class MissingField(EngineError):
    """A structured record lacks a required field."""


class UnreadableRecord(EngineError):
    """A structured record line cannot be decoded; message names the line."""


class ExtractorFailed(EngineError):
    """External frame extractor exited nonzero or emitted a bad manifest."""


class ExtractorUnavailable(EngineError):
    """No extractor command template is configured."""


# --- embedding index ----------------------------------------------------

class ZeroNormVector(EngineError):
    """Cosine similarity is undefined for zero-norm vectors."""


class DimensionMismatch(EngineError):
    """Vector dimension disagrees with the index or peer vector."""


class ConflictingDuplicate(EngineError):
    """Re-insert of an existing key with a different payload."""


class EmptyIndexForKind(EngineError):
    """No indexed items of the requested kind for the video."""


class UnknownFrame(EngineError):
    """Window request names a frame ordinal that is not indexed."""


class CorruptIndexFile(EngineError):
    """Persisted index fails checksum or structural validation."""


class VersionMismatch(EngineError):
    """Persisted index was written by an unsupported format version."""


# --- model backend ------------------------------------------------------

class ContextOverflow(EngineError):
    """Request estimate exceeds the backend's declared context window."""


class BackendUnavailable(EngineError):
    """Wire call failed permanently (after retries for transient errors)."""


class ImageUnsupported(EngineError):
    """Backend does not accept image parts."""


class EmptyInput(EngineError):
    """Embedding requested for empty content."""


# --- global summary -----------------------------------------------------

class ItemExceedsBudget(EngineError):
    """A single segment+frames group is larger than the batch budget."""


class NoClustersParsed(EngineError):
    """No topic cluster could be parsed from a summary response."""


class IrreparableTimeline(EngineError):
    """Cluster seam gap/overlap exceeds the repair tolerance."""


# --- pre-retrieval agent ------------------------------------------------

class PlanParseFailure(EngineError):
    """Planning response unparseable even after one re-ask."""


class NoAnchorsFound(EngineError):
    """Neither retrieval nor the summary produced a temporal anchor."""


class NoFramesInDirection(EngineError):
    """No frames exist on the requested side of the event timestamp."""


class ProviderError(EngineError):
    """Web search provider failure (surfaced as a note, never fatal)."""


class DecompositionParseFailure(EngineError):
    """Multi-hop decomposition unparseable; callers fall back to one hop."""


# --- rethink / orchestrator ---------------------------------------------

class VerdictParseFailure(EngineError):
    """Rethink verdict unparseable; assess treats this as adequate."""


class LabelParseFailure(EngineError):
    """Answer text is not a single option digit, even after reprompt."""


class MissingComponentForVariant(EngineError):
    """Variant requires a component (summary, index) that is not built."""


# --- evaluation harness -------------------------------------------------

class UnknownCategory(EngineError):
    """Dataset record names a question category outside the known five."""


class BadGoldIndex(EngineError):
    """Gold index outside 1..5."""


class MissingVideo(EngineError):
    """Dataset record lacks a video_id."""


class EmptyRecordSet(EngineError):
    """Metric requested over zero records."""
