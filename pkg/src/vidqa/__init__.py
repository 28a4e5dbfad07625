"""vidqa: agentic video question answering over transcripts and frames."""

from .backend import (
    BackendProfile,
    ChatRequest,
    ChatResponse,
    ImagePart,
    MockBackend,
    MockChatScript,
    MockRule,
    TextPart,
    WireBackend,
    estimate_tokens,
    make_backend,
)
from .config import EngineConfig, VARIANTS, resolve_config
from .errors import EngineError
from .index import (
    KIND_FRAME,
    KIND_TRANSCRIPT,
    EmbeddingIndex,
    EmbeddingVector,
    IndexedItem,
    RetrievalResult,
    cosine_similarity,
)
from .ingest import (
    FrameRecord,
    TranscriptSegment,
    VideoAsset,
    align_frames_to_segments,
    load_frame_manifest,
    parse_webvtt,
    sample_frames,
    serialize_webvtt,
)
from .orchestrator import (
    CATEGORIES,
    OPTION_SIX,
    AgentTrace,
    AnswerRecord,
    Question,
    answer_agentic,
    answer_baseline,
    answer_with_variant,
    parse_answer_label,
)
from .rethink import RethinkInput, RethinkInstruction, assess
from .summary import (
    GlobalSummary,
    MediaBatch,
    TopicCluster,
    build_global_summary,
    parse_summary_response,
    plan_batches,
    render_summary_prompt,
    repair_contiguity,
)
from .evaluation import EvalRecord, accuracy, load_dataset, macro_f1, run_eval
from .store import VideoStore

__version__ = "0.1.0"
