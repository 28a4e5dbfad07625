"""End-to-end question answering: plain pipeline, agentic loop, variants.

The answer prompt always assembles, in order: system instructions, the
summary digest (variant-dependent), the refined query, labeled context
fragments, transcript snippets with timestamps, frame images with
timestamp captions, and the six options. Timestamps are rendered
everywhere so temporally grounded questions can be reasoned about.

Variant semantics for ablations:
  baseline  plain retrieval on the raw question, no summary
  +summary  baseline plus the summary digest in the answer prompt
  +agent    +summary plus the pre-retrieval agent, rethink cap forced to 0
  full      the complete loop with the configured rethink cap
"""

from __future__ import annotations

import hashlib
import re
import time
from dataclasses import dataclass, field

from .agent import (
    AgentContext,
    AgentInput,
    FunctionCallRecord,
    FunctionRegistry,
    LocalContext,
    PlannedCall,
    RefinedQuery,
    default_registry,
    execute_plan,
    plan_functions,
    refine,
    retrieve_local_context,
)
from .backend import ChatRequest, CountingBackend, ImagePart, Part, TextPart, render_surface
from .config import VARIANTS
from .errors import (
    EmptyIndexForKind,
    LabelParseFailure,
    MissingComponentForVariant,
)
from .index import KIND_FRAME, KIND_TRANSCRIPT, EmbeddingIndex, ScoredItem
from .ingest import FrameRecord, TranscriptSegment, VideoAsset
from .rethink import AnswerView, RethinkInput, RethinkInstruction, assess
from .summary import GlobalSummary, summary_digest

OPTION_SIX = "Not enough information to answer."

# question categories, dataset order
CATEGORIES = (
    "Character and Relationship Dynamics",
    "Narrative and Plot Analysis",
    "Setting and Technical Analysis",
    "Temporal",
    "Theme Exploration",
)

ANSWER_PROMPT = (
    "You are a video question answering assistant. Use the provided video "
    "context to answer the multiple-choice question. Reply with the single "
    "digit (1-6) of the best option and nothing else."
)

_LABEL = re.compile(r"\s*([1-6])\s*")


@dataclass(frozen=True)
class Question:
    question_id: str
    text: str
    options: tuple[str, ...]  # exactly 6; options[5] is the insufficiency option
    gold_index: int           # 1..5; the appended option is never gold
    video_id: str
    category: str

    def __post_init__(self) -> None:
        if len(self.options) != 6:
            raise ValueError("question needs exactly 6 options")
        if self.options[5] != OPTION_SIX:
            raise ValueError(f"option 6 must be {OPTION_SIX!r}")
        if not 1 <= self.gold_index <= 5:
            raise ValueError("gold_index must be in 1..5")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")


@dataclass
class AnswerRecord:
    chosen_index: int
    raw_text: str
    iteration: int
    prompt_digest: str


@dataclass
class IterationRecord:
    iteration: int
    plan: list[PlannedCall] = field(default_factory=list)
    calls: list[FunctionCallRecord] = field(default_factory=list)
    refined: RefinedQuery | None = None
    local: LocalContext | None = None
    retrieved_frames: list[int] = field(default_factory=list)
    retrieved_transcripts: list[int] = field(default_factory=list)
    answer: AnswerRecord | None = None
    prompt_text: str = ""
    rethink: RethinkInstruction | None = None
    verdict: str = ""  # "adequate", "inadequate", or "" when not assessed


@dataclass
class AgentTrace:
    question_id: str
    variant: str
    iterations: list[IterationRecord]
    final: AnswerRecord
    wall_time_ms: float
    backend_call_count: int  # chat calls
    embed_call_count: int = 0


def parse_answer_label(raw_text: str) -> int:
    """Exactly one digit 1-6, optionally whitespace-wrapped; nothing else."""
    m = _LABEL.fullmatch(raw_text)
    if m is None:
        raise LabelParseFailure(f"not a bare option label: {raw_text!r}")
    return int(m.group(1))


def _render_answer_request(
    question: Question,
    refined_text: str,
    fragments: list[tuple[str, str]],
    transcripts: list[tuple[TranscriptSegment, float]],
    frames: list[FrameRecord],
    digest: str | None,
    anchors: list[tuple[str, float]] | None = None,
) -> ChatRequest:
    parts: list[Part] = []
    if digest:
        parts.append(TextPart(digest))
    parts.append(TextPart(f"Question: {refined_text}"))
    if fragments:
        lines = ["Additional context:"]
        lines += [f"- {label}: {text}" for label, text in fragments]
        parts.append(TextPart("\n".join(lines)))
    if anchors:
        parts.append(
            TextPart(
                "Temporal anchors:\n"
                + "\n".join(f"- {label} at {ts:.3f} s" for label, ts in anchors)
            )
        )
    if transcripts:
        lines = ["Transcript excerpts:"]
        lines += [
            f"[{seg.start:.3f}-{seg.end:.3f}] {seg.text}" for seg, _ in transcripts
        ]
        parts.append(TextPart("\n".join(lines)))
    for fr in frames:
        parts.append(TextPart(f"Frame at {fr.timestamp:.3f} s"))
        parts.append(ImagePart(fr.image_ref))
    option_lines = ["Options:"]
    option_lines += [f"{i}. {text}" for i, text in enumerate(question.options, 1)]
    parts.append(TextPart("\n".join(option_lines)))
    parts.append(TextPart("Answer with a single digit 1-6."))
    return ChatRequest(system_prompt=ANSWER_PROMPT, user_parts=parts)


def _ask_for_label(backend, request: ChatRequest, iteration: int) -> tuple[AnswerRecord, str]:
    """One answer chat, with one strict reprompt on a bad label."""
    surface = render_surface(request)
    digest = hashlib.sha256(surface.encode("utf-8")).hexdigest()
    response = backend.chat(request)
    try:
        chosen = parse_answer_label(response.text)
    except LabelParseFailure:
        retry = ChatRequest(
            system_prompt=request.system_prompt,
            user_parts=request.user_parts + [TextPart("Respond with a single digit 1-6.")],
        )
        response = backend.chat(retry)
        chosen = parse_answer_label(response.text)  # second failure propagates
    return AnswerRecord(chosen, response.text, iteration, digest), surface


def _baseline_retrieval(
    index: EmbeddingIndex, query_embedding, video_id: str, n: int
) -> tuple[list[ScoredItem], list[ScoredItem]]:
    """Independent top-n for both kinds; one missing kind degrades to empty."""
    frames: list[ScoredItem] = []
    transcripts: list[ScoredItem] = []
    missing = 0
    try:
        frames = index.top_n(query_embedding, KIND_FRAME, n, video_id)
    except EmptyIndexForKind:
        missing += 1
    try:
        transcripts = index.top_n(query_embedding, KIND_TRANSCRIPT, n, video_id)
    except EmptyIndexForKind:
        missing += 1
    if missing == 2:
        raise EmptyIndexForKind(f"no items indexed for video {video_id!r}")
    return frames, transcripts


def answer_baseline(
    question: Question,
    asset: VideoAsset,
    index: EmbeddingIndex,
    backend,
    n: int = 5,
    digest: str | None = None,
    variant: str = "baseline",
) -> tuple[AnswerRecord, AgentTrace]:
    """Plain pipeline: embed the raw question, retrieve top-n, one answer call."""
    counting = CountingBackend(backend)
    started = time.perf_counter()
    query = counting.embed_text(question.text)
    frame_hits, transcript_hits = _baseline_retrieval(
        index, query, question.video_id, n
    )
    by_frame = {fr.frame_id: fr for fr in asset.frames}
    by_seg = {seg.segment_id: seg for seg in asset.segments}
    frames = [by_frame[h.ordinal] for h in frame_hits if h.ordinal in by_frame]
    transcripts = [
        (by_seg[h.ordinal], h.score) for h in transcript_hits if h.ordinal in by_seg
    ]
    request = _render_answer_request(
        question, question.text, [], transcripts, frames, digest
    )
    record, surface = _ask_for_label(counting, request, iteration=1)
    iteration = IterationRecord(
        iteration=1,
        retrieved_frames=[h.ordinal for h in frame_hits],
        retrieved_transcripts=[h.ordinal for h in transcript_hits],
        answer=record,
        prompt_text=surface,
    )
    trace = AgentTrace(
        question_id=question.question_id,
        variant=variant,
        iterations=[iteration],
        final=record,
        wall_time_ms=(time.perf_counter() - started) * 1000,
        backend_call_count=counting.chat_calls,
        embed_call_count=counting.embed_calls,
    )
    return record, trace


def answer_agentic(
    question: Question,
    asset: VideoAsset,
    index: EmbeddingIndex,
    summary: GlobalSummary | None,
    backend,
    registry: FunctionRegistry | None = None,
    n: int = 5,
    rethink_cap: int = 3,
    max_functions: int = 4,
    anchor_score_floor: float = 0.2,
    search_provider=None,
    include_digest: bool = True,
    variant: str = "full",
) -> tuple[AnswerRecord, AgentTrace]:
    """Think-retrieve-rethink loop, capped at rethink_cap critic passes.

    Pass k answers; if the critic finds it inadequate and k <= cap, its
    instruction feeds the next agent pass. The loop never rethinks after
    an adequate verdict, and stops unconditionally after cap+1 passes.
    """
    registry = registry or default_registry()
    counting = CountingBackend(backend)
    ctx = AgentContext(
        asset=asset,
        index=index,
        summary=summary,
        backend=counting,
        top_n=n,
        anchor_score_floor=anchor_score_floor,
        search_provider=search_provider,
    )
    digest = summary_digest(summary) if (include_digest and summary is not None) else None

    started = time.perf_counter()
    iterations: list[IterationRecord] = []
    instruction: RethinkInstruction | None = None
    record: AnswerRecord | None = None

    for pass_no in range(1, rethink_cap + 2):
        agent_input = AgentInput(question.text, summary, instruction)
        plan = plan_functions(agent_input, registry, counting, max_functions)
        calls = execute_plan(ctx, agent_input, plan, registry)
        refined = refine(agent_input, calls, counting)
        local = retrieve_local_context(refined, index, asset, n, calls)

        request = _render_answer_request(
            question,
            refined.refined_text,
            refined.context_fragments,
            local.transcripts,
            local.frames,
            digest,
            anchors=local.anchors,
        )
        record, surface = _ask_for_label(counting, request, iteration=pass_no)
        iteration = IterationRecord(
            iteration=pass_no,
            plan=plan,
            calls=calls,
            refined=refined,
            local=local,
            retrieved_frames=[fr.frame_id for fr in local.frames],
            retrieved_transcripts=[seg.segment_id for seg, _ in local.transcripts],
            answer=record,
            prompt_text=surface,
        )
        iterations.append(iteration)

        if pass_no > rethink_cap:
            break
        verdict_input = RethinkInput(
            query=question.text,
            refined=refined,
            summary=summary,
            local=local,
            answer=AnswerView(
                chosen_index=record.chosen_index,
                chosen_text=question.options[record.chosen_index - 1],
                raw_text=record.raw_text,
            ),
        )
        instruction = assess(verdict_input, counting, registry, pass_no, rethink_cap)
        if instruction is None:
            iteration.verdict = "adequate"
            break
        iteration.verdict = "inadequate"
        iteration.rethink = instruction

    assert record is not None
    trace = AgentTrace(
        question_id=question.question_id,
        variant=variant,
        iterations=iterations,
        final=record,
        wall_time_ms=(time.perf_counter() - started) * 1000,
        backend_call_count=counting.chat_calls,
        embed_call_count=counting.embed_calls,
    )
    return record, trace


def answer_with_variant(
    question: Question,
    asset: VideoAsset,
    index: EmbeddingIndex,
    summary: GlobalSummary | None,
    backend,
    variant: str,
    registry: FunctionRegistry | None = None,
    n: int = 5,
    rethink_cap: int = 3,
    max_functions: int = 4,
    anchor_score_floor: float = 0.2,
    search_provider=None,
) -> tuple[AnswerRecord, AgentTrace]:
    """Dispatch one question through one ablation variant."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    needs_summary = variant in ("+summary", "+agent", "full")
    if needs_summary and summary is None:
        raise MissingComponentForVariant(
            f"variant {variant!r} needs a built global summary for "
            f"video {question.video_id!r}"
        )
    if variant == "baseline":
        return answer_baseline(question, asset, index, backend, n, digest=None)
    if variant == "+summary":
        return answer_baseline(
            question,
            asset,
            index,
            backend,
            n,
            digest=summary_digest(summary),
            variant="+summary",
        )
    cap = 0 if variant == "+agent" else rethink_cap
    return answer_agentic(
        question,
        asset,
        index,
        summary,
        backend,
        registry=registry,
        n=n,
        rethink_cap=cap,
        max_functions=max_functions,
        anchor_score_floor=anchor_score_floor,
        search_provider=search_provider,
        include_digest=True,
        variant=variant,
    )


# --- trace serialization ----------------------------------------------------
#
# Volatile timing fields (wall_time_ms, per-call duration_ms) are kept in
# memory but excluded from serialized traces so identical runs produce
# identical trace files.


def _jsonable_call(record: FunctionCallRecord) -> dict:
    return {
        "function": record.function_name,
        "arguments": record.arguments,
        "output": record.output,
    }


def iteration_to_dict(it: IterationRecord) -> dict:
    return {
        "iteration": it.iteration,
        "plan": [{"function": p.name, "arguments": p.arguments} for p in it.plan],
        "calls": [_jsonable_call(c) for c in it.calls],
        "refined_text": it.refined.refined_text if it.refined else None,
        "context_fragments": (
            [[label, text] for label, text in it.refined.context_fragments]
            if it.refined
            else []
        ),
        "retrieved_frames": it.retrieved_frames,
        "retrieved_transcripts": it.retrieved_transcripts,
        "anchors": [[label, ts] for label, ts in (it.local.anchors if it.local else [])],
        "answer": {
            "chosen_index": it.answer.chosen_index,
            "raw_text": it.answer.raw_text,
            "prompt_digest": it.answer.prompt_digest,
        }
        if it.answer
        else None,
        "prompt_text": it.prompt_text,
        "verdict": it.verdict,
        "rethink": {
            "diagnosis": it.rethink.diagnosis,
            "directive": it.rethink.directive,
            "suggested_functions": it.rethink.suggested_functions,
            "iteration": it.rethink.iteration,
        }
        if it.rethink
        else None,
    }


def trace_to_dict(trace: AgentTrace) -> dict:
    return {
        "question_id": trace.question_id,
        "variant": trace.variant,
        "iterations": [iteration_to_dict(it) for it in trace.iterations],
        "final": {
            "chosen_index": trace.final.chosen_index,
            "raw_text": trace.final.raw_text,
            "iteration": trace.final.iteration,
            "prompt_digest": trace.final.prompt_digest,
        },
        "backend_call_count": trace.backend_call_count,
        "embed_call_count": trace.embed_call_count,
    }
