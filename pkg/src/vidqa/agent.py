"""Pre-retrieval thinking stage: plan helper functions, refine, retrieve.

Given the user query, the global summary, and (on later iterations) a
critic directive, one planning chat call selects functions from the
registry. Their outputs become labeled context fragments, the query is
refined and embedded, and the local context (a 3-frame window around the
best frame plus the top-n transcript segments) is assembled.

With an empty plan and no directive the refined query equals the original,
so the retrieval ids are identical to the plain pipeline's for the same
question; the agent layer is a clean no-op, which is what makes ablations
comparable.
"""

from __future__ import annotations

import logging
import json
import re
import time
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .backend import ChatRequest, ImagePart, TextPart
from .errors import (
    EmptyIndexForKind,
    EngineError,
    NoAnchorsFound,
    NoFramesInDirection,
    PlanParseFailure,
    ProviderError,
)
from .index import (
    KIND_FRAME,
    KIND_TRANSCRIPT,
    EmbeddingIndex,
    EmbeddingVector,
    ScoredItem,
)
from .ingest import FrameRecord, TranscriptSegment, VideoAsset
from .summary import GlobalSummary, summary_digest

logger = logging.getLogger("vidqa.agent")


# --- domain types ---------------------------------------------------------


@dataclass
class AgentInput:
    query: str
    summary: GlobalSummary | None
    instruction: "RethinkInstruction | None" = None

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("query must be non-empty")


@dataclass
class FunctionCallRecord:
    function_name: str
    arguments: dict
    output: object
    duration_ms: float = 0.0


@dataclass
class SubQuery:
    text: str
    embedding: EmbeddingVector


@dataclass
class RefinedQuery:
    original: str
    refined_text: str
    context_fragments: list[tuple[str, str]]
    embedding: EmbeddingVector
    sub_queries: list[SubQuery] = field(default_factory=list)


@dataclass
class LocalContext:
    """Question-scoped evidence: frame window, scored transcripts, anchors."""

    frames: list[FrameRecord]
    transcripts: list[tuple[TranscriptSegment, float]]
    anchors: list[tuple[str, float]] = field(default_factory=list)
    top_frame: int | None = None
    top_transcript: int | None = None


@dataclass
class PlannedCall:
    name: str
    arguments: dict


class AgentContext:
    """Everything a registry function may touch during one invocation."""

    def __init__(
        self,
        asset: VideoAsset,
        index: EmbeddingIndex,
        summary: GlobalSummary | None,
        backend,
        top_n: int = 5,
        anchor_score_floor: float = 0.2,
        search_provider: "SearchProvider | None" = None,
        web_search_max_snippets: int = 3,
    ):
        self.asset = asset
        self.index = index
        self.summary = summary
        self.backend = backend
        self.top_n = top_n
        self.anchor_score_floor = anchor_score_floor
        self.search_provider = search_provider or OfflineSearchProvider()
        self.web_search_max_snippets = web_search_max_snippets


# --- registry -------------------------------------------------------------


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    description: str          # rendered verbatim into the planning prompt
    arg_schema: dict[str, str]
    executor: Callable[[AgentContext, dict], object]


class FunctionRegistry:
    """Ordered, extension-pluggable function table for the planner."""

    def __init__(self) -> None:
        self._specs: dict[str, FunctionSpec] = {}

    def register(self, spec: FunctionSpec) -> None:
        if spec.name in self._specs:
            raise ValueError(f"function {spec.name!r} already registered")
        self._specs[spec.name] = spec

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def get(self, name: str) -> FunctionSpec:
        return self._specs[name]

    def names(self) -> list[str]:
        return list(self._specs)

    def describe(self) -> str:
        return "\n".join(
            f"- {spec.name}: {spec.description}" for spec in self._specs.values()
        )


# --- registry functions -----------------------------------------------------

EXPAND_PROMPT = (
    "Rewrite the question so it contains the relevant character and "
    "background details listed below. Keep the intent unchanged and reply "
    "with the rewritten question only."
)

ACTION_PROMPT = (
    "Describe the actions taking place across these consecutive video "
    "frames, in order, in two or three sentences."
)

MULTIHOP_PROMPT = (
    "Decompose the question into 2 to 4 simpler sub-queries that can each "
    "be answered from the video independently. Reply with one sub-query "
    "per line and nothing else."
)


def _match_characters(query: str, summary: GlobalSummary | None) -> list[tuple[str, str]]:
    if summary is None:
        return []
    qlow = query.lower()
    seen: dict[str, str] = {}
    for cluster in summary.clusters:
        for name, desc in cluster.characters:
            if name.lower() in qlow and name not in seen:
                seen[name] = desc
    return list(seen.items())


def fn_expand_query(ctx: AgentContext, args: dict) -> str:
    """Inject matching character/background descriptions into the query.

    Falls back to the original query when the summary names no entity that
    appears in it (no chat call in that case).
    """
    query = args["query"]
    matches = _match_characters(query, ctx.summary)
    if not matches:
        return query
    detail_lines = [f"{name}: {desc}" for name, desc in matches if desc]
    if ctx.summary is not None:
        backgrounds = {
            c.background
            for c in ctx.summary.clusters
            if c.background and any(n.lower() in query.lower() for n, _ in c.characters)
        }
        detail_lines.extend(sorted(backgrounds))
    if not detail_lines:
        return query
    request = ChatRequest(
        system_prompt=EXPAND_PROMPT,
        user_parts=[
            TextPart(f"Question: {query}"),
            TextPart("Details:\n" + "\n".join(detail_lines)),
        ],
    )
    expanded = ctx.backend.chat(request).text.strip()
    return expanded or query


def fn_extract_temporal_anchors(ctx: AgentContext, args: dict) -> list[dict]:
    """Timestamps of frames retrieved for the event description.

    When every retrieval score sits below the floor (or there are no
    frames), falls back to summary clusters whose title or summary mention
    the event terms and returns their start times.
    """
    event = args["event"]
    anchors: list[dict] = []
    try:
        query = ctx.backend.embed_text(event)
        hits = ctx.index.top_n(query, KIND_FRAME, ctx.top_n, ctx.asset.video_id)
        if hits and max(h.score for h in hits) >= ctx.anchor_score_floor:
            by_id = {fr.frame_id: fr for fr in ctx.asset.frames}
            anchors = [
                {"label": f"frame {h.ordinal}", "timestamp_s": by_id[h.ordinal].timestamp}
                for h in hits
                if h.ordinal in by_id
            ]
    except EmptyIndexForKind:
        pass
    if not anchors and ctx.summary is not None:
        # content words only; short function words would match every cluster
        terms = [t for t in re.findall(r"\w+", event.lower()) if len(t) >= 4]
        for cluster in ctx.summary.clusters:
            haystack = f"{cluster.title} {cluster.summary}".lower()
            if any(term in haystack for term in terms):
                anchors.append({"label": cluster.title, "timestamp_s": cluster.start})
    if not anchors:
        raise NoAnchorsFound(f"no temporal anchor for event {event!r}")
    return anchors


def term_frequency(term: str, segments: list[TranscriptSegment]) -> int:
    """Case-insensitive word-boundary count of a term across segment texts.

    Both term and text are NFC-normalized; multi-word terms match as
    contiguous phrases (any whitespace run between words). Matches are
    counted left to right without overlap, so "a a" shows up once in
    "a a a".
    """
    if not term.strip():
        raise ValueError("term must be non-empty")
    norm_term = unicodedata.normalize("NFC", term.strip())
    words = [re.escape(w) for w in norm_term.split()]
    pattern = re.compile(
        r"\b" + r"\s+".join(words) + r"\b", re.IGNORECASE | re.UNICODE
    )
    total = 0
    for seg in segments:
        total += len(pattern.findall(unicodedata.normalize("NFC", seg.text)))
    return total


def fn_term_frequency(ctx: AgentContext, args: dict) -> int:
    return term_frequency(args["term"], ctx.asset.segments)


def select_action_frames(
    asset: VideoAsset, timestamp_s: float, direction: str, count: int = 6
) -> list[FrameRecord]:
    """The `count` consecutive frames strictly before/after the timestamp.

    Clamped at media boundaries (possibly fewer); a frame exactly at the
    timestamp belongs to neither side.
    """
    if direction not in ("before", "after"):
        raise ValueError("direction must be 'before' or 'after'")
    ts_ms = round(timestamp_s * 1000)
    if direction == "before":
        side = [fr for fr in asset.frames if fr.timestamp_ms < ts_ms]
        chosen = side[-count:]
    else:
        side = [fr for fr in asset.frames if fr.timestamp_ms > ts_ms]
        chosen = side[:count]
    if not chosen:
        raise NoFramesInDirection(f"no frames {direction} {timestamp_s:.3f} s")
    return chosen


def _action_window(ctx: AgentContext, args: dict, direction: str) -> str:
    frames = select_action_frames(ctx.asset, float(args["timestamp_s"]), direction)
    parts: list[TextPart | ImagePart] = [
        TextPart(
            f"Event at {float(args['timestamp_s']):.3f} s; frames {direction} it:"
        )
    ]
    for fr in frames:
        parts.append(TextPart(f"Frame {fr.frame_id} at {fr.timestamp:.3f} s"))
        parts.append(ImagePart(fr.image_ref))
    request = ChatRequest(system_prompt=ACTION_PROMPT, user_parts=parts)
    return ctx.backend.chat(request).text.strip()


def fn_action_before(ctx: AgentContext, args: dict) -> str:
    return _action_window(ctx, args, "before")


def fn_action_after(ctx: AgentContext, args: dict) -> str:
    return _action_window(ctx, args, "after")


class SearchProvider(Protocol):
    def search(self, term: str, max_snippets: int) -> list[str]: ...


class OfflineSearchProvider:
    """Default stub: no network, returns nothing."""

    def search(self, term: str, max_snippets: int) -> list[str]:
        raise ProviderError("no web search provider configured")


class FixtureSearchProvider:
    """Canned snippets keyed by term; for tests and recorded runs."""

    def __init__(self, fixture: dict[str, list[str]]):
        self.fixture = fixture

    def search(self, term: str, max_snippets: int) -> list[str]:
        return list(self.fixture.get(term, []))[:max_snippets]


def fn_web_search(ctx: AgentContext, args: dict) -> dict:
    """Provider snippets for an unfamiliar term; provider failure is a note."""
    term = args["term"]
    try:
        snippets = ctx.search_provider.search(term, ctx.web_search_max_snippets)
        return {"snippets": snippets[: ctx.web_search_max_snippets], "note": ""}
    except ProviderError as exc:
        return {"snippets": [], "note": f"provider unavailable: {exc}"}


def fn_multi_hop(ctx: AgentContext, args: dict) -> dict:
    """Decompose the query into 2-4 sub-queries (single hop on failure)."""
    query = args["query"]
    request = ChatRequest(
        system_prompt=MULTIHOP_PROMPT, user_parts=[TextPart(f"Question: {query}")]
    )
    text = ctx.backend.chat(request).text
    subs = []
    for line in text.splitlines():
        line = re.sub(r"^\s*(?:\d+[.)]\s*|[-*•]\s*)", "", line).strip()
        if line:
            subs.append(line)
    subs = subs[:4]
    if not subs:
        logger.warning("multi-hop decomposition unparseable; using single hop")
        return {"sub_queries": [query], "fallback": True}
    return {"sub_queries": subs, "fallback": False}


def default_registry() -> FunctionRegistry:
    registry = FunctionRegistry()
    registry.register(FunctionSpec(
        "expand_query",
        "Adds missing details, such as character descriptions, to enrich the query.",
        {"query": "the question to enrich"},
        fn_expand_query,
    ))
    registry.register(FunctionSpec(
        "extract_temporal_anchors",
        "Returns timestamps of retrieved frames or estimates time based cues from the video summary.",
        {"event": "description of the event to locate"},
        fn_extract_temporal_anchors,
    ))
    registry.register(FunctionSpec(
        "term_frequency",
        "Counts how many times a term shows up in the transcription.",
        {"term": "word or phrase to count"},
        fn_term_frequency,
    ))
    registry.register(FunctionSpec(
        "get_action_before_an_event",
        "Suggests actions by inputting six consecutive frames before the event timestamp to the LVLMs.",
        {"timestamp_s": "event timestamp in seconds"},
        fn_action_before,
    ))
    registry.register(FunctionSpec(
        "get_action_after_an_event",
        "Suggests actions by inputting six consecutive frames after the event timestamp to the LVLMs.",
        {"timestamp_s": "event timestamp in seconds"},
        fn_action_after,
    ))
    registry.register(FunctionSpec(
        "web_search",
        "Search web for unfamiliar terms in user query.",
        {"term": "term to look up"},
        fn_web_search,
    ))
    registry.register(FunctionSpec(
        "multi_hop_query_generation",
        "Break down a complex question into a sequence of simpler sub queries, retrieve for each, and aggregate the results.",
        {"query": "the complex question"},
        fn_multi_hop,
    ))
    return registry


# --- planning ---------------------------------------------------------------

PLAN_PROMPT = (
    "You are the pre-retrieval planning stage of a video question answering "
    "engine. Decide which of the available functions to call before "
    "retrieval, based on the question, the video summary, and any critic "
    "directive. Reply with one JSON array of objects, each "
    '{"function": <name>, "arguments": {...}}, or the word NONE to call '
    "nothing."
)


def render_plan_prompt(
    input: AgentInput, registry: FunctionRegistry, max_functions: int
) -> ChatRequest:
    parts: list[TextPart] = [TextPart(f"Question: {input.query}")]
    if input.instruction is not None:
        parts.append(
            TextPart(
                "Critic directive: "
                f"{input.instruction.directive}\n"
                f"Diagnosis: {input.instruction.diagnosis}\n"
                "Suggested functions: "
                + (", ".join(input.instruction.suggested_functions) or "none")
            )
        )
    if input.summary is not None:
        parts.append(TextPart(summary_digest(input.summary)))
    parts.append(TextPart("Available functions:\n" + registry.describe()))
    parts.append(TextPart(f"Call at most {max_functions} functions."))
    return ChatRequest(system_prompt=PLAN_PROMPT, user_parts=parts)


def _parse_plan_text(text: str) -> list[dict] | None:
    stripped = text.strip()
    if stripped.upper() == "NONE":
        return []
    candidates = [stripped]
    start, end = stripped.find("["), stripped.rfind("]")
    if 0 <= start < end:
        candidates.append(stripped[start : end + 1])
    for candidate in candidates:
        try:
            data = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(data, list) and all(isinstance(e, dict) for e in data):
            return data
    return None


def plan_functions(
    input: AgentInput,
    registry: FunctionRegistry,
    backend,
    max_functions: int = 4,
) -> list[PlannedCall]:
    """One planning chat call -> ordered, validated call plan.

    Unknown function names are dropped with a warning; an empty plan is a
    valid outcome (direct retrieval). One re-ask before PlanParseFailure.
    """
    if not registry.names():
        raise ValueError("registry must expose at least one function")
    request = render_plan_prompt(input, registry, max_functions)
    parsed = _parse_plan_text(backend.chat(request).text)
    if parsed is None:
        retry = ChatRequest(
            system_prompt=request.system_prompt,
            user_parts=request.user_parts
            + [TextPart("Reply with only the JSON array, or NONE.")],
        )
        parsed = _parse_plan_text(backend.chat(retry).text)
        if parsed is None:
            raise PlanParseFailure("planning response unparseable after re-ask")
    plan: list[PlannedCall] = []
    for entry in parsed:
        name = entry.get("function")
        if name not in registry:
            logger.warning("dropping unknown planned function %r", name)
            continue
        args = entry.get("arguments", {})
        plan.append(PlannedCall(name, dict(args) if isinstance(args, dict) else {}))
    return plan[:max_functions]


def execute_plan(
    ctx: AgentContext,
    input: AgentInput,
    plan: list[PlannedCall],
    registry: FunctionRegistry,
) -> list[FunctionCallRecord]:
    """Run planned calls in order, recording outputs.

    Query-taking functions default their `query` argument from the
    question. An engine error raised by one function is recorded as an
    error note on that call instead of aborting the question; it stays
    visible in the trace and the answer prompt. Direct callers of the
    fn_* executors still see the raises.
    """
    records: list[FunctionCallRecord] = []
    for call in plan:
        args = dict(call.arguments)
        if call.name in ("expand_query", "multi_hop_query_generation"):
            args.setdefault("query", input.query)
        started = time.perf_counter()
        try:
            output = registry.get(call.name).executor(ctx, args)
        except KeyError as exc:
            output = {"error": f"missing argument: {exc}"}
        except EngineError as exc:
            output = {"error": f"{type(exc).__name__}: {exc}"}
        elapsed = (time.perf_counter() - started) * 1000
        records.append(FunctionCallRecord(call.name, args, output, elapsed))
    return records


# --- refine and retrieve ----------------------------------------------------


def _fragment_text(record: FunctionCallRecord) -> str:
    """Compact rendering of one function output for prompts and traces."""
    out = record.output
    if isinstance(out, dict):
        if "error" in out:
            return f"failed ({out['error']})"
        if "sub_queries" in out:
            return "; ".join(out["sub_queries"])
        if "snippets" in out:
            bits = list(out["snippets"])
            if out.get("note"):
                bits.append(out["note"])
            return "; ".join(bits) if bits else "no results"
    if isinstance(out, list):  # temporal anchors
        return "; ".join(
            f"{a['label']} at {a['timestamp_s']:.3f} s" if isinstance(a, dict) else str(a)
            for a in out
        )
    return str(out)


def refine(
    input: AgentInput, call_records: list[FunctionCallRecord], backend
) -> RefinedQuery:
    """Assemble the refined query from the original plus function outputs.

    An expand_query output (when present and clean) replaces the question
    text; every other output is appended as a labeled fragment in call
    order. The refined text is then embedded for retrieval.
    """
    refined_text = input.query
    fragments: list[tuple[str, str]] = []
    sub_queries: list[SubQuery] = []
    for record in call_records:
        is_error = isinstance(record.output, dict) and "error" in record.output
        if record.function_name == "expand_query" and not is_error:
            expanded = str(record.output).strip()
            if expanded:
                refined_text = expanded
            continue
        fragments.append((record.function_name, _fragment_text(record)))
        if (
            record.function_name == "multi_hop_query_generation"
            and isinstance(record.output, dict)
            and not is_error
        ):
            for text in record.output.get("sub_queries", []):
                if text.strip() and text.strip() != input.query.strip():
                    sub_queries.append(SubQuery(text, backend.embed_text(text)))
    return RefinedQuery(
        original=input.query,
        refined_text=refined_text,
        context_fragments=fragments,
        embedding=backend.embed_text(refined_text),
        sub_queries=sub_queries,
    )


def _merged_top(
    index: EmbeddingIndex,
    queries: list[EmbeddingVector],
    kind: str,
    n: int,
    video_id: str,
) -> list[ScoredItem]:
    """Top-n of one kind over several query embeddings.

    Per-query top-n lists are unioned keeping each item's maximum score
    (ties rank the lower ordinal first), which is how multi-hop sub-query
    results aggregate.
    """
    best: dict[int, float] = {}
    for query in queries:
        for hit in index.top_n(query, kind, n, video_id):
            if hit.ordinal not in best or hit.score > best[hit.ordinal]:
                best[hit.ordinal] = hit.score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [ScoredItem(o, s) for o, s in ranked[:n]]


def retrieve_local_context(
    refined: RefinedQuery,
    index: EmbeddingIndex,
    asset: VideoAsset,
    n: int,
    call_records: list[FunctionCallRecord] | None = None,
) -> LocalContext:
    """Best-frame window plus top-n transcripts for the refined query.

    Frame and transcript argmaxes are computed independently. A video with
    no frames degrades to transcripts only (and vice versa); only a video
    with neither raises EmptyIndexForKind. Temporal anchors from the call
    records are carried along.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    queries = [refined.embedding] + [sq.embedding for sq in refined.sub_queries]

    frame_hits: list[ScoredItem] = []
    transcript_hits: list[ScoredItem] = []
    missing = 0
    try:
        frame_hits = _merged_top(index, queries, KIND_FRAME, n, asset.video_id)
    except EmptyIndexForKind:
        missing += 1
    try:
        transcript_hits = _merged_top(index, queries, KIND_TRANSCRIPT, n, asset.video_id)
    except EmptyIndexForKind:
        missing += 1
    if missing == 2:
        raise EmptyIndexForKind(f"no items indexed for video {asset.video_id!r}")

    frames: list[FrameRecord] = []
    top_frame = None
    if frame_hits:
        top_frame = frame_hits[0].ordinal
        window = index.local_frame_window(top_frame, asset.video_id)
        by_id = {fr.frame_id: fr for fr in asset.frames}
        frames = [by_id[i] for i in window if i in by_id]

    by_seg = {seg.segment_id: seg for seg in asset.segments}
    transcripts = [
        (by_seg[h.ordinal], h.score) for h in transcript_hits if h.ordinal in by_seg
    ]

    anchors: list[tuple[str, float]] = []
    for record in call_records or []:
        if record.function_name == "extract_temporal_anchors" and isinstance(
            record.output, list
        ):
            for a in record.output:
                if isinstance(a, dict) and "label" in a and "timestamp_s" in a:
                    anchors.append((a["label"], float(a["timestamp_s"])))

    return LocalContext(
        frames=frames,
        transcripts=transcripts,
        anchors=anchors,
        top_frame=top_frame,
        top_transcript=transcript_hits[0].ordinal if transcript_hits else None,
    )


def run_agent(
    ctx: AgentContext,
    input: AgentInput,
    registry: FunctionRegistry,
    max_functions: int = 4,
    n: int | None = None,
) -> tuple[list[PlannedCall], list[FunctionCallRecord], RefinedQuery, LocalContext]:
    """One full agent invocation: plan -> execute -> refine -> retrieve."""
    plan = plan_functions(input, registry, ctx.backend, max_functions)
    records = execute_plan(ctx, input, plan, registry)
    refined = refine(input, records, ctx.backend)
    local = retrieve_local_context(
        refined, ctx.index, ctx.asset, n if n is not None else ctx.top_n, records
    )
    return plan, records, refined, local
