"""Pre-retrieval agent: planning, registry functions, refine, retrieval."""

import re
import unicodedata

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidqa.agent import (
    AgentContext,
    AgentInput,
    FixtureSearchProvider,
    FunctionCallRecord,
    FunctionRegistry,
    FunctionSpec,
    PlannedCall,
    default_registry,
    execute_plan,
    fn_expand_query,
    fn_extract_temporal_anchors,
    fn_multi_hop,
    fn_web_search,
    plan_functions,
    refine,
    render_plan_prompt,
    retrieve_local_context,
    run_agent,
    select_action_frames,
    term_frequency,
)
from vidqa.backend import MockBackend, MockChatScript, MockRule, render_surface
from vidqa.errors import (
    EmptyIndexForKind,
    NoAnchorsFound,
    NoFramesInDirection,
    PlanParseFailure,
)
from vidqa.index import KIND_FRAME, KIND_TRANSCRIPT, EmbeddingIndex, IndexedItem
from vidqa.ingest import FrameRecord, TranscriptSegment, VideoAsset
from vidqa.rethink import RethinkInstruction
from vidqa.summary import GlobalSummary, TopicCluster

TABLE_DESCRIPTIONS = {
    "expand_query": (
        "Adds missing details, such as character descriptions, to enrich the query."
    ),
    "extract_temporal_anchors": (
        "Returns timestamps of retrieved frames or estimates time based cues "
        "from the video summary."
    ),
    "term_frequency": "Counts how many times a term shows up in the transcription.",
    "get_action_before_an_event": (
        "Suggests actions by inputting six consecutive frames before the event "
        "timestamp to the LVLMs."
    ),
    "get_action_after_an_event": (
        "Suggests actions by inputting six consecutive frames after the event "
        "timestamp to the LVLMs."
    ),
    "web_search": "Search web for unfamiliar terms in user query.",
    "multi_hop_query_generation": (
        "Break down a complex question into a sequence of simpler sub queries, "
        "retrieve for each, and aggregate the results."
    ),
}


def script(*rules):
    return MockChatScript([*rules, MockRule(".*", "NONE")])


def seg(j, start_s, end_s, text):
    return TranscriptSegment(j, round(start_s * 1000), round(end_s * 1000), text)


def simple_summary(video_id="vid"):
    return GlobalSummary(
        video_id=video_id,
        clusters=[
            TopicCluster(
                0, 16_000, "Yogi raids the picnic", "honey goes missing",
                characters=[("Yogi", "the bear wearing a green hat and white collar")],
                background="picnic area",
            ),
            TopicCluster(
                16_000, 40_000, "The confrontation at the bridge",
                "Ranger Smith blocks the bridge",
                characters=[("Ranger Smith", "the park ranger in a brown uniform")],
                background="footbridge",
            ),
        ],
        generated_at="2026-01-01T00:00:00+00:00",
        source_batches=1,
    )


def build_ctx(segments=None, frames=None, summary=None, chat_script=None, dim=32,
              top_n=5, **kw):
    segments = segments if segments is not None else [
        seg(0, 0, 4, "Yogi sniffs the baskets"),
        seg(1, 4, 8, "Ranger Smith checks the roster"),
        seg(2, 8, 12, "the bridge confrontation begins"),
    ]
    frames = frames if frames is not None else [
        FrameRecord(i, i * 2000, f"vid/frame_{i}.jpg") for i in range(7)
    ]
    asset = VideoAsset.assemble("vid", segments, frames)
    backend = MockBackend(dim, chat_script or script(), seed=1)
    index = EmbeddingIndex(dim)
    for s in asset.segments:
        index.insert(IndexedItem("vid", KIND_TRANSCRIPT, s.segment_id, backend.embed_text(s.text)))
    for f in asset.frames:
        index.insert(IndexedItem("vid", KIND_FRAME, f.frame_id, backend.embed_image(f.image_ref)))
    return AgentContext(asset, index, summary, backend, top_n=top_n, **kw)


# --- registry / planning ---------------------------------------------------------


def test_registry_has_all_seven_functions():
    registry = default_registry()
    assert registry.names() == list(TABLE_DESCRIPTIONS)
    for name, description in TABLE_DESCRIPTIONS.items():
        assert registry.get(name).description == description


def test_plan_prompt_contains_descriptions_verbatim():
    registry = default_registry()
    request = render_plan_prompt(AgentInput("why?", None), registry, 4)
    surface = render_surface(request)
    for description in TABLE_DESCRIPTIONS.values():
        assert description in surface


def test_plan_prompt_renders_instruction():
    instruction = RethinkInstruction(
        diagnosis="missing timing",
        directive="retrieve timestamps for the confrontation event",
        suggested_functions=["extract_temporal_anchors"],
        iteration=1,
    )
    request = render_plan_prompt(
        AgentInput("what order?", simple_summary(), instruction), default_registry(), 4
    )
    surface = render_surface(request)
    assert "retrieve timestamps for the confrontation event" in surface
    assert "extract_temporal_anchors" in surface


def test_plan_counting_question():
    chat = script(
        MockRule(
            r"(?s)JSON array.*Darren say",
            '[{"function": "term_frequency", "arguments": {"term": "Ow!"}}]',
        )
    )
    ctx = build_ctx(chat_script=chat)
    plan = plan_functions(
        AgentInput('How many times does Darren say "Ow!"?', None),
        default_registry(),
        ctx.backend,
    )
    assert plan == [PlannedCall("term_frequency", {"term": "Ow!"})]


def test_plan_empty():
    ctx = build_ctx(chat_script=script(MockRule("JSON array", "NONE")))
    plan = plan_functions(AgentInput("anything", None), default_registry(), ctx.backend)
    assert plan == []


def test_plan_instruction_triggers_anchors():
    chat = script(
        MockRule(
            r"(?s)JSON array.*retrieve timestamps for the confrontation event",
            '[{"function": "extract_temporal_anchors",'
            ' "arguments": {"event": "the confrontation"}}]',
        )
    )
    ctx = build_ctx(chat_script=chat)
    instruction = RethinkInstruction(
        diagnosis="", directive="retrieve timestamps for the confrontation event",
        iteration=1,
    )
    plan = plan_functions(
        AgentInput("what order?", None, instruction), default_registry(), ctx.backend
    )
    assert [p.name for p in plan] == ["extract_temporal_anchors"]


def test_plan_drops_unknown_names():
    chat = script(
        MockRule(
            "JSON array",
            '[{"function": "imaginary"}, {"function": "term_frequency",'
            ' "arguments": {"term": "x"}}]',
        )
    )
    ctx = build_ctx(chat_script=chat)
    plan = plan_functions(AgentInput("q", None), default_registry(), ctx.backend)
    assert [p.name for p in plan] == ["term_frequency"]


def test_plan_reask_then_failure():
    chat = MockChatScript([MockRule(".*", "utter nonsense")])
    ctx = build_ctx(chat_script=chat)
    with pytest.raises(PlanParseFailure):
        plan_functions(AgentInput("q", None), default_registry(), ctx.backend)


def test_plan_reask_recovers():
    chat = MockChatScript(
        [
            MockRule("JSON array", "hmm let me think", max_uses=1),
            MockRule("JSON array", "NONE"),
            MockRule(".*", "1"),
        ]
    )
    ctx = build_ctx(chat_script=chat)
    assert plan_functions(AgentInput("q", None), default_registry(), ctx.backend) == []


def test_plan_truncated_to_max_functions():
    call = '{"function": "term_frequency", "arguments": {"term": "x"}}'
    chat = script(MockRule("JSON array", f"[{call}, {call}, {call}, {call}, {call}]"))
    ctx = build_ctx(chat_script=chat)
    plan = plan_functions(AgentInput("q", None), default_registry(), ctx.backend, 4)
    assert len(plan) == 4


def test_registry_is_pluggable():
    registry = default_registry()
    registry.register(
        FunctionSpec("shot_detector", "Finds hard cuts.", {}, lambda ctx, args: [])
    )
    assert "shot_detector" in registry
    assert "shot_detector: Finds hard cuts." in registry.describe()
    with pytest.raises(ValueError):
        registry.register(
            FunctionSpec("shot_detector", "dup", {}, lambda ctx, args: [])
        )


# --- term_frequency ---------------------------------------------------------------


def segments_of(*texts):
    return [seg(j, j * 4.0, (j + 1) * 4.0, t) for j, t in enumerate(texts)]


def test_term_frequency_word_boundary():
    assert term_frequency("ow", segments_of("Ow! ow... OWL")) == 2


def test_term_frequency_absent():
    assert term_frequency("badger", segments_of("no such animal here")) == 0


def test_term_frequency_phrase_boundary():
    segs = segments_of("a fishing rod rests by the fishing rods")
    assert term_frequency("fishing rod", segs) == 1


def test_term_frequency_across_segments():
    segs = segments_of("honey here", "more honey", "HONEY!")
    assert term_frequency("honey", segs) == 3


def test_term_frequency_nfc():
    composed = "café"
    decomposed = "café"
    assert term_frequency(composed, segments_of(f"the {decomposed} opens")) == 1


def naive_term_count(term, texts):
    """Independent oracle: regex-free scan with manual boundary checks."""
    term_n = unicodedata.normalize("NFC", term.strip().lower())
    words = term_n.split()
    total = 0
    for text in texts:
        text_n = unicodedata.normalize("NFC", text.lower())
        tokens = []  # (word, start, end) of every alphanumeric run
        i = 0
        while i < len(text_n):
            if text_n[i].isalnum() or text_n[i] == "_":
                j = i
                while j < len(text_n) and (text_n[j].isalnum() or text_n[j] == "_"):
                    j += 1
                tokens.append(text_n[i:j])
                i = j
            else:
                i += 1
        k = 0
        while k <= len(tokens) - len(words):
            if tokens[k : k + len(words)] == words:
                total += 1
                k += len(words)  # non-overlapping, left to right
            else:
                k += 1
    return total


_word = st.text(alphabet="abcdefgoxyz", min_size=1, max_size=6)


@settings(max_examples=1000, deadline=None)
@given(
    st.lists(
        st.lists(_word, min_size=1, max_size=12).map(" ".join),
        min_size=1,
        max_size=4,
    ),
    st.lists(_word, min_size=1, max_size=2).map(" ".join),
)
def test_term_frequency_matches_naive_oracle(texts, term):
    segs = segments_of(*[t if t.strip() else "pad" for t in texts])
    expected = naive_term_count(term, [s.text for s in segs])
    assert term_frequency(term, segs) == expected


# --- action windows ----------------------------------------------------------------


@pytest.fixture
def twenty_frames():
    frames = [FrameRecord(i, i * 2000, f"f{i}.jpg") for i in range(20)]
    return VideoAsset.assemble("vid", [], frames, duration_s=40.0)


def test_action_before_mid_video(twenty_frames):
    chosen = select_action_frames(twenty_frames, 21.0, "before")
    assert len(chosen) == 6
    assert all(f.timestamp_ms < 21_000 for f in chosen)
    # maximal: the six closest below the event
    assert [f.frame_id for f in chosen] == [5, 6, 7, 8, 9, 10]


def test_action_after_mid_video(twenty_frames):
    chosen = select_action_frames(twenty_frames, 21.0, "after")
    assert [f.frame_id for f in chosen] == [11, 12, 13, 14, 15, 16]


def test_action_before_near_start(twenty_frames):
    chosen = select_action_frames(twenty_frames, 1.0, "before")
    assert [f.frame_id for f in chosen] == [0]


def test_action_frame_at_event_excluded(twenty_frames):
    before = select_action_frames(twenty_frames, 20.0, "before")
    after = select_action_frames(twenty_frames, 20.0, "after")
    assert 10 not in [f.frame_id for f in before]
    assert 10 not in [f.frame_id for f in after]


def test_action_no_frames_in_direction(twenty_frames):
    with pytest.raises(NoFramesInDirection):
        select_action_frames(twenty_frames, 0.0, "before")
    with pytest.raises(NoFramesInDirection):
        select_action_frames(twenty_frames, 38.0, "after")


def test_action_window_chat_returns_script():
    chat = script(MockRule("frames before it", "He reaches for the basket."))
    ctx = build_ctx(chat_script=chat)
    plan = [PlannedCall("get_action_before_an_event", {"timestamp_s": 8.0})]
    records = execute_plan(ctx, AgentInput("q", None), plan, default_registry())
    assert records[0].output == "He reaches for the basket."


# --- other functions -----------------------------------------------------------------


def test_expand_query_injects_description():
    chat = script(
        MockRule(
            r"(?s)Rewrite the question.*green hat",
            "How does Yogi (the bear wearing a green hat and white collar)'s "
            "mood change during the scene?",
        )
    )
    ctx = build_ctx(chat_script=chat, summary=simple_summary())
    out = fn_expand_query(ctx, {"query": "How does Yogi's mood change during the scene?"})
    assert "green hat and white collar" in out


def test_expand_query_no_match_is_identity():
    ctx = build_ctx(summary=simple_summary())
    out = fn_expand_query(ctx, {"query": "what color is the canoe?"})
    assert out == "what color is the canoe?"


def test_anchors_retrieval_path():
    # index a frame whose ref text matches the event: make scores high by
    # embedding the event text itself as a frame vector
    ctx = build_ctx()
    event = "the bridge confrontation begins"
    ctx.index.insert(
        IndexedItem("vid", KIND_FRAME, 99, ctx.backend.embed_text(event))
    )
    ctx.asset.frames.append(FrameRecord(99, 90_000, "late.jpg"))
    anchors = fn_extract_temporal_anchors(ctx, {"event": event})
    assert anchors[0]["label"] == "frame 99"
    assert anchors[0]["timestamp_s"] == pytest.approx(90.0)


def test_anchors_summary_fallback_empty_index():
    ctx = build_ctx(frames=[], summary=simple_summary())
    anchors = fn_extract_temporal_anchors(ctx, {"event": "the confrontation happens"})
    assert anchors == [
        {"label": "The confrontation at the bridge", "timestamp_s": 16.0}
    ]


def test_anchors_summary_fallback_below_floor():
    ctx = build_ctx(summary=simple_summary(), anchor_score_floor=1.01)
    anchors = fn_extract_temporal_anchors(ctx, {"event": "the confrontation happens"})
    assert anchors[0]["label"] == "The confrontation at the bridge"


def test_anchors_none_found():
    ctx = build_ctx(frames=[], summary=simple_summary())
    with pytest.raises(NoAnchorsFound):
        fn_extract_temporal_anchors(ctx, {"event": "zzgh qlwx"})


def test_web_search_offline_stub():
    ctx = build_ctx()
    out = fn_web_search(ctx, {"term": "sasquatch"})
    assert out["snippets"] == []
    assert "provider unavailable" in out["note"]


def test_web_search_fixture_provider():
    provider = FixtureSearchProvider({"sasquatch": ["folk tale", "not real", "extra", "more"]})
    ctx = build_ctx(search_provider=provider, web_search_max_snippets=3)
    out = fn_web_search(ctx, {"term": "sasquatch"})
    assert out["snippets"] == ["folk tale", "not real", "extra"]
    assert out["note"] == ""


def test_multi_hop_decomposes():
    chat = script(
        MockRule(
            "Decompose the question",
            "when does the race start\nwho wins the race\nwhat happens after",
        )
    )
    ctx = build_ctx(chat_script=chat)
    out = fn_multi_hop(ctx, {"query": "summarize the race outcome over time"})
    assert out["sub_queries"] == [
        "when does the race start",
        "who wins the race",
        "what happens after",
    ]
    assert out["fallback"] is False


def test_multi_hop_identity_single_hop():
    chat = script(MockRule("Decompose the question", "summarize the race"))
    ctx = build_ctx(chat_script=chat)
    out = fn_multi_hop(ctx, {"query": "summarize the race"})
    assert out["sub_queries"] == ["summarize the race"]


def test_multi_hop_malformed_falls_back():
    chat = script(MockRule("Decompose the question", "\n\n  \n"))
    ctx = build_ctx(chat_script=chat)
    out = fn_multi_hop(ctx, {"query": "complex question"})
    assert out["sub_queries"] == ["complex question"]
    assert out["fallback"] is True


def test_execute_plan_records_engine_error_as_note():
    ctx = build_ctx(frames=[], summary=simple_summary())
    plan = [PlannedCall("extract_temporal_anchors", {"event": "zzgh qlwx"})]
    records = execute_plan(ctx, AgentInput("q", None), plan, default_registry())
    assert records[0].output["error"].startswith("NoAnchorsFound")


# --- refine ---------------------------------------------------------------------------


def test_refine_empty_records_is_identity():
    ctx = build_ctx()
    refined = refine(AgentInput("plain question", None), [], ctx.backend)
    assert refined.refined_text == "plain question"
    assert refined.context_fragments == []
    assert refined.embedding == ctx.backend.embed_text("plain question")


def test_refine_expansion_plus_fragments():
    ctx = build_ctx()
    records = [
        FunctionCallRecord("expand_query", {"query": "q"}, "expanded question text"),
        FunctionCallRecord("term_frequency", {"term": "ow"}, 3),
    ]
    refined = refine(AgentInput("q", None), records, ctx.backend)
    assert refined.refined_text == "expanded question text"
    assert refined.context_fragments == [("term_frequency", "3")]
    assert refined.embedding == ctx.backend.embed_text("expanded question text")


def test_refine_fragments_preserve_call_order():
    ctx = build_ctx()
    records = [
        FunctionCallRecord("term_frequency", {"term": "a"}, 1),
        FunctionCallRecord("web_search", {"term": "b"}, {"snippets": ["s"], "note": ""}),
        FunctionCallRecord(
            "extract_temporal_anchors", {"event": "e"},
            [{"label": "frame 3", "timestamp_s": 6.0}],
        ),
    ]
    refined = refine(AgentInput("q", None), records, ctx.backend)
    assert [label for label, _ in refined.context_fragments] == [
        "term_frequency", "web_search", "extract_temporal_anchors",
    ]
    assert refined.context_fragments[2][1] == "frame 3 at 6.000 s"


def test_refine_embeds_sub_queries():
    ctx = build_ctx()
    records = [
        FunctionCallRecord(
            "multi_hop_query_generation", {"query": "q"},
            {"sub_queries": ["part one", "part two"], "fallback": False},
        )
    ]
    refined = refine(AgentInput("q", None), records, ctx.backend)
    assert [sq.text for sq in refined.sub_queries] == ["part one", "part two"]


# --- retrieve_local_context ---------------------------------------------------------


def orthogonal_ctx(n_frames=10, n_transcripts=6):
    dim = n_frames + n_transcripts
    asset = VideoAsset.assemble(
        "vid",
        [seg(j, j * 4.0, (j + 1) * 4.0, f"t{j}") for j in range(n_transcripts)],
        [FrameRecord(i, i * 2000, f"f{i}.jpg") for i in range(n_frames)],
    )
    backend = MockBackend(dim, script(), seed=0)
    index = EmbeddingIndex(dim)
    for i in range(n_frames):
        index.insert(IndexedItem("vid", KIND_FRAME, i, unit_query(dim, i)))
    for j in range(n_transcripts):
        index.insert(
            IndexedItem("vid", KIND_TRANSCRIPT, j, unit_query(dim, n_frames + j))
        )
    return asset, index, backend, dim


def unit_query(dim, hot):
    from vidqa.index import EmbeddingVector

    v = np.zeros(dim)
    v[hot] = 1.0
    return EmbeddingVector(v)


def make_refined(query_vec, text="q"):
    from vidqa.agent import RefinedQuery

    return RefinedQuery(text, text, [], query_vec, [])


def test_retrieve_identity_window():
    asset, index, backend, dim = orthogonal_ctx()
    local = retrieve_local_context(make_refined(unit_query(dim, 4)), index, asset, 2)
    assert [f.frame_id for f in local.frames] == [3, 4, 5]
    assert local.top_frame == 4


def test_retrieve_transcripts_match_bruteforce():
    rng = np.random.default_rng(31)
    dim = 16
    asset = VideoAsset.assemble(
        "vid",
        [seg(j, j * 4.0, (j + 1) * 4.0, f"t{j}") for j in range(30)],
        [FrameRecord(0, 0, "f0.jpg")],
    )
    from vidqa.index import EmbeddingVector

    index = EmbeddingIndex(dim)
    entries = []
    for j in range(30):
        v = EmbeddingVector(rng.standard_normal(dim))
        index.insert(IndexedItem("vid", KIND_TRANSCRIPT, j, v))
        entries.append((j, np.asarray(v.values, dtype=np.float64)))
    index.insert(
        IndexedItem("vid", KIND_FRAME, 0, EmbeddingVector(rng.standard_normal(dim)))
    )
    q = rng.standard_normal(dim)

    local = retrieve_local_context(
        make_refined(EmbeddingVector(q)), index, asset, 2
    )
    # oracle: score and sort
    scores = sorted(
        (
            (-float(np.dot(v, q) / (np.linalg.norm(v) * np.linalg.norm(q))), j)
            for j, v in entries
        ),
    )
    expected = [j for _, j in scores[:2]]
    assert [s.segment_id for s, _ in local.transcripts] == expected
    got_scores = [sc for _, sc in local.transcripts]
    assert got_scores == sorted(got_scores, reverse=True)


def test_retrieve_degrades_without_frames():
    asset = VideoAsset.assemble(
        "vid", [seg(0, 0, 4, "only text")], []
    )
    backend = MockBackend(8, script())
    index = EmbeddingIndex(8)
    index.insert(IndexedItem("vid", KIND_TRANSCRIPT, 0, backend.embed_text("only text")))
    with pytest.raises(EmptyIndexForKind):
        index.top_n(backend.embed_text("q"), KIND_FRAME, 1, "vid")
    local = retrieve_local_context(
        make_refined(backend.embed_text("q")), index, asset, 2
    )
    assert local.frames == []
    assert local.top_frame is None
    assert len(local.transcripts) == 1


def test_retrieve_empty_video_raises():
    asset = VideoAsset.assemble("vid", [seg(0, 0, 4, "x")], [])
    index = EmbeddingIndex(8)
    backend = MockBackend(8, script())
    with pytest.raises(EmptyIndexForKind):
        retrieve_local_context(make_refined(backend.embed_text("q")), index, asset, 2)


def test_retrieve_scale_invariance():
    asset, index, backend, dim = orthogonal_ctx()
    from vidqa.index import EmbeddingVector

    rng = np.random.default_rng(7)
    q = rng.standard_normal(dim)
    base = retrieve_local_context(make_refined(EmbeddingVector(q)), index, asset, 3)
    for lam in (0.1, 10.0):
        scaled = retrieve_local_context(
            make_refined(EmbeddingVector(q * lam)), index, asset, 3
        )
        assert [f.frame_id for f in scaled.frames] == [f.frame_id for f in base.frames]
        assert [s.segment_id for s, _ in scaled.transcripts] == [
            s.segment_id for s, _ in base.transcripts
        ]


def test_retrieve_multi_hop_union_max_score():
    asset, index, backend, dim = orthogonal_ctx()
    from vidqa.agent import RefinedQuery, SubQuery

    refined = RefinedQuery(
        "q", "q", [],
        unit_query(dim, 2),
        [SubQuery("alt", unit_query(dim, 7))],
    )
    local = retrieve_local_context(refined, index, asset, 2)
    # both hot frames retrieved with score 1.0; tie broken by ordinal
    assert local.top_frame == 2
    ids = {f.frame_id for f in local.frames}
    assert {1, 2, 3} == ids  # window around i* = 2


def test_agent_noop_equals_baseline_retrieval():
    """Empty plan + no instruction: same ids as embedding the raw query."""
    ctx = build_ctx(chat_script=script())  # default plan response NONE
    registry = default_registry()
    plan, records, refined, local = run_agent(ctx, AgentInput("which scene?", None), registry)
    assert plan == [] and records == []
    raw = ctx.backend.embed_text("which scene?")
    assert refined.embedding == raw
    frame_hits = ctx.index.top_n(raw, KIND_FRAME, ctx.top_n, "vid")
    transcript_hits = ctx.index.top_n(raw, KIND_TRANSCRIPT, ctx.top_n, "vid")
    assert local.top_frame == frame_hits[0].ordinal
    expected_window = ctx.index.local_frame_window(frame_hits[0].ordinal, "vid")
    assert [f.frame_id for f in local.frames] == expected_window
    assert [s.segment_id for s, _ in local.transcripts] == [
        h.ordinal for h in transcript_hits
    ]
