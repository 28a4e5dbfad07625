"""Shared builders for orchestrator-level tests."""

import pytest

from vidqa.backend import MockBackend, MockChatScript, MockRule
from vidqa.index import KIND_FRAME, KIND_TRANSCRIPT, EmbeddingIndex, IndexedItem
from vidqa.ingest import FrameRecord, TranscriptSegment, VideoAsset
from vidqa.orchestrator import OPTION_SIX, Question
from vidqa.summary import GlobalSummary, TopicCluster

DIM = 32


def make_segments(texts, dur_s=4.0):
    return [
        TranscriptSegment(j, round(j * dur_s * 1000), round((j + 1) * dur_s * 1000), t)
        for j, t in enumerate(texts)
    ]


def make_asset(video_id="vid", n_segments=6, n_frames=13):
    segments = make_segments([f"scene {j} of the story" for j in range(n_segments)])
    frames = [FrameRecord(i, i * 2000, f"{video_id}/f{i}.jpg") for i in range(n_frames)]
    return VideoAsset.assemble(video_id, segments, frames)


def make_backend(rules, dim=DIM, seed=0, default="1", context_window=32768):
    script = MockChatScript([*rules, MockRule(".*", default)])
    return MockBackend(dim, script, seed=seed, context_window=context_window)


def make_index(asset, backend):
    index = EmbeddingIndex(backend.profile.embedding_dim)
    for seg in asset.segments:
        index.insert(
            IndexedItem(asset.video_id, KIND_TRANSCRIPT, seg.segment_id,
                        backend.embed_text(seg.text))
        )
    for fr in asset.frames:
        index.insert(
            IndexedItem(asset.video_id, KIND_FRAME, fr.frame_id,
                        backend.embed_image(fr.image_ref))
        )
    return index


def make_summary(video_id="vid", end_s=24.0):
    half = round(end_s * 500)
    return GlobalSummary(
        video_id,
        [
            TopicCluster(0, half, "The setup", "how it starts",
                         characters=[("Yogi", "bear in a green hat")]),
            TopicCluster(half, round(end_s * 1000), "The payoff", "how it ends"),
        ],
        "2026-01-01T00:00:00+00:00",
        1,
    )


def make_question(text="what happens in scene 3?", gold=2, qid="q1", video_id="vid",
                  category="Narrative and Plot Analysis"):
    return Question(
        question_id=qid,
        text=text,
        options=("apples", "a chase", "a song", "a storm", "nothing") + (OPTION_SIX,),
        gold_index=gold,
        video_id=video_id,
        category=category,
    )


@pytest.fixture
def pipeline():
    """(asset, index-builder, summary, question) with a backend factory."""

    asset = make_asset()
    summary = make_summary()
    question = make_question()

    def build(rules, **kw):
        backend = make_backend(rules, **kw)
        index = make_index(asset, backend)
        return backend, index

    return asset, summary, question, build
