"""Persistent per-video global context: batching, summarization, aggregation.

A video's transcript and frames are packed into contiguous batches that fit
the model's input budget, each batch is summarized into timestamped topic
clusters, and the per-batch cluster lists are concatenated in order with
seam repair into one validated GlobalSummary. The summary is computed once
per video and cached.

Aggregation is plain ordered concatenation (no second condensation pass):
it preserves all information and keeps the pipeline deterministic under
the mock backend.
"""

from __future__ import annotations

import datetime as _dt
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Callable

from .backend import ChatRequest, ImagePart, Part, TextPart, estimate_tokens
from .errors import (
    IrreparableTimeline,
    ItemExceedsBudget,
    NoClustersParsed,
)
from .ingest import (
    FrameRecord,
    TranscriptSegment,
    VideoAsset,
    format_timestamp_ms,
    parse_timestamp_ms,
    serialize_webvtt,
)

logger = logging.getLogger("vidqa.summary")

SUMMARY_PROMPT = """You are provided with a transcript in WEBVTT format and a set of frames extracted from the corresponding video. Please perform the following tasks:

Topic Clustering:
Analyze the captions and cluster them into coherent topics.

For each cluster, provide:
   The start and end timestamps covered by the topic.
   The start_time of each topic cluster must be exactly equal to the end_time of the previous topic cluster, except for the first cluster.
   A brief topic title and a short summary.

Character Description:
Identify any characters mentioned or appearing in each topic cluster.
For each character, provide a brief description based on both the transcript and the video frames (e.g., appearance, attire, actions, emotions).
Ensure that the character’s name appears in the topic title or summary for clusters where they are relevant.

Frame References:
For each topic cluster, reference the specific video frames that correspond to the start and end timestamps.
If a character is described, refer to the frame(s) where their appearance or actions are most clearly depicted.

Output Format: For each topic cluster, include:
   Start timestamp
   End timestamp
   Topic Title (include character names if relevant)
   Short summary of the topic
   Character Descriptions
   Background Descriptions
   Referenced Video Frames"""

# Field labels are the contract between the prompt's Output Format section,
# the response parser, and the persisted summary document.
_LABELS = (
    "start timestamp",
    "end timestamp",
    "topic title",
    "short summary of the topic",
    "character descriptions",
    "background descriptions",
    "referenced video frames",
)
_LABEL_RE = re.compile(
    r"^\s*(?:[-*•]\s*)?(" + "|".join(re.escape(l) for l in _LABELS) + r")\s*:\s*(.*)$",
    re.IGNORECASE,
)


@dataclass
class MediaBatch:
    """A contiguous run of segments plus the frames in its time span."""

    batch_id: int
    segments: list[TranscriptSegment]
    frames: list[FrameRecord]
    token_estimate: int


@dataclass(frozen=True)
class TopicCluster:
    start_ms: int
    end_ms: int
    title: str
    summary: str
    characters: list[tuple[str, str]] = field(default_factory=list)
    background: str = ""
    frame_refs: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.end_ms <= self.start_ms:
            raise ValueError("cluster end must exceed start")
        if not self.title.strip():
            raise ValueError("cluster title must be non-empty")

    @property
    def start(self) -> float:
        return self.start_ms / 1000.0

    @property
    def end(self) -> float:
        return self.end_ms / 1000.0


@dataclass
class GlobalSummary:
    video_id: str
    clusters: list[TopicCluster]
    generated_at: str
    source_batches: int

    def validate(self) -> None:
        if not self.clusters:
            raise ValueError("summary needs at least one cluster")
        for k, cluster in enumerate(self.clusters):
            if k and cluster.start_ms != self.clusters[k - 1].end_ms:
                raise ValueError(
                    f"cluster {k} start {cluster.start_ms} != previous end "
                    f"{self.clusters[k - 1].end_ms}"
                )


def _frame_caption(frame: FrameRecord) -> str:
    return f"Frame {frame.frame_id} at {frame.timestamp:.3f} s"


def _group_parts(segment: TranscriptSegment | None, frames: list[FrameRecord]) -> list[Part]:
    parts: list[Part] = []
    if segment is not None:
        parts.append(
            TextPart(
                f"{format_timestamp_ms(segment.start_ms)} --> "
                f"{format_timestamp_ms(segment.end_ms)}\n{segment.text}"
            )
        )
    for fr in frames:
        parts.append(TextPart(_frame_caption(fr)))
        parts.append(ImagePart(fr.image_ref))
    return parts


def _frame_groups(asset: VideoAsset) -> list[list[FrameRecord]]:
    """Assign every frame to one segment group by segment start boundaries.

    Group j spans [start_j, start_{j+1}); the first group absorbs earlier
    frames and the last extends to the end of the media, so the groups
    partition the frame list exactly.
    """
    groups: list[list[FrameRecord]] = [[] for _ in asset.segments]
    if not asset.segments:
        return groups
    starts = [seg.start_ms for seg in asset.segments]
    for fr in asset.frames:
        j = 0
        for k in range(len(starts) - 1, -1, -1):
            if fr.timestamp_ms >= starts[k]:
                j = k
                break
        groups[j].append(fr)
    return groups


def plan_batches(
    asset: VideoAsset, budget_tokens: int, image_token_cost: int = 256
) -> list[MediaBatch]:
    """Greedy contiguous packing of segment+frame groups under the budget.

    Batches partition the segment list (order-preserving, jointly
    exhaustive); each frame travels with exactly one batch. Assets with no
    transcript are packed as frame-only groups.
    """
    if budget_tokens <= 0:
        raise ValueError("budget_tokens must be positive")
    groups: list[tuple[TranscriptSegment | None, list[FrameRecord]]]
    if asset.segments:
        groups = list(zip(asset.segments, _frame_groups(asset)))
    elif asset.frames:
        groups = [(None, [fr]) for fr in asset.frames]
    else:
        raise ValueError("asset has neither segments nor frames")

    batches: list[MediaBatch] = []
    cur_segments: list[TranscriptSegment] = []
    cur_frames: list[FrameRecord] = []
    cur_cost = 0

    def flush() -> None:
        nonlocal cur_segments, cur_frames, cur_cost
        if cur_segments or cur_frames:
            batches.append(
                MediaBatch(len(batches), cur_segments, cur_frames, cur_cost)
            )
            cur_segments, cur_frames, cur_cost = [], [], 0

    for segment, frames in groups:
        cost = estimate_tokens(_group_parts(segment, frames), image_token_cost)
        if cost > budget_tokens:
            what = (
                f"segment {segment.segment_id}" if segment is not None
                else f"frame {frames[0].frame_id}"
            )
            raise ItemExceedsBudget(
                f"{what} plus its frames needs {cost} tokens (> budget {budget_tokens})"
            )
        if cur_cost + cost > budget_tokens:
            flush()
        if segment is not None:
            cur_segments.append(segment)
        cur_frames.extend(frames)
        cur_cost += cost
    flush()
    return batches


def render_summary_prompt(
    batch: MediaBatch, image_token_cost: int = 256, max_output_tokens: int = 2048
) -> ChatRequest:
    """Batch -> chat request: WEBVTT text then captioned frame images."""
    parts: list[Part] = [TextPart(serialize_webvtt(batch.segments))]
    for fr in batch.frames:
        parts.append(TextPart(_frame_caption(fr)))
        parts.append(ImagePart(fr.image_ref))
    return ChatRequest(
        system_prompt=SUMMARY_PROMPT,
        user_parts=parts,
        max_output_tokens=max_output_tokens,
    )


def _parse_ts_value(value: str) -> int | None:
    value = value.strip().rstrip("s").strip()
    ms = parse_timestamp_ms(value)
    if ms is not None:
        return ms
    try:
        return round(float(value) * 1000)
    except ValueError:
        return None


def _parse_characters(value: str) -> list[tuple[str, str]]:
    value = value.strip()
    if not value or value.lower() in ("none", "n/a", "-"):
        return []
    out = []
    for entry in value.split(";"):
        entry = entry.strip()
        if not entry:
            continue
        if ":" in entry:
            name, desc = entry.split(":", 1)
        elif " - " in entry:
            name, desc = entry.split(" - ", 1)
        else:
            name, desc = entry, ""
        out.append((name.strip(), desc.strip()))
    return out


def _parse_frame_refs(value: str) -> list[int]:
    return [int(tok) for tok in re.findall(r"\d+", value)]


def parse_summary_response(text: str) -> list[TopicCluster]:
    """Parse the labeled Output Format fields into TopicClusters.

    Blocks start at each "Start timestamp" label; values may continue on
    following unlabeled lines. Unparseable clusters are skipped with a
    warning; if none parse, raises NoClustersParsed.
    """
    blocks: list[dict[str, str]] = []
    current: dict[str, str] | None = None
    open_label: str | None = None
    for line in text.splitlines():
        m = _LABEL_RE.match(line)
        if m:
            label = m.group(1).lower()
            if label == "start timestamp":
                current = {}
                blocks.append(current)
            if current is None:
                continue
            current[label] = m.group(2).strip()
            open_label = label
        elif current is not None and open_label and line.strip():
            current[open_label] = (current[open_label] + " " + line.strip()).strip()

    clusters: list[TopicCluster] = []
    for idx, block in enumerate(blocks):
        start = _parse_ts_value(block.get("start timestamp", ""))
        end = _parse_ts_value(block.get("end timestamp", ""))
        title = block.get("topic title", "").strip()
        if start is None or end is None or end <= start or not title:
            logger.warning("skipping unparseable cluster block %d: %r", idx, block)
            continue
        background = block.get("background descriptions", "").strip()
        if background.lower() in ("none", "n/a", "-"):
            background = ""
        clusters.append(
            TopicCluster(
                start_ms=start,
                end_ms=end,
                title=title,
                summary=block.get("short summary of the topic", "").strip(),
                characters=_parse_characters(block.get("character descriptions", "")),
                background=background,
                frame_refs=_parse_frame_refs(block.get("referenced video frames", "")),
            )
        )
    if not clusters:
        raise NoClustersParsed("no topic cluster could be parsed from the response")
    return clusters


def repair_contiguity(
    clusters: list[TopicCluster], tolerance_ms: int = 2000
) -> list[TopicCluster]:
    """Snap each seam start to the previous end when within tolerance.

    Larger gaps or overlaps (including overlaps that would invert a
    cluster) raise IrreparableTimeline.
    """
    repaired: list[TopicCluster] = []
    for k, cluster in enumerate(clusters):
        if k == 0:
            repaired.append(cluster)
            continue
        prev_end = repaired[-1].end_ms
        gap = cluster.start_ms - prev_end
        if gap != 0:
            if abs(gap) > tolerance_ms:
                raise IrreparableTimeline(
                    f"seam {k}: gap of {gap} ms exceeds tolerance {tolerance_ms} ms"
                )
            if cluster.end_ms <= prev_end:
                raise IrreparableTimeline(
                    f"seam {k}: cluster ends at {cluster.end_ms} ms, before the "
                    f"previous end {prev_end} ms"
                )
            cluster = replace(cluster, start_ms=prev_end)
        repaired.append(cluster)
    return repaired


def _drop_out_of_span_refs(cluster: TopicCluster, asset: VideoAsset) -> TopicCluster:
    by_id = {fr.frame_id: fr for fr in asset.frames}
    kept = [
        ref
        for ref in cluster.frame_refs
        if ref in by_id and cluster.start_ms <= by_id[ref].timestamp_ms <= cluster.end_ms
    ]
    if kept != cluster.frame_refs:
        logger.warning(
            "cluster %r: dropping frame refs outside its span: %s",
            cluster.title,
            sorted(set(cluster.frame_refs) - set(kept)),
        )
        cluster = replace(cluster, frame_refs=kept)
    return cluster


def build_global_summary(
    asset: VideoAsset,
    backend,
    budget_tokens: int,
    store=None,
    seam_tolerance_ms: int = 2000,
    image_token_cost: int = 256,
    now: Callable[[], _dt.datetime] | None = None,
) -> GlobalSummary:
    """Batch, summarize, and aggregate one video's global summary.

    Served from `store` when already built (zero backend calls); otherwise
    persisted there after validation. Per-batch failures are annotated with
    the batch id.
    """
    if store is not None:
        cached = store.load_summary(asset.video_id)
        if cached is not None:
            return cached

    clusters: list[TopicCluster] = []
    batches = plan_batches(asset, budget_tokens, image_token_cost)
    for batch in batches:
        try:
            response = backend.chat(render_summary_prompt(batch, image_token_cost))
            parsed = parse_summary_response(response.text)
            parsed = repair_contiguity(parsed, seam_tolerance_ms)
        except Exception as exc:
            raise type(exc)(f"batch {batch.batch_id}: {exc}") from exc
        clusters.extend(parsed)

    clusters = repair_contiguity(clusters, seam_tolerance_ms)
    clusters = [_drop_out_of_span_refs(c, asset) for c in clusters]
    stamp = (now() if now else _dt.datetime.now(_dt.timezone.utc)).isoformat()
    summary = GlobalSummary(
        video_id=asset.video_id,
        clusters=clusters,
        generated_at=stamp,
        source_batches=len(batches),
    )
    summary.validate()
    if store is not None:
        store.save_summary(summary)
    return summary


def summary_digest(summary: GlobalSummary) -> str:
    """Compact rendering for answer prompts: time spans, titles, characters."""
    lines = ["Video summary digest:"]
    for cluster in summary.clusters:
        names = ", ".join(name for name, _ in cluster.characters)
        suffix = f" (characters: {names})" if names else ""
        lines.append(
            f"[{cluster.start:.3f}-{cluster.end:.3f}] {cluster.title}{suffix}"
        )
    return "\n".join(lines)


# --- persisted document ---------------------------------------------------

_DOC_HEADER = "video-summary v1"


def summary_to_text(summary: GlobalSummary) -> str:
    """Human-readable persisted form; round-trips through summary_from_text."""
    lines = [
        _DOC_HEADER,
        f"video_id: {summary.video_id}",
        f"generated_at: {summary.generated_at}",
        f"source_batches: {summary.source_batches}",
        f"clusters: {len(summary.clusters)}",
        "",
    ]
    for cluster in summary.clusters:
        chars = "; ".join(f"{n}: {d}" if d else n for n, d in cluster.characters)
        lines += [
            f"Start timestamp: {cluster.start:.3f}",
            f"End timestamp: {cluster.end:.3f}",
            f"Topic Title: {cluster.title}",
            f"Short summary of the topic: {cluster.summary}",
            f"Character Descriptions: {chars if chars else 'none'}",
            f"Background Descriptions: {cluster.background if cluster.background else 'none'}",
            "Referenced Video Frames: "
            + (", ".join(str(r) for r in cluster.frame_refs) if cluster.frame_refs else "none"),
            "",
        ]
    return "\n".join(lines)


def summary_from_text(text: str) -> GlobalSummary:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _DOC_HEADER:
        raise ValueError("not a version-1 summary document")
    head: dict[str, str] = {}
    body_start = 1
    for i, line in enumerate(lines[1:], 1):
        if not line.strip():
            body_start = i
            break
        key, _, value = line.partition(":")
        head[key.strip()] = value.strip()
    clusters = parse_summary_response("\n".join(lines[body_start:]))
    summary = GlobalSummary(
        video_id=head["video_id"],
        clusters=clusters,
        generated_at=head["generated_at"],
        source_batches=int(head["source_batches"]),
    )
    summary.validate()
    return summary
