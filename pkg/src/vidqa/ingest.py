"""WEBVTT transcripts and frame manifests -> validated timeline records.

All timestamps are stored as integer milliseconds so that equality checks,
alignment, and round-trips are exact; float-second views are provided for
display and prompt rendering.

Frame extraction itself is delegated to a user-configured external command
(`sample_frames`); the engine only consumes the manifest it emits.
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .errors import (
    DuplicateTimestamp,
    ExtractorFailed,
    ExtractorUnavailable,
    MalformedTimestamp,
    MissingField,
    MissingHeader,
    NonMonotonicCues,
    UnreadableRecord,
)

MANIFEST_NAME = "frames.jsonl"

# Cue timing grammar: HH:MM:SS.mmm (2+ hour digits) or the MM:SS.mmm short
# form. Anything else on a timing line is a MalformedTimestamp.
_TS_FULL = re.compile(r"^(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})$")
_TS_SHORT = re.compile(r"^([0-5]\d):([0-5]\d)\.(\d{3})$")
_INLINE_TAG = re.compile(r"<[^>]*>")


def parse_timestamp_ms(token: str) -> int | None:
    """Parse one cue timestamp into milliseconds, or None if malformed."""
    m = _TS_FULL.match(token)
    if m:
        h, mi, s, ms = (int(g) for g in m.groups())
        return ((h * 60 + mi) * 60 + s) * 1000 + ms
    m = _TS_SHORT.match(token)
    if m:
        mi, s, ms = (int(g) for g in m.groups())
        return (mi * 60 + s) * 1000 + ms
    return None


def format_timestamp_ms(ms: int) -> str:
    """Render milliseconds as HH:MM:SS.mmm (hours may exceed two digits)."""
    if ms < 0:
        raise ValueError("negative timestamp")
    s, msec = divmod(ms, 1000)
    m, sec = divmod(s, 60)
    h, mi = divmod(m, 60)
    return f"{h:02d}:{mi:02d}:{sec:02d}.{msec:03d}"


@dataclass(frozen=True)
class TranscriptSegment:
    """One timed caption: ordinal position, [start, end) in ms, joined text."""

    segment_id: int
    start_ms: int
    end_ms: int
    text: str

    def __post_init__(self) -> None:
        if self.start_ms < 0:
            raise ValueError("segment start must be non-negative")
        if self.end_ms <= self.start_ms:
            raise ValueError("segment end must exceed start")
        if not self.text.strip():
            raise ValueError("segment text must be non-empty")

    @property
    def start(self) -> float:
        return self.start_ms / 1000.0

    @property
    def end(self) -> float:
        return self.end_ms / 1000.0


@dataclass(frozen=True)
class FrameRecord:
    """One sampled frame: ordinal position, timestamp in ms, image locator."""

    frame_id: int
    timestamp_ms: int
    image_ref: str

    def __post_init__(self) -> None:
        if self.timestamp_ms < 0:
            raise ValueError("frame timestamp must be non-negative")
        if not self.image_ref:
            raise ValueError("frame image_ref must be non-empty")

    @property
    def timestamp(self) -> float:
        return self.timestamp_ms / 1000.0


@dataclass
class VideoAsset:
    """Aligned transcript and frame streams for one video.

    Videos without audio are represented with zero segments; downstream
    retrieval then degrades to frames only.
    """

    video_id: str
    segments: list[TranscriptSegment]
    frames: list[FrameRecord]
    duration_ms: int

    def validate(self) -> None:
        if not self.video_id:
            raise ValueError("video_id must be non-empty")
        for j, seg in enumerate(self.segments):
            if seg.segment_id != j:
                raise ValueError(f"segment_id {seg.segment_id} != position {j}")
            if j and seg.start_ms < self.segments[j - 1].start_ms:
                raise ValueError("segments not sorted by start")
            if seg.end_ms > self.duration_ms:
                raise ValueError("segment end exceeds duration")
        for i, fr in enumerate(self.frames):
            if fr.frame_id != i:
                raise ValueError(f"frame_id {fr.frame_id} != position {i}")
            if i and fr.timestamp_ms <= self.frames[i - 1].timestamp_ms:
                raise ValueError("frame timestamps not strictly increasing")
            if fr.timestamp_ms > self.duration_ms:
                raise ValueError("frame timestamp exceeds duration")

    @property
    def duration(self) -> float:
        return self.duration_ms / 1000.0

    @classmethod
    def assemble(
        cls,
        video_id: str,
        segments: list[TranscriptSegment],
        frames: list[FrameRecord],
        duration_s: float | None = None,
    ) -> "VideoAsset":
        """Build and validate an asset; duration defaults to the media extent."""
        if duration_s is None:
            duration_ms = max(
                [s.end_ms for s in segments] + [f.timestamp_ms for f in frames],
                default=0,
            )
        else:
            duration_ms = round(duration_s * 1000)
        asset = cls(video_id, list(segments), list(frames), duration_ms)
        asset.validate()
        return asset

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "duration_ms": self.duration_ms,
            "segments": [
                {"start_ms": s.start_ms, "end_ms": s.end_ms, "text": s.text}
                for s in self.segments
            ],
            "frames": [
                {"timestamp_ms": f.timestamp_ms, "image_ref": f.image_ref}
                for f in self.frames
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VideoAsset":
        segments = [
            TranscriptSegment(j, s["start_ms"], s["end_ms"], s["text"])
            for j, s in enumerate(data["segments"])
        ]
        frames = [
            FrameRecord(i, f["timestamp_ms"], f["image_ref"])
            for i, f in enumerate(data["frames"])
        ]
        asset = cls(data["video_id"], segments, frames, data["duration_ms"])
        asset.validate()
        return asset


def _read_text(source: str | IO[str]) -> str:
    return source if isinstance(source, str) else source.read()


def _split_blocks(lines: list[tuple[int, str]]) -> list[list[tuple[int, str]]]:
    """Group (lineno, line) pairs into blank-line separated blocks."""
    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for pair in lines:
        if pair[1].strip():
            current.append(pair)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def parse_webvtt(source: str | IO[str]) -> list[TranscriptSegment]:
    """Parse WEBVTT text into sorted, validated transcript segments.

    Cue payload lines are joined with single spaces; inline styling tags,
    NOTE/STYLE/REGION blocks, cue identifiers, and cue settings are
    discarded. Cues with an empty payload after tag stripping carry no
    content and are skipped. Overlapping cues are permitted.
    """
    text = _read_text(source).lstrip("﻿")
    numbered = list(enumerate(text.splitlines(), 1))

    head = next(((n, ln) for n, ln in numbered if ln.strip()), None)
    if head is None:
        raise MissingHeader("empty input")
    header = head[1].strip()
    if header != "WEBVTT" and not header.startswith(("WEBVTT ", "WEBVTT\t")):
        raise MissingHeader(f"line {head[0]}: expected WEBVTT header, got {header!r}")

    body = [p for p in numbered if p[0] > head[0]]
    cues: list[tuple[int, int, str]] = []
    for block in _split_blocks(body):
        first = block[0][1].strip()
        if first.startswith(("NOTE", "STYLE", "REGION")):
            continue
        timing_at = next((i for i, (_, ln) in enumerate(block) if "-->" in ln), None)
        if timing_at is None:
            continue  # stray identifier-only block; nothing timed to keep
        lineno, timing = block[timing_at]
        left, _, right = timing.partition("-->")
        right = right.strip()
        end_token = right.split()[0] if right else ""
        start_ms = parse_timestamp_ms(left.strip())
        end_ms = parse_timestamp_ms(end_token)
        if start_ms is None or end_ms is None:
            raise MalformedTimestamp(f"line {lineno}: {timing.strip()!r}")
        if start_ms >= end_ms:
            raise NonMonotonicCues(
                f"line {lineno}: cue start {left.strip()} is not before its end"
            )
        payload = " ".join(
            _INLINE_TAG.sub("", ln).strip() for _, ln in block[timing_at + 1 :]
        ).strip()
        if not payload:
            continue
        cues.append((start_ms, end_ms, payload))

    cues.sort(key=lambda c: c[0])  # stable: file order breaks start ties
    return [
        TranscriptSegment(j, start, end, text_) for j, (start, end, text_) in enumerate(cues)
    ]


def serialize_webvtt(segments: Iterable[TranscriptSegment]) -> str:
    """Render segments back to canonical WEBVTT (one payload line per cue)."""
    parts = ["WEBVTT", ""]
    for seg in segments:
        parts.append(
            f"{format_timestamp_ms(seg.start_ms)} --> {format_timestamp_ms(seg.end_ms)}"
        )
        parts.append(seg.text)
        parts.append("")
    return "\n".join(parts)


def load_frame_manifest(source: str | IO[str]) -> list[FrameRecord]:
    """Load a line-delimited JSON frame manifest.

    Each line must carry integer `timestamp_ms` and string `image_ref`.
    Records are sorted by timestamp and ids reassigned to sorted position;
    duplicate timestamps are rejected.
    """
    raw: list[tuple[int, str]] = []
    seen: set[int] = set()
    for lineno, line in enumerate(_read_text(source).splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise UnreadableRecord(f"line {lineno}: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise UnreadableRecord(f"line {lineno}: record is not an object")
        for field in ("timestamp_ms", "image_ref"):
            if field not in obj:
                raise MissingField(f"line {lineno}: missing {field!r}")
        ts = obj["timestamp_ms"]
        if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
            raise UnreadableRecord(
                f"line {lineno}: timestamp_ms must be a non-negative integer"
            )
        ref = obj["image_ref"]
        if not isinstance(ref, str) or not ref:
            raise UnreadableRecord(f"line {lineno}: image_ref must be a non-empty string")
        if ts in seen:
            raise DuplicateTimestamp(f"line {lineno}: duplicate timestamp_ms {ts}")
        seen.add(ts)
        raw.append((ts, ref))

    raw.sort(key=lambda r: r[0])
    return [FrameRecord(i, ts, ref) for i, (ts, ref) in enumerate(raw)]


def write_frame_manifest(frames: Iterable[FrameRecord], path: str | Path) -> None:
    lines = [
        json.dumps({"timestamp_ms": f.timestamp_ms, "image_ref": f.image_ref})
        for f in frames
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sample_frames(
    video_ref: str,
    interval_s: float,
    extractor_template: str | None,
    out_dir: str | Path | None = None,
) -> list[FrameRecord]:
    """Invoke the external extractor once and load the manifest it emits.

    The template is shell-split and then formatted with `{video}`,
    `{interval_s}`, and `{out_dir}` placeholders; the extractor must write
    `frames.jsonl` into `{out_dir}` with timestamps on the k*interval grid
    (checked to within 1 ms).
    """
    if interval_s <= 0:
        raise ValueError("interval_s must be positive")
    if not extractor_template:
        raise ExtractorUnavailable(
            "no extractor command template configured; load a frame manifest instead"
        )
    out = Path(out_dir) if out_dir is not None else Path(tempfile.mkdtemp(prefix="vidqa-frames-"))
    out.mkdir(parents=True, exist_ok=True)
    cmd = [
        tok.format(video=video_ref, interval_s=interval_s, out_dir=str(out))
        for tok in shlex.split(extractor_template)
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise ExtractorFailed(
            f"extractor exited {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    manifest = out / MANIFEST_NAME
    if not manifest.exists():
        raise ExtractorFailed(f"extractor did not write {manifest}")
    with open(manifest, encoding="utf-8") as fh:
        frames = load_frame_manifest(fh)
    for k, fr in enumerate(frames):
        expected = round(k * interval_s * 1000)
        if abs(fr.timestamp_ms - expected) > 1:
            raise ExtractorFailed(
                f"manifest timestamp {fr.timestamp_ms} ms at index {k} is off the "
                f"{interval_s}s sampling grid (expected ~{expected} ms)"
            )
    return frames


def align_frames_to_segments(asset: VideoAsset) -> dict[int, int | None]:
    """Map every frame to the earliest segment whose [start, end) contains it.

    Ties between overlapping cues go to the lower segment_id; frames covered
    by no segment map to None. The mapping is total over frames.
    """
    mapping: dict[int, int | None] = {}
    for fr in asset.frames:
        hit: int | None = None
        for seg in asset.segments:
            if seg.start_ms <= fr.timestamp_ms < seg.end_ms:
                hit = seg.segment_id
                break
            if seg.start_ms > fr.timestamp_ms:
                break  # sorted starts: nothing later can contain it
        mapping[fr.frame_id] = hit
    return mapping
