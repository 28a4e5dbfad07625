"""Shared-space embedding store with exact cosine-similarity retrieval.

Frames, transcript segments, and queries live in one z-dimensional space.
Retrieval is a brute-force scan: per-video corpora are small (hundreds to
low thousands of items), so the scan is exact, fast, and doubles as its own
oracle. Selecting the n individually highest-scoring items attains the
maximum of the sum-over-subset objective, so top-n here is the subset
argmax.

Components are held as float32 (the persisted precision) so that a saved
and reloaded index is bit-identical to the original; similarity arithmetic
runs in float64.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConflictingDuplicate,
    CorruptIndexFile,
    DimensionMismatch,
    EmptyIndexForKind,
    UnknownFrame,
    VersionMismatch,
    ZeroNormVector,
)

KIND_FRAME = "frame"
KIND_TRANSCRIPT = "transcript"
_KIND_CODES = {KIND_FRAME: 0, KIND_TRANSCRIPT: 1}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

_MAGIC = b"VQIX"
_FORMAT_VERSION = 1


class EmbeddingVector:
    """Fixed-dimension vector of finite float32 components."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float] | np.ndarray):
        arr = np.array(values, dtype=np.float32, copy=True)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding components must be finite")
        arr.flags.writeable = False
        self.values = arr

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self) -> int:
        return hash(self.values.tobytes())

    def __repr__(self) -> str:
        return f"EmbeddingVector(dim={self.dim})"


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """a.b / (|a||b|), clamped to [-1, 1]; rejects zero-norm inputs."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"{a.dim} vs {b.dim}")
    av = a.values.astype(np.float64)
    bv = b.values.astype(np.float64)
    na = float(np.linalg.norm(av))
    nb = float(np.linalg.norm(bv))
    if na == 0.0 or nb == 0.0:
        raise ZeroNormVector("cosine similarity undefined for zero-norm vector")
    return float(np.clip(np.dot(av, bv) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class IndexedItem:
    """One stored embedding, keyed by (video_id, kind, ordinal)."""

    video_id: str
    kind: str
    ordinal: int
    vector: EmbeddingVector


@dataclass(frozen=True)
class ScoredItem:
    ordinal: int
    score: float


@dataclass
class RetrievalResult:
    """Joint frame/transcript retrieval for one query embedding."""

    top_frame: int | None
    top_transcript: int | None
    frame_set: list[int]
    transcript_set: list[int]
    scores: dict[tuple[str, int], float] = field(default_factory=dict)


class EmbeddingIndex:
    """Brute-force cosine index over (video_id, kind, ordinal) keys."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("index dimension must be >= 1")
        self.dim = dim
        self._items: dict[tuple[str, str, int], EmbeddingVector] = {}

    def __len__(self) -> int:
        return len(self._items)

    def insert(self, item: IndexedItem) -> None:
        """Store an item; identical re-insert is a no-op, conflicting is an error."""
        if item.kind not in _KIND_CODES:
            raise ValueError(f"unknown kind {item.kind!r}")
        if item.vector.dim != self.dim:
            raise DimensionMismatch(
                f"vector dim {item.vector.dim} != index dim {self.dim}"
            )
        if float(np.linalg.norm(item.vector.values)) == 0.0:
            raise ZeroNormVector("zero-norm vectors are not retrievable")
        key = (item.video_id, item.kind, item.ordinal)
        existing = self._items.get(key)
        if existing is not None:
            if existing != item.vector:
                raise ConflictingDuplicate(f"{key} already stored with a different vector")
            return
        self._items[key] = item.vector

    def items(self) -> Iterable[IndexedItem]:
        for (video_id, kind, ordinal), vec in self._items.items():
            yield IndexedItem(video_id, kind, ordinal, vec)

    def get(self, video_id: str, kind: str, ordinal: int) -> EmbeddingVector | None:
        return self._items.get((video_id, kind, ordinal))

    def ordinals(self, video_id: str, kind: str) -> list[int]:
        return sorted(
            o for (vid, k, o) in self._items if vid == video_id and k == kind
        )

    def top_n(
        self, query: EmbeddingVector, kind: str, n: int, video_id: str
    ) -> list[ScoredItem]:
        """The n highest-similarity items of one kind, descending.

        Ties break toward the lower ordinal so runs are reproducible.
        Returns fewer than n when the index holds fewer.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        if query.dim != self.dim:
            raise DimensionMismatch(f"query dim {query.dim} != index dim {self.dim}")
        entries = [
            (o, vec)
            for (vid, k, o), vec in self._items.items()
            if vid == video_id and k == kind
        ]
        if not entries:
            raise EmptyIndexForKind(f"no {kind} items indexed for video {video_id!r}")
        entries.sort(key=lambda e: e[0])
        matrix = np.stack([vec.values for _, vec in entries]).astype(np.float64)
        qv = query.values.astype(np.float64)
        qn = float(np.linalg.norm(qv))
        if qn == 0.0:
            raise ZeroNormVector("zero-norm query")
        sims = (matrix @ qv) / (np.linalg.norm(matrix, axis=1) * qn)
        sims = np.clip(sims, -1.0, 1.0)
        order = sorted(range(len(entries)), key=lambda i: (-sims[i], entries[i][0]))
        return [
            ScoredItem(entries[i][0], float(sims[i])) for i in order[: min(n, len(order))]
        ]

    def retrieve(
        self, query: EmbeddingVector, video_id: str, n: int
    ) -> RetrievalResult:
        """Independent frame and transcript top-n for one query.

        Raises EmptyIndexForKind only when the video has no items of either
        kind; a single missing kind degrades to an empty id set.
        """
        frames: list[ScoredItem] = []
        transcripts: list[ScoredItem] = []
        missing = 0
        try:
            frames = self.top_n(query, KIND_FRAME, n, video_id)
        except EmptyIndexForKind:
            missing += 1
        try:
            transcripts = self.top_n(query, KIND_TRANSCRIPT, n, video_id)
        except EmptyIndexForKind:
            missing += 1
        if missing == 2:
            raise EmptyIndexForKind(f"no items indexed for video {video_id!r}")
        scores: dict[tuple[str, int], float] = {}
        for it in frames:
            scores[(KIND_FRAME, it.ordinal)] = it.score
        for it in transcripts:
            scores[(KIND_TRANSCRIPT, it.ordinal)] = it.score
        return RetrievalResult(
            top_frame=frames[0].ordinal if frames else None,
            top_transcript=transcripts[0].ordinal if transcripts else None,
            frame_set=[it.ordinal for it in frames],
            transcript_set=[it.ordinal for it in transcripts],
            scores=scores,
        )

    def local_frame_window(self, i_star: int, video_id: str) -> list[int]:
        """{i*-1, i*, i*+1} clamped to the video's frame range, ascending."""
        ordinals = set(self.ordinals(video_id, KIND_FRAME))
        if i_star not in ordinals:
            raise UnknownFrame(f"frame {i_star} not indexed for video {video_id!r}")
        return [i for i in (i_star - 1, i_star, i_star + 1) if i in ordinals]

    # --- persistence ------------------------------------------------------
    #
    # Layout: magic "VQIX", u16 version, u32 dim, u32 item count, then per
    # item: u16 video_id length + utf8 bytes, u8 kind code, u32 ordinal,
    # dim little-endian float32 components; trailing u32 CRC32 of everything
    # before it.

    def save(self, path: str | Path) -> None:
        out = bytearray()
        out += struct.pack("<4sHII", _MAGIC, _FORMAT_VERSION, self.dim, len(self._items))
        for (video_id, kind, ordinal) in sorted(self._items):
            vec = self._items[(video_id, kind, ordinal)]
            vid_bytes = video_id.encode("utf-8")
            out += struct.pack("<H", len(vid_bytes))
            out += vid_bytes
            out += struct.pack("<BI", _KIND_CODES[kind], ordinal)
            out += vec.values.astype("<f4").tobytes()
        out += struct.pack("<I", zlib.crc32(bytes(out)))
        Path(path).write_bytes(bytes(out))

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingIndex":
        blob = Path(path).read_bytes()
        header_size = struct.calcsize("<4sHII")
        if len(blob) < header_size + 4:
            raise CorruptIndexFile("file too short")
        magic, version, dim, count = struct.unpack_from("<4sHII", blob, 0)
        if magic != _MAGIC:
            raise CorruptIndexFile("bad magic bytes")
        if version != _FORMAT_VERSION:
            raise VersionMismatch(f"format version {version}, expected {_FORMAT_VERSION}")
        body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
        if zlib.crc32(body) != stored_crc:
            raise CorruptIndexFile("checksum mismatch")
        index = cls(dim)
        offset = header_size
        for _ in range(count):
            try:
                (vid_len,) = struct.unpack_from("<H", body, offset)
                offset += 2
                video_id = body[offset : offset + vid_len].decode("utf-8")
                offset += vid_len
                kind_code, ordinal = struct.unpack_from("<BI", body, offset)
                offset += 5
                comps = np.frombuffer(body, dtype="<f4", count=dim, offset=offset)
                offset += 4 * dim
            except (struct.error, ValueError) as exc:
                raise CorruptIndexFile(f"truncated item table: {exc}") from exc
            if kind_code not in _CODE_KINDS:
                raise CorruptIndexFile(f"unknown kind code {kind_code}")
            index._items[(video_id, _CODE_KINDS[kind_code], ordinal)] = EmbeddingVector(
                comps
            )
        if offset != len(body):
            raise CorruptIndexFile("trailing bytes after item table")
        return index
