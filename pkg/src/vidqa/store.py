"""On-disk artifact store: one directory per video_id.

Layout under the store root:

    <video_id>/asset.json     ingested segments + frames
    <video_id>/index.bin      embedding index
    <video_id>/summary.txt    persisted global summary (human-readable)
    <video_id>/traces/        one trace file per asked question
    reports/                  evaluation outputs

Cache invalidation is deletion: re-ingesting wholesale replaces the
directory contents. Writes go through a temp file + rename so readers
never see partial documents; summary writes are serialized per video.
"""

from __future__ import annotations

import hashlib
import json
import threading
from collections import defaultdict
from pathlib import Path

from .index import EmbeddingIndex
from .ingest import VideoAsset
from .orchestrator import AgentTrace, iteration_to_dict
from .summary import GlobalSummary, summary_from_text, summary_to_text


def _atomic_write(path: Path, data: str | bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    if isinstance(data, bytes):
        tmp.write_bytes(data)
    else:
        tmp.write_text(data, encoding="utf-8")
    tmp.replace(path)


class VideoStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._summary_locks: defaultdict[str, threading.Lock] = defaultdict(
            threading.Lock
        )

    def video_dir(self, video_id: str) -> Path:
        return self.root / video_id

    # --- asset ------------------------------------------------------------

    def has_asset(self, video_id: str) -> bool:
        return (self.video_dir(video_id) / "asset.json").exists()

    def save_asset(self, asset: VideoAsset) -> Path:
        path = self.video_dir(asset.video_id) / "asset.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        _atomic_write(path, json.dumps(asset.to_dict(), indent=2) + "\n")
        return path

    def load_asset(self, video_id: str) -> VideoAsset:
        path = self.video_dir(video_id) / "asset.json"
        return VideoAsset.from_dict(json.loads(path.read_text(encoding="utf-8")))

    # --- index --------------------------------------------------------------

    def index_path(self, video_id: str) -> Path:
        return self.video_dir(video_id) / "index.bin"

    def save_index(self, video_id: str, index: EmbeddingIndex) -> Path:
        path = self.index_path(video_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        index.save(path)
        return path

    def load_index(self, video_id: str) -> EmbeddingIndex:
        return EmbeddingIndex.load(self.index_path(video_id))

    # --- summary -------------------------------------------------------------

    def has_summary(self, video_id: str) -> bool:
        return (self.video_dir(video_id) / "summary.txt").exists()

    def save_summary(self, summary: GlobalSummary) -> Path:
        path = self.video_dir(summary.video_id) / "summary.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._summary_locks[summary.video_id]:
            _atomic_write(path, summary_to_text(summary))
        return path

    def load_summary(self, video_id: str) -> GlobalSummary | None:
        path = self.video_dir(video_id) / "summary.txt"
        if not path.exists():
            return None
        return summary_from_text(path.read_text(encoding="utf-8"))

    # --- traces -----------------------------------------------------------

    def write_ask_trace(self, trace: AgentTrace, video_id: str) -> Path:
        """One line-delimited record per loop iteration, deterministic name."""
        key = hashlib.sha256(
            f"{trace.question_id}|{trace.variant}".encode("utf-8")
        ).hexdigest()[:16]
        path = self.video_dir(video_id) / "traces" / f"{key}.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        head = {
            "question_id": trace.question_id,
            "variant": trace.variant,
            "final_index": trace.final.chosen_index,
            "backend_call_count": trace.backend_call_count,
            "embed_call_count": trace.embed_call_count,
        }
        lines = [json.dumps(head, sort_keys=False)]
        lines += [
            json.dumps(iteration_to_dict(it), sort_keys=False)
            for it in trace.iterations
        ]
        _atomic_write(path, "\n".join(lines) + "\n")
        return path

    def reports_dir(self) -> Path:
        path = self.root / "reports"
        path.mkdir(parents=True, exist_ok=True)
        return path
