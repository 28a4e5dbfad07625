"""Command-line entry point: ingest, summarize, ask, eval.

Configuration precedence is flags > environment (VIDQA_*) > --config file
> defaults. All commands are deterministic under mock backends and a
fixed seed.

Exit codes: 0 success, 1 engine/config error, 2 usage error (argparse),
3 answer-label parse failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .backend import CountingBackend, make_backend
from .config import EngineConfig, VARIANTS, resolve_config
from .errors import EngineError, LabelParseFailure
from .evaluation import load_dataset, run_eval, traces_to_jsonl
from .index import KIND_FRAME, KIND_TRANSCRIPT, EmbeddingIndex, IndexedItem
from .ingest import (
    VideoAsset,
    load_frame_manifest,
    parse_webvtt,
    sample_frames,
)
from .orchestrator import Question, answer_with_variant
from .store import VideoStore
from .summary import build_global_summary

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LABEL_PARSE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vidqa",
        description="Agentic video question answering over transcripts and frames.",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--store", type=Path, help="artifact store directory")
    parser.add_argument("--backend-profile", help="backend profile name")
    parser.add_argument("--seed", type=int, help="deterministic seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse, embed, and index one video")
    p_ingest.add_argument("video_id")
    p_ingest.add_argument("--vtt", type=Path, help="WEBVTT transcript file")
    p_ingest.add_argument("--frames", type=Path, help="frame manifest (JSONL)")
    p_ingest.add_argument("--extract", help="video file for the external extractor")
    p_ingest.add_argument("--duration", type=float, help="override duration (s)")
    p_ingest.add_argument("--force", action="store_true", help="replace an existing asset")

    p_sum = sub.add_parser("summarize", help="build or reuse the global summary")
    p_sum.add_argument("video_id")

    p_ask = sub.add_parser("ask", help="answer one multiple-choice question")
    p_ask.add_argument("video_id")
    p_ask.add_argument("question")
    p_ask.add_argument(
        "--options", nargs=5, required=True, metavar="OPT", help="the five options"
    )
    p_ask.add_argument("--variant", default="full", choices=VARIANTS)
    p_ask.add_argument("--question-id", default=None)
    p_ask.add_argument(
        "--category", default="Narrative and Plot Analysis", help="question category"
    )
    p_ask.add_argument("--gold-index", type=int, default=1, help="gold option (1-5)")

    p_eval = sub.add_parser("eval", help="run the ablation evaluation")
    p_eval.add_argument("dataset", type=Path)
    p_eval.add_argument(
        "--variants",
        default=",".join(VARIANTS),
        help="comma-separated variant list (default: all four)",
    )
    p_eval.add_argument("--out", type=Path, help="report directory (default: store/reports)")
    return parser


def _load_config(args: argparse.Namespace) -> EngineConfig:
    overrides = {
        "store_dir": args.store,
        "backend": args.backend_profile,
        "seed": args.seed,
    }
    return resolve_config(overrides, None, args.config)


def _make_backend(config: EngineConfig):
    return make_backend(config.active_profile(), config.embedding_dim, config.seed)


def _embed_asset(asset: VideoAsset, backend, dim: int) -> EmbeddingIndex:
    index = EmbeddingIndex(dim)
    for seg in asset.segments:
        index.insert(
            IndexedItem(
                asset.video_id, KIND_TRANSCRIPT, seg.segment_id,
                backend.embed_text(seg.text),
            )
        )
    for fr in asset.frames:
        index.insert(
            IndexedItem(
                asset.video_id, KIND_FRAME, fr.frame_id,
                backend.embed_image(fr.image_ref),
            )
        )
    return index


def _budget(config: EngineConfig, backend) -> int:
    return int(backend.profile.context_window * config.batch_budget_fraction)


def cmd_ingest(args: argparse.Namespace, config: EngineConfig) -> int:
    store = VideoStore(config.store_dir)
    if store.has_asset(args.video_id) and not args.force:
        print(
            f"error: video {args.video_id!r} is already ingested; "
            "pass --force to replace it",
            file=sys.stderr,
        )
        return EXIT_ERROR

    segments = []
    if args.vtt is not None:
        with open(args.vtt, encoding="utf-8") as fh:
            segments = parse_webvtt(fh)

    if args.frames is not None:
        with open(args.frames, encoding="utf-8") as fh:
            frames = load_frame_manifest(fh)
    elif args.extract is not None:
        frames = sample_frames(
            args.extract, config.sample_interval_s, config.extractor_template
        )
    else:
        frames = []
        if not segments:
            print(
                "error: nothing to ingest; pass --vtt and/or --frames "
                "(or --extract with a configured extractor)",
                file=sys.stderr,
            )
            return EXIT_ERROR

    asset = VideoAsset.assemble(args.video_id, segments, frames, args.duration)
    backend = _make_backend(config)
    index = _embed_asset(asset, backend, config.embedding_dim)
    store.save_asset(asset)
    store.save_index(args.video_id, index)
    print(
        f"ingested {args.video_id}: {len(segments)} segments, {len(frames)} frames, "
        f"{len(index)} indexed items"
    )
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace, config: EngineConfig) -> int:
    store = VideoStore(config.store_dir)
    if not store.has_asset(args.video_id):
        print(f"error: video {args.video_id!r} is not ingested", file=sys.stderr)
        return EXIT_ERROR
    asset = store.load_asset(args.video_id)
    backend = CountingBackend(_make_backend(config))
    summary = build_global_summary(
        asset,
        backend,
        _budget(config, backend),
        store=store,
        seam_tolerance_ms=round(config.seam_tolerance_s * 1000),
        image_token_cost=config.image_token_cost,
    )
    cached = " (cached)" if backend.chat_calls == 0 else ""
    span = f"{summary.clusters[0].start:.3f}-{summary.clusters[-1].end:.3f} s"
    print(f"summary for {args.video_id}: {len(summary.clusters)} clusters, {span}{cached}")
    return EXIT_OK


def cmd_ask(args: argparse.Namespace, config: EngineConfig) -> int:
    store = VideoStore(config.store_dir)
    if not store.has_asset(args.video_id):
        print(f"error: video {args.video_id!r} is not ingested", file=sys.stderr)
        return EXIT_ERROR
    asset = store.load_asset(args.video_id)
    index = store.load_index(args.video_id)
    summary = store.load_summary(args.video_id)
    backend = _make_backend(config)
    qid = hashlib.sha256(args.question.encode("utf-8")).hexdigest()[:12]
    question = Question(
        question_id=args.question_id or f"ask-{qid}",
        text=args.question,
        options=tuple(args.options) + ("Not enough information to answer.",),
        gold_index=args.gold_index,
        video_id=args.video_id,
        category=args.category,
    )
    try:
        record, trace = answer_with_variant(
            question,
            asset,
            index,
            summary,
            backend,
            args.variant,
            n=config.top_n,
            rethink_cap=config.rethink_cap,
            max_functions=config.max_functions_per_plan,
            anchor_score_floor=config.anchor_score_floor,
        )
    except LabelParseFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LABEL_PARSE
    path = store.write_ask_trace(trace, args.video_id)
    print(f"Answer: {record.chosen_index} - {question.options[record.chosen_index - 1]}")
    print(f"trace: {path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: EngineConfig) -> int:
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for variant in variants:
        if variant not in VARIANTS:
            print(f"error: unknown variant {variant!r}", file=sys.stderr)
            return EXIT_ERROR
    store = VideoStore(config.store_dir)
    questions = load_dataset(args.dataset)
    missing = sorted(
        {q.video_id for q in questions if not store.has_asset(q.video_id)}
    )
    if missing:
        print(f"error: videos not ingested: {', '.join(missing)}", file=sys.stderr)
        return EXIT_ERROR

    backend = _make_backend(config)
    assets = {vid: store.load_asset(vid) for vid in {q.video_id for q in questions}}
    indexes = {vid: store.load_index(vid) for vid in assets}
    summaries: dict[str, object] = {}

    def summary_for(video_id: str):
        if video_id not in summaries:
            summaries[video_id] = build_global_summary(
                assets[video_id],
                backend,
                _budget(config, backend),
                store=store,
                seam_tolerance_ms=round(config.seam_tolerance_s * 1000),
                image_token_cost=config.image_token_cost,
            )
        return summaries[video_id]

    needs_summary = any(v != "baseline" for v in variants)
    if needs_summary:
        for vid in assets:
            summary_for(vid)

    def answer(question: Question, variant: str):
        summary = summaries.get(question.video_id) if variant != "baseline" else None
        return answer_with_variant(
            question,
            assets[question.video_id],
            indexes[question.video_id],
            summary,
            backend,
            variant,
            n=config.top_n,
            rethink_cap=config.rethink_cap,
            max_functions=config.max_functions_per_plan,
            anchor_score_floor=config.anchor_score_floor,
        )

    report = run_eval(questions, variants, answer)
    out_dir = args.out if args.out is not None else store.reports_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.txt").write_text(report.render_text(), encoding="utf-8")
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "traces.jsonl").write_text(traces_to_jsonl(report.traces), encoding="utf-8")
    (out_dir / "timings.json").write_text(
        json.dumps(
            {
                "mean_wall_time_ms": {
                    k: round(v, 3) for k, v in sorted(report.mean_wall_time_ms.items())
                }
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    print(report.render_text())
    if report.failures:
        print(f"{len(report.failures)} cell(s) failed; see report.json", file=sys.stderr)
    print(f"reports written to {out_dir}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    handlers = {
        "ingest": cmd_ingest,
        "summarize": cmd_summarize,
        "ask": cmd_ask,
        "eval": cmd_eval,
    }
    try:
        return handlers[args.command](args, config)
    except EngineError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
