#!/usr/bin/env python3
"""Regenerate the bundled test fixtures under tests/data/.

Everything here is deterministic (seeded RNG, no wall-clock content) so
reruns produce byte-identical fixtures. The demo-video mock script is
derived from the package's own batch planner so summary rules always match
the batches the engine will actually send.
"""

from __future__ import annotations

import json
import random
import re
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"
sys.path.insert(0, str(ROOT / "src"))


def ts(ms: int) -> str:
    s, msec = divmod(ms, 1000)
    m, sec = divmod(s, 60)
    h, mi = divmod(m, 60)
    return f"{h:02d}:{mi:02d}:{sec:02d}.{msec:03d}"


def cue(start_ms: int, end_ms: int, text: str) -> str:
    return f"{ts(start_ms)} --> {ts(end_ms)}\n{text}\n"


# --- WEBVTT corpus ---------------------------------------------------------

CONTEXT_WINDOW = 7600

WORDS = (
    "ranger river cabin picnic map lantern storm canoe trail badge honey "
    "bridge meadow whistle rope camp fire bear cliff valley echo"
).split()


def corpus_files(rng: random.Random) -> dict[str, str]:
    files: dict[str, str] = {}

    # f00: the 20-cue hand-checkable fixture (simple single-line payloads)
    cues = []
    t = 1000
    for k in range(20):
        dur = 1500 + 250 * (k % 4)
        text = f"Cue {k}: the {WORDS[k]} appears"
        cues.append(cue(t, t + dur, text))
        t += dur + 500
    files["f00_twenty_cues.vtt"] = "WEBVTT\n\n" + "\n".join(cues)

    # f01: multi-line payloads (joined with single spaces on parse)
    files["f01_multiline.vtt"] = (
        "WEBVTT\n\n"
        + cue(0, 2000, "First line\nsecond line\nthird line")
        + "\n"
        + cue(2000, 4000, "Another\ncue")
    )

    # f02: cue identifiers
    files["f02_identifiers.vtt"] = (
        "WEBVTT\n\n"
        "intro\n" + cue(500, 2500, "Named cue one") + "\n"
        "chapter-2\n" + cue(3000, 5000, "Named cue two")
    )

    # f03: NOTE blocks
    files["f03_notes.vtt"] = (
        "WEBVTT\n\n"
        "NOTE this block is commentary\nspanning two lines\n\n"
        + cue(1000, 2000, "Visible text")
        + "\nNOTE another note\n\n"
        + cue(2000, 3200, "More visible text")
    )

    # f04: inline styling tags are stripped
    files["f04_styling.vtt"] = (
        "WEBVTT\n\n"
        + cue(0, 1500, "<b>Bold</b> and <i>italic</i> words")
        + "\n"
        + cue(1500, 3000, "<c.yellow>Colored</c> caption")
    )

    # f05: short-form MM:SS.mmm timings
    files["f05_shortform.vtt"] = (
        "WEBVTT\n\n"
        "00:01.000 --> 00:03.250\nShort form one\n\n"
        "01:10.500 --> 01:12.000\nShort form two\n"
    )

    # f06: overlapping cues are permitted
    files["f06_overlap.vtt"] = (
        "WEBVTT\n\n"
        + cue(1000, 5000, "Long background caption")
        + "\n"
        + cue(2000, 3000, "Overlapping insert")
        + "\n"
        + cue(2000, 4000, "Second overlap, same start")
    )

    # f07: cue settings after the end timestamp
    files["f07_settings.vtt"] = (
        "WEBVTT\n\n"
        "00:00:01.000 --> 00:00:02.000 align:start position:0%\nPositioned cue\n\n"
        "00:00:02.000 --> 00:00:03.000 line:63%\nAnother positioned cue\n"
    )

    # f08: header with trailing text
    files["f08_header_text.vtt"] = (
        "WEBVTT - generated by a caption tool\n\n" + cue(0, 1000, "Header variant")
    )

    # f09: cues out of order (parser sorts by start)
    files["f09_unsorted.vtt"] = (
        "WEBVTT\n\n"
        + cue(4000, 5000, "Third in time")
        + "\n"
        + cue(0, 1000, "First in time")
        + "\n"
        + cue(2000, 3000, "Second in time")
    )

    # f10: STYLE block
    files["f10_style_block.vtt"] = (
        "WEBVTT\n\n"
        "STYLE\n::cue { color: lime }\n\n" + cue(500, 1500, "Styled file")
    )

    # f11: unicode payloads
    files["f11_unicode.vtt"] = (
        "WEBVTT\n\n"
        + cue(0, 2000, "Café au lait — délicieux")
        + "\n"
        + cue(2000, 4000, "字幕测试 emoji \U0001f3a5")
    )

    # f12: extra blank lines
    files["f12_blanky.vtt"] = (
        "WEBVTT\n\n\n\n" + cue(100, 900, "Sparse one") + "\n\n\n" + cue(1000, 1900, "Sparse two") + "\n\n"
    )

    # f13: long payload
    long_text = " ".join(rng.choice(WORDS) for _ in range(60))
    files["f13_long.vtt"] = "WEBVTT\n\n" + cue(0, 9000, long_text)

    # f14: millisecond edges
    files["f14_ms_edges.vtt"] = (
        "WEBVTT\n\n"
        "00:00:00.001 --> 00:00:00.999\nOne millisecond in\n\n"
        "00:00:00.999 --> 00:00:01.001\nTwo milliseconds long\n"
    )

    # f15: hour-scale timings
    files["f15_hours.vtt"] = (
        "WEBVTT\n\n"
        "01:02:03.456 --> 01:02:05.000\nAfter an hour\n\n"
        "10:00:00.000 --> 10:00:02.500\nTen hours in\n"
    )

    # f16: a bit of everything
    files["f16_mixed.vtt"] = (
        "WEBVTT - mixed sample\n\n"
        "NOTE mixed fixture\n\n"
        "id-1\n00:01.000 --> 00:02.000\n<i>Styled</i> short form\n\n"
        + cue(3000, 4000, "Plain cue")
        + "\n"
        + cue(3500, 4500, "Overlap cue")
    )

    # f17: empty-payload cue is skipped
    files["f17_empty_payload.vtt"] = (
        "WEBVTT\n\n"
        "00:00:01.000 --> 00:00:02.000\n\n\n"
        + cue(2000, 3000, "Survivor cue")
    )

    # f18: REGION block
    files["f18_region.vtt"] = (
        "WEBVTT\n\n"
        "REGION\nid:speaker width:40%\n\n" + cue(0, 1200, "Region file")
    )

    # f19: three-digit hours
    files["f19_big_hours.vtt"] = (
        "WEBVTT\n\n"
        "100:00:00.000 --> 100:00:01.500\nMarathon stream\n"
    )

    assert len(files) == 20
    return files


MALFORMED = {
    "missing_header.vtt": "00:00:01.000 --> 00:00:02.000\nNo header\n",
    "bad_timestamp_digits.vtt": "WEBVTT\n\n00:00:1.000 --> 00:00:02.000\nBad digits\n",
    "bad_timestamp_comma.vtt": "WEBVTT\n\n00:00:01,000 --> 00:00:02.000\nComma decimal\n",
    "zero_length_cue.vtt": "WEBVTT\n\n00:00:01.000 --> 00:00:01.000\nX\n",
    "reversed_cue.vtt": "WEBVTT\n\n00:00:05.000 --> 00:00:02.000\nBackwards\n",
}


def write_vtt_fixtures() -> None:
    rng = random.Random(7)
    corpus_dir = DATA / "vtt_corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for name, content in corpus_files(rng).items():
        (corpus_dir / name).write_text(content, encoding="utf-8")
    bad_dir = DATA / "vtt_malformed"
    bad_dir.mkdir(parents=True, exist_ok=True)
    for name, content in MALFORMED.items():
        (bad_dir / name).write_text(content, encoding="utf-8")


def write_manifest_fixture() -> None:
    rng = random.Random(11)
    stamps = rng.sample(range(0, 600_000, 250), 50)  # unique, unsorted
    lines = [
        json.dumps({"timestamp_ms": t, "image_ref": f"frames/frame_{i:04d}.jpg"})
        for i, t in enumerate(stamps)
    ]
    (DATA / "frames_50.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- demo video + eval fixtures ---------------------------------------------
#
# One synthetic 96-second video ("demo"): 24 contiguous 4 s cues and a frame
# every 2 s. The eval mock script is built around four question roles:
#   easy    every variant answers the gold label
#   digest  wrong at baseline, right once the summary digest is in the prompt
#   agent   right only when a planned term_frequency fragment is present
#   loop    answers "not enough information" until a rethink directive makes
#           the planner fetch temporal anchors
# which yields strictly increasing fixture accuracy across the four variants.

SENTENCES = [
    "Yogi sniffs around the picnic baskets near the gate",
    "Ranger Smith checks the morning patrol roster",
    "Yogi grabs a honey jar and hides it under his green hat",
    "a camper asks Ranger Smith about the canoe rental",
    "Yogi and Boo Boo share the honey by the river",
    "Ranger Smith finds muddy paw prints on the trail",
    "the confrontation at the bridge begins as Ranger Smith blocks Yogi",
    "Yogi promises to return every honey jar he took",
    "storm clouds gather over the valley while campers pack up",
    "Ranger Smith hands out lanterns before the storm over the valley hits",
    "rain drums on the cabin roof as Yogi waits inside",
    "the storm passes and the valley clears by noon",
    "the canoe race finish line is painted across the river",
    "Yogi paddles hard and wins the canoe race by a nose",
    "Ranger Smith awards a tiny badge at the canoe race finish",
    "campers cheer and the loudspeaker echoes across the meadow",
    "preparations begin for the lantern ceremony at dusk",
    "Yogi helps string lanterns between the pines",
    "the lantern ceremony glows as every light floats upward",
    "Ranger Smith thanks Yogi in front of the campers",
    "an old map reveal surprises everyone at the campfire",
    "the map reveal shows a honey cache behind the waterfall",
    "Yogi and Ranger Smith agree to split the last honey jar",
    "the park quiets down and the campfire fades to embers",
]

CLUSTERS = [
    # (start_s, end_s, title, summary, characters, background, frame_refs)
    (0, 16, "Yogi raids the picnic area",
     "Yogi sneaks honey from the baskets while Ranger Smith starts patrol.",
     "Yogi: the bear wearing a green hat and white collar; "
     "Ranger Smith: the park ranger in a brown uniform and flat hat",
     "sunny picnic area near the park gate", [0, 4, 6]),
    (16, 32, "The confrontation at the bridge",
     "Ranger Smith blocks the bridge and the confrontation with Yogi plays out.",
     "Yogi: the bear wearing a green hat and white collar; "
     "Ranger Smith: the park ranger in a brown uniform and flat hat",
     "wooden footbridge over the river", [9, 12, 15]),
    (32, 48, "Storm over the valley",
     "A storm over the valley sends campers to shelter with lanterns.",
     "Ranger Smith: the park ranger in a brown uniform and flat hat",
     "dark clouds above the campground", [17, 20, 23]),
    (48, 64, "The canoe race finish",
     "Yogi wins the canoe race finish and earns a tiny badge.",
     "Yogi: the bear wearing a green hat and white collar",
     "river course marked with buoys", [25, 28, 31]),
    (64, 80, "The lantern ceremony",
     "The lantern ceremony lights the meadow as thanks are exchanged.",
     "Yogi: the bear wearing a green hat and white collar; "
     "Ranger Smith: the park ranger in a brown uniform and flat hat",
     "meadow at dusk strung with lanterns", [33, 36, 39]),
    (80, 96, "The map reveal at the campfire",
     "An old map reveal points to a honey cache behind the waterfall.",
     "Yogi: the bear wearing a green hat and white collar",
     "campfire circle under the stars", [41, 44, 47]),
]

# (question_id, category, role, unique snippet, question text, gold, options)
# The snippet is a phrase unique to the question; mock rules key on it.
QUESTIONS = [
    ("q01", "Character and Relationship Dynamics", "easy", "park hierarchy",
     "How do Yogi and Ranger Smith relate in the park hierarchy?", 2,
     ["They are rival rangers", "Ranger supervises the park Yogi lives in",
      "They are brothers", "They never meet", "Yogi employs the ranger"]),
    ("q02", "Character and Relationship Dynamics", "easy", "honey jar promise",
     "What does Yogi's honey jar promise commit him to?", 3,
     ["Leaving the park", "Buying new baskets", "Returning every jar he took",
      "Guarding the bridge", "Joining the patrol"]),
    ("q03", "Character and Relationship Dynamics", "digest", "white collar detail",
     "Which white collar detail distinguishes Yogi's outfit?", 4,
     ["A red scarf", "A blue vest", "A straw boater",
      "A green hat with white collar", "A ranger badge"]),
    ("q04", "Character and Relationship Dynamics", "agent", "paw print count",
     "What does the paw print count on the trail suggest about visits?", 1,
     ["Repeated bear visits", "A single deer", "No recent activity",
      "Camper footprints", "Raccoon tracks"]),
    ("q05", "Character and Relationship Dynamics", "loop", "apology order",
     "In what apology order do Yogi and Ranger Smith reconcile?", 5,
     ["Ranger first, then Yogi", "Simultaneously", "Through Boo Boo",
      "By written note", "Yogi promises returns, then the ranger thanks him"]),
    ("q06", "Narrative and Plot Analysis", "easy", "cache location twist",
     "What is the cache location twist at the campfire?", 1,
     ["A honey cache behind the waterfall", "A second map", "A hidden canoe",
      "A buried lantern", "An empty chest"]),
    ("q07", "Narrative and Plot Analysis", "easy", "storm aftermath",
     "What marks the storm aftermath by noon?", 2,
     ["Flooded cabins", "The valley clears", "A cancelled race",
      "Broken lanterns", "A closed gate"]),
    ("q08", "Narrative and Plot Analysis", "digest", "opening theft",
     "How does the opening theft set up the plot?", 5,
     ["It cancels the ceremony", "It starts the storm", "It breaks the bridge",
      "It ends the patrol", "Yogi's honey grab triggers the chase"]),
    ("q09", "Narrative and Plot Analysis", "agent", "jar mention tally",
     "What does a jar mention tally across the transcript indicate?", 3,
     ["Jars are never mentioned", "One mention only", "Honey jars recur as a motif",
      "Only the ranger says it", "It appears once at the end"]),
    ("q10", "Narrative and Plot Analysis", "loop", "resolution sequence",
     "What is the correct resolution sequence of the final scenes?", 4,
     ["Race, storm, ceremony", "Ceremony before the storm", "Map before the race",
      "Ceremony, then the map reveal", "Storm after the campfire"]),
    ("q11", "Setting and Technical Analysis", "easy", "bridge material",
     "What bridge material does the crossing use?", 3,
     ["Steel girders", "Rope only", "Wooden planks", "Stone arches", "Bamboo"]),
    ("q12", "Setting and Technical Analysis", "easy", "race course markers",
     "What race course markers line the river?", 4,
     ["Flags", "Ropes", "Cones", "Buoys", "Lanterns"]),
    ("q13", "Setting and Technical Analysis", "digest", "dusk lighting",
     "What dusk lighting fills the meadow for the ceremony?", 3,
     ["Torches", "Fireflies", "Strung lanterns", "Floodlights", "Headlights"]),
    ("q14", "Setting and Technical Analysis", "agent", "shelter usage",
     "What shelter usage pattern appears during the storm?", 5,
     ["Tents only", "The gatehouse", "Canoes flipped over", "The bridge",
      "Campers gather in the cabin"]),
    ("q15", "Setting and Technical Analysis", "loop", "waterfall approach",
     "What is the waterfall approach to the honey cache?", 1,
     ["Behind the waterfall", "Under the bridge", "Across the meadow",
      "Past the gate", "Along the roster"]),
    ("q16", "Temporal", "easy", "badge moment",
     "When does the badge moment happen relative to the race?", 2,
     ["Before the start", "Right after the finish", "During the storm",
      "At the campfire", "Before dawn"]),
    ("q17", "Temporal", "easy", "rain timing",
     "What is the rain timing relative to the lantern handout?", 1,
     ["Rain follows the handout", "Rain precedes it", "Simultaneous",
      "No rain occurs", "Rain during the race"]),
    ("q18", "Temporal", "digest", "first cluster span",
     "Which first cluster span covers the picnic raid?", 3,
     ["32-48 s", "16-32 s", "0-16 s", "48-64 s", "80-96 s"]),
    ("q19", "Temporal", "agent", "honey say count",
     "What is the honey say count across the transcript?", 3,
     ["Zero", "One", "Six", "Three", "Twelve"]),
    ("q20", "Temporal", "loop", "confrontation timing",
     "What confrontation timing anchors the bridge scene?", 2,
     ["Around 80 s", "Around 16-32 s", "Around 60 s", "At the very start",
      "After the ceremony"]),
    ("q21", "Theme Exploration", "easy", "sharing motif",
     "What sharing motif closes the story?", 5,
     ["Racing alone", "Hiding food", "Closing the park", "Storm fear",
      "Splitting the last honey jar"]),
    ("q22", "Theme Exploration", "easy", "community tone",
     "What community tone do the campers set at the race?", 1,
     ["Cheering support", "Indifference", "Hostility", "Silence", "Mockery"]),
    ("q23", "Theme Exploration", "digest", "forgiveness arc",
     "How does the forgiveness arc resolve between the pair?", 4,
     ["It never resolves", "With a fine", "By banishment",
      "Public thanks at the ceremony", "With a rematch"]),
    ("q24", "Theme Exploration", "agent", "gratitude signal",
     "What gratitude signal does the ranger give publicly?", 3,
     ["A salute", "A letter", "Thanks in front of the campers", "A refund",
      "A trophy"]),
    ("q25", "Theme Exploration", "loop", "ceremony symbolism",
     "What ceremony symbolism do the floating lights carry?", 5,
     ["Warning of storms", "Race victory", "Park closing", "Harvest time",
      "Shared gratitude rising together"]),
]

WRONG_BASE = {"digest": "2", "agent": "4", "loop": "6"}

LOOP_EVENTS = {
    "q05": "Yogi promises to return the honey",
    "q10": "the map reveal at the campfire",
    "q15": "honey cache behind the waterfall",
    "q20": "the confrontation at the bridge",
    "q25": "the lantern ceremony",
}

AGENT_TERMS = {
    "q04": "paw prints",
    "q09": "honey jar",
    "q14": "cabin",
    "q19": "honey",
    "q24": "thanks",
}


def demo_asset():
    from vidqa.ingest import FrameRecord, TranscriptSegment, VideoAsset

    segments = [
        TranscriptSegment(j, 4000 * j, 4000 * (j + 1), f"Scene {j}: {SENTENCES[j]}.")
        for j in range(24)
    ]
    frames = [
        FrameRecord(i, 2000 * i, f"demo/frame_{i:03d}.jpg") for i in range(49)
    ]
    return VideoAsset.assemble("demo", segments, frames)


def cluster_block(start_s, end_s, title, summary, characters, background, refs) -> str:
    return "\n".join(
        [
            f"Start timestamp: {start_s:.3f}",
            f"End timestamp: {end_s:.3f}",
            f"Topic Title: {title}",
            f"Short summary of the topic: {summary}",
            f"Character Descriptions: {characters}",
            f"Background Descriptions: {background}",
            "Referenced Video Frames: " + ", ".join(str(r) for r in refs),
        ]
    )


def write_demo_video() -> None:
    from vidqa.ingest import serialize_webvtt, write_frame_manifest
    from vidqa.summary import plan_batches

    asset = demo_asset()
    (DATA / "demo.vtt").write_text(serialize_webvtt(asset.segments), encoding="utf-8")
    write_frame_manifest(asset.frames, DATA / "demo_frames.jsonl")

    # pick a context window whose 70% budget splits the demo into 3 batches
    context_window = CONTEXT_WINDOW
    budget = int(context_window * 0.7)
    batches = plan_batches(asset, budget)
    assert len(batches) == 3, f"expected 3 batches, planner produced {len(batches)}"
    (DATA / "eval_meta.json").write_text(
        json.dumps(
            {
                "context_window": context_window,
                "batches": len(batches),
                "batch_first_segments": [b.segments[0].segment_id for b in batches],
                "expected_accuracy": {
                    "baseline": 40.0, "+summary": 60.0, "+agent": 80.0, "full": 100.0,
                },
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def eval_rules() -> list[dict]:
    from vidqa.summary import plan_batches

    asset = demo_asset()
    batches = plan_batches(asset, int(CONTEXT_WINDOW * 0.7))
    rules: list[dict] = []

    # summary batches: match the first scene number unique to each batch
    per_batch: list[list[tuple]] = [[] for _ in batches]
    boundaries = [b.segments[0].start for b in batches[1:]] + [float("inf")]
    for entry in CLUSTERS:
        idx = next(i for i, bound in enumerate(boundaries) if entry[1] <= bound)
        per_batch[idx].append(entry)
    assert all(per_batch), "every batch needs at least one scripted cluster"
    for k, batch in enumerate(batches):
        marker = f"Scene {batch.segments[0].segment_id}:"
        response = "\n\n".join(cluster_block(*c) for c in per_batch[k])
        rules.append(
            {"pattern": f"(?s)Topic Clustering.*{re.escape(marker)}", "response": response}
        )

    # plan rules: loop questions plan anchors only once a directive names the event
    for qid, event in LOOP_EVENTS.items():
        rules.append(
            {
                "pattern": f"(?s)JSON array.*locate {re.escape(event)}",
                "response": json.dumps(
                    [{"function": "extract_temporal_anchors", "arguments": {"event": event}}]
                ),
            }
        )
    # plan rules: agent questions always plan a term count
    snippet_of = {q[0]: q[3] for q in QUESTIONS}
    for qid, term in AGENT_TERMS.items():
        rules.append(
            {
                "pattern": f"(?s)JSON array.*{re.escape(snippet_of[qid])}",
                "response": json.dumps(
                    [{"function": "term_frequency", "arguments": {"term": term}}]
                ),
            }
        )
    rules.append({"pattern": "JSON array", "response": "NONE"})

    # verdict rules: an insufficiency answer on a loop question gets a directive
    for qid, event in LOOP_EVENTS.items():
        rules.append(
            {
                "pattern": (
                    f"(?s)VERDICT.*{re.escape(snippet_of[qid])}.*Chosen answer: 6"
                ),
                "response": (
                    "VERDICT: inadequate\n"
                    f"DIAGNOSIS: missing timing of {event}\n"
                    f"DIRECTIVE: locate {event}\n"
                    "FUNCTIONS: extract_temporal_anchors"
                ),
            }
        )
    rules.append({"pattern": "VERDICT", "response": "VERDICT: adequate"})

    # answer rules: specific evidence-dependent rules first, then base answers
    for qid, category, role, snippet, text, gold, options in QUESTIONS:
        esc = re.escape(snippet)
        if role == "loop":
            rules.append(
                {
                    "pattern": f"(?s){esc}.*extract_temporal_anchors.*single digit",
                    "response": str(gold),
                }
            )
        elif role == "agent":
            rules.append(
                {
                    "pattern": f"(?s){esc}.*term_frequency.*single digit",
                    "response": str(gold),
                }
            )
        elif role == "digest":
            rules.append(
                {
                    "pattern": f"(?s)Video summary digest.*{esc}.*single digit",
                    "response": str(gold),
                }
            )
    for qid, category, role, snippet, text, gold, options in QUESTIONS:
        esc = re.escape(snippet)
        base = str(gold) if role == "easy" else WRONG_BASE[role]
        rules.append({"pattern": f"(?s){esc}.*single digit", "response": base})

    rules.append({"pattern": ".*", "response": "1"})
    return rules


def write_eval_fixtures() -> None:
    lines = []
    for qid, category, role, snippet, text, gold, options in QUESTIONS:
        assert snippet in text, f"snippet {snippet!r} missing from {qid}"
        assert str(gold) != WRONG_BASE.get(role), f"{qid}: wrong answer equals gold"
        lines.append(
            json.dumps(
                {
                    "question_id": qid,
                    "question": text,
                    "options": options,
                    "gold_index": gold,
                    "category": category,
                    "video_id": "demo",
                }
            )
        )
    (DATA / "eval_dataset.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (DATA / "eval_mock_script.json").write_text(
        json.dumps({"rules": eval_rules()}, indent=2) + "\n", encoding="utf-8"
    )


def write_metric_fixture() -> None:
    # gold rows 1..5, 12 records each; 45 on the diagonal -> accuracy 75%
    matrix = {
        1: {1: 9, 2: 1, 3: 1, 6: 1},
        2: {2: 8, 1: 2, 4: 1, 6: 1},
        3: {3: 10, 5: 2},
        4: {4: 7, 3: 3, 2: 1, 6: 1},
        5: {5: 11, 1: 1},
    }
    categories = [
        "Character and Relationship Dynamics",
        "Narrative and Plot Analysis",
        "Setting and Technical Analysis",
        "Temporal",
        "Theme Exploration",
    ]
    records = []
    n = 0
    for gold, row in matrix.items():
        for chosen, count in row.items():
            for _ in range(count):
                records.append(
                    {
                        "question_id": f"m{n:02d}",
                        "category": categories[n % 5],
                        "variant": "full",
                        "chosen_index": chosen,
                        "gold_index": gold,
                    }
                )
                n += 1
    assert n == 60
    payload = {"records": records, "matrix": {str(g): r for g, r in matrix.items()}}
    (DATA / "metric_fixture_60.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    write_vtt_fixtures()
    write_manifest_fixture()
    write_demo_video()
    write_eval_fixtures()
    write_metric_fixture()
    print(f"fixtures written under {DATA}")


if __name__ == "__main__":
    main()

