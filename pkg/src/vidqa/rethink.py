"""Critic stage: judge answer adequacy, emit a targeted retrieval directive.

The critic sees five inputs (question, refined query with its fragments,
global summary, local context, answer) and either accepts the answer or
returns an instruction for the next pre-retrieval pass. It never edits
answers.

Two termination guards keep the loop bounded: an unparseable verdict is
treated as adequate (fail-open), and the orchestrator caps iterations.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .backend import ChatRequest, TextPart
from .agent import FunctionRegistry, LocalContext, RefinedQuery
from .summary import GlobalSummary, summary_digest

logger = logging.getLogger("vidqa.rethink")

INSUFFICIENT_LABEL = 6

VERDICT_PROMPT = (
    "You are the review stage of a video question answering engine. Given "
    "the question, the refined query and gathered context, the video "
    "summary, the retrieved evidence, and the model's answer, judge "
    "whether the answer is adequately supported. Reply with exactly these "
    "lines:\n"
    "VERDICT: adequate or inadequate\n"
    "DIAGNOSIS: <the information gap, if any>\n"
    "DIRECTIVE: <what to retrieve or refine next>\n"
    "FUNCTIONS: <comma-separated function names to consider, or empty>"
)


@dataclass
class AnswerView:
    """The slice of an answer the critic needs (avoids importing the orchestrator)."""

    chosen_index: int
    chosen_text: str
    raw_text: str


@dataclass
class RethinkInput:
    query: str
    refined: RefinedQuery
    summary: GlobalSummary | None
    local: LocalContext
    answer: AnswerView


@dataclass
class RethinkInstruction:
    diagnosis: str
    directive: str
    suggested_functions: list[str] = field(default_factory=list)
    iteration: int = 1

    def __post_init__(self) -> None:
        if not self.directive.strip():
            raise ValueError("directive must be non-empty")
        if self.iteration < 1:
            raise ValueError("iteration must be >= 1")


_DEFAULT_DIRECTIVE = "gather additional evidence relevant to the question"


def render_verdict_prompt(input: RethinkInput, registry: FunctionRegistry) -> ChatRequest:
    parts: list[TextPart] = [TextPart(f"Question: {input.query}")]
    refined_lines = [f"Refined query: {input.refined.refined_text}"]
    for label, text in input.refined.context_fragments:
        refined_lines.append(f"- {label}: {text}")
    parts.append(TextPart("\n".join(refined_lines)))
    if input.summary is not None:
        parts.append(TextPart(summary_digest(input.summary)))
    evidence = ["Retrieved evidence:"]
    for seg, score in input.local.transcripts:
        evidence.append(f"[{seg.start:.3f}-{seg.end:.3f}] (score {score:.3f}) {seg.text}")
    for fr in input.local.frames:
        evidence.append(f"frame {fr.frame_id} at {fr.timestamp:.3f} s")
    for label, ts in input.local.anchors:
        evidence.append(f"anchor {label} at {ts:.3f} s")
    parts.append(TextPart("\n".join(evidence)))
    parts.append(
        TextPart(
            f"Chosen answer: {input.answer.chosen_index} "
            f"({input.answer.chosen_text})\nModel output: {input.answer.raw_text}"
        )
    )
    parts.append(TextPart("Available functions: " + ", ".join(registry.names())))
    return ChatRequest(system_prompt=VERDICT_PROMPT, user_parts=parts)


_LINE = re.compile(r"^\s*(VERDICT|DIAGNOSIS|DIRECTIVE|FUNCTIONS)\s*:\s*(.*)$", re.IGNORECASE)


def _parse_verdict(text: str) -> dict[str, str] | None:
    fields: dict[str, str] = {}
    for line in text.splitlines():
        m = _LINE.match(line)
        if m:
            fields[m.group(1).upper()] = m.group(2).strip()
    verdict = fields.get("VERDICT", "").lower()
    if verdict.startswith("adequate"):
        fields["VERDICT"] = "adequate"
    elif verdict.startswith("inadequate"):
        fields["VERDICT"] = "inadequate"
    else:
        return None
    return fields


def assess(
    input: RethinkInput,
    backend,
    registry: FunctionRegistry,
    iteration: int,
    cap: int,
) -> RethinkInstruction | None:
    """None means the answer is adequate; otherwise the next instruction.

    Fast path: choosing the insufficiency option (label 6) is automatically
    inadequate; the chat verdict still supplies the directive when it can.
    An unparseable verdict otherwise fails open (adequate, warning logged).
    """
    if iteration > cap:
        raise ValueError(f"iteration {iteration} exceeds rethink cap {cap}")
    response = backend.chat(render_verdict_prompt(input, registry))
    fields = _parse_verdict(response.text)
    structurally_inadequate = input.answer.chosen_index == INSUFFICIENT_LABEL

    if fields is None:
        if not structurally_inadequate:
            logger.warning("unparseable rethink verdict; failing open as adequate")
            return None
        fields = {"VERDICT": "inadequate", "DIRECTIVE": _DEFAULT_DIRECTIVE}

    if fields["VERDICT"] == "adequate" and not structurally_inadequate:
        return None

    directive = fields.get("DIRECTIVE", "").strip() or _DEFAULT_DIRECTIVE
    suggested = [
        name.strip()
        for name in fields.get("FUNCTIONS", "").split(",")
        if name.strip() and name.strip() in registry
    ]
    return RethinkInstruction(
        diagnosis=fields.get("DIAGNOSIS", "").strip(),
        directive=directive,
        suggested_functions=suggested,
        iteration=iteration,
    )
