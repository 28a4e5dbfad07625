"""End-to-end answering: label parsing, loop bounds, variants, determinism."""

import hashlib

import pytest
from conftest import make_asset, make_backend, make_index, make_question, make_summary

from vidqa.backend import MockRule
from vidqa.errors import LabelParseFailure, MissingComponentForVariant
from vidqa.index import KIND_FRAME, KIND_TRANSCRIPT
from vidqa.orchestrator import (
    CATEGORIES,
    OPTION_SIX,
    answer_agentic,
    answer_baseline,
    answer_with_variant,
    parse_answer_label,
    trace_to_dict,
)

ADVERSARIAL_LABELS = [
    "Option 2", "1.", "answer is 3", "(4)", "3!", "label 5", "six", "answer: 6",
    "1 or 2", "12", "0", "7", "3.0", "-3", "+4", "option\n2", "2)", "the answer",
    "I choose 5 because", "",
]

INADEQUATE = (
    "VERDICT: inadequate\nDIAGNOSIS: thin evidence\n"
    "DIRECTIVE: gather more context\nFUNCTIONS:"
)

ANSWER_MARK = "single digit"   # present only in answer prompts
PLAN_MARK = "JSON array"       # present only in planning prompts
VERDICT_MARK = "VERDICT"       # present only in critic prompts


# --- parse_answer_label -------------------------------------------------------


def test_label_accepts_bare_digits():
    assert parse_answer_label("3") == 3
    assert parse_answer_label(" 6\n") == 6
    assert parse_answer_label("\t1 ") == 1


def test_label_rejects_adversarial_fixtures():
    assert len(ADVERSARIAL_LABELS) == 20
    for raw in ADVERSARIAL_LABELS:
        with pytest.raises(LabelParseFailure):
            parse_answer_label(raw)


# --- answer_baseline -------------------------------------------------------------


def test_baseline_scripted_answer(pipeline):
    asset, _, question, build = pipeline
    backend, index = build([MockRule(ANSWER_MARK, "3")])
    record, trace = answer_baseline(question, asset, index, backend, n=3)
    assert record.chosen_index == 3
    assert trace.variant == "baseline"
    assert trace.backend_call_count == 1
    assert len(trace.iterations) == 1


def test_baseline_reprompt_contract(pipeline):
    asset, _, question, build = pipeline
    backend, index = build(
        [
            MockRule(ANSWER_MARK, "Answer: 4", max_uses=1),
            MockRule("Respond with a single digit 1-6", "4"),
        ]
    )
    record, trace = answer_baseline(question, asset, index, backend, n=3)
    assert record.chosen_index == 4
    assert record.raw_text == "4"
    assert trace.backend_call_count == 2


def test_baseline_label_failure_after_reprompt(pipeline):
    asset, _, question, build = pipeline
    backend, index = build([], default="never a label")
    with pytest.raises(LabelParseFailure):
        answer_baseline(question, asset, index, backend, n=3)


def test_baseline_retrieval_matches_oracle_and_digest_stable(pipeline):
    asset, _, question, build = pipeline
    digests = []
    for _ in range(2):
        backend, index = build([MockRule(ANSWER_MARK, "2")])
        record, trace = answer_baseline(question, asset, index, backend, n=4)
        it = trace.iterations[0]
        query = backend.embed_text(question.text)
        assert it.retrieved_frames == [
            h.ordinal for h in index.top_n(query, KIND_FRAME, 4, "vid")
        ]
        assert it.retrieved_transcripts == [
            h.ordinal for h in index.top_n(query, KIND_TRANSCRIPT, 4, "vid")
        ]
        digests.append(record.prompt_digest)
        assert record.prompt_digest == hashlib.sha256(
            it.prompt_text.encode("utf-8")
        ).hexdigest()
    assert digests[0] == digests[1]


# --- the agentic loop ---------------------------------------------------------------


def loop_rules(verdicts):
    rules = [MockRule(PLAN_MARK, "NONE")]
    rules += [MockRule(VERDICT_MARK, v, max_uses=1) for v in verdicts[:-1]]
    rules.append(MockRule(VERDICT_MARK, verdicts[-1]))
    rules.append(MockRule(ANSWER_MARK, "2"))
    return rules


def run_loop(pipeline, verdicts, cap=3, **kw):
    asset, summary, question, build = pipeline
    backend, index = build(loop_rules(verdicts))
    return answer_agentic(
        question, asset, index, summary, backend, rethink_cap=cap, n=3, **kw
    )


def test_loop_adequate_first_single_pass(pipeline):
    record, trace = run_loop(pipeline, ["VERDICT: adequate"])
    assert len(trace.iterations) == 1
    assert trace.iterations[0].verdict == "adequate"
    assert record.iteration == 1
    assert trace.final == record


def test_loop_two_rethinks_then_adequate(pipeline):
    record, trace = run_loop(pipeline, [INADEQUATE, INADEQUATE, "VERDICT: adequate"])
    assert len(trace.iterations) == 3
    instructions = [it.rethink for it in trace.iterations if it.rethink]
    assert len(instructions) == 2
    assert [i.iteration for i in instructions] == [1, 2]
    assert trace.iterations[-1].verdict == "adequate"


def test_loop_cap_always_inadequate(pipeline):
    record, trace = run_loop(pipeline, [INADEQUATE], cap=3)
    assert len(trace.iterations) == 4  # cap + 1 answer passes
    assert trace.iterations[-1].verdict == ""  # no assess after the cap
    assert record.iteration == 4


def test_loop_never_rethinks_after_adequate(pipeline):
    record, trace = run_loop(pipeline, ["VERDICT: adequate"], cap=3)
    assert all(it.verdict != "inadequate" for it in trace.iterations)
    assert len(trace.iterations) == 1


def test_loop_backend_call_budget(pipeline):
    maxfns = 4
    record, trace = run_loop(pipeline, [INADEQUATE], cap=3, max_functions=maxfns)
    passes = len(trace.iterations)
    assert trace.backend_call_count <= (1 + maxfns + 1 + 1) * passes


def test_loop_cap_zero_has_no_verdicts(pipeline):
    record, trace = run_loop(pipeline, ["VERDICT: adequate"], cap=0)
    assert len(trace.iterations) == 1
    assert trace.iterations[0].verdict == ""
    # plan + answer only
    assert trace.backend_call_count == 2


# --- variants ----------------------------------------------------------------------


def variant_rules():
    return [
        MockRule(PLAN_MARK, "NONE"),
        MockRule(VERDICT_MARK, "VERDICT: adequate"),
        MockRule(ANSWER_MARK, "2"),
    ]


def test_variant_baseline_has_no_digest(pipeline):
    asset, summary, question, build = pipeline
    backend, index = build(variant_rules())
    record, trace = answer_with_variant(
        question, asset, index, summary, backend, "baseline", n=3
    )
    assert "Video summary digest" not in trace.iterations[0].prompt_text


def test_variant_summary_prepends_digest(pipeline):
    asset, summary, question, build = pipeline
    backend, index = build(variant_rules())
    record, trace = answer_with_variant(
        question, asset, index, summary, backend, "+summary", n=3
    )
    prompt = trace.iterations[0].prompt_text
    assert "Video summary digest" in prompt
    assert prompt.index("Video summary digest") < prompt.index(question.text)
    assert trace.variant == "+summary"
    # no agent artifacts in a +summary trace
    assert trace.iterations[0].plan == []
    assert trace.iterations[0].refined is None


def test_variant_agent_runs_agent_without_rethink(pipeline):
    asset, summary, question, build = pipeline
    backend, index = build(variant_rules())
    record, trace = answer_with_variant(
        question, asset, index, summary, backend, "+agent", n=3
    )
    assert trace.variant == "+agent"
    assert trace.iterations[0].refined is not None
    assert all(it.verdict == "" for it in trace.iterations)
    assert all(it.rethink is None for it in trace.iterations)
    assert len(trace.iterations) == 1


def test_variant_full_runs_loop(pipeline):
    asset, summary, question, build = pipeline
    backend, index = build(variant_rules())
    record, trace = answer_with_variant(
        question, asset, index, summary, backend, "full", n=3, rethink_cap=3
    )
    assert trace.variant == "full"
    assert trace.iterations[0].verdict == "adequate"


def test_variant_machinery_is_monotonic(pipeline):
    """baseline < +summary < +agent < full in populated trace sections."""
    asset, summary, question, build = pipeline

    def features(variant):
        backend, index = build(variant_rules())
        _, trace = answer_with_variant(
            question, asset, index, summary, backend, variant, n=3
        )
        prompt = trace.iterations[0].prompt_text
        return (
            "Video summary digest" in prompt,
            trace.iterations[0].refined is not None,
            any(it.verdict for it in trace.iterations),
        )

    assert features("baseline") == (False, False, False)
    assert features("+summary") == (True, False, False)
    assert features("+agent") == (True, True, False)
    assert features("full") == (True, True, True)


def test_variant_requires_summary(pipeline):
    asset, _, question, build = pipeline
    backend, index = build(variant_rules())
    for variant in ("+summary", "+agent", "full"):
        with pytest.raises(MissingComponentForVariant):
            answer_with_variant(question, asset, index, None, backend, variant)
    # baseline succeeds without one
    record, _ = answer_with_variant(
        question, asset, index, None, backend, "baseline", n=3
    )
    assert record.chosen_index == 2


def test_unknown_variant_rejected(pipeline):
    asset, summary, question, build = pipeline
    backend, index = build(variant_rules())
    with pytest.raises(ValueError):
        answer_with_variant(question, asset, index, summary, backend, "turbo")


def test_answer_prompt_assembly_order(pipeline):
    asset, summary, question, build = pipeline
    rules = [
        MockRule(PLAN_MARK,
                 '[{"function": "term_frequency", "arguments": {"term": "scene"}}]'),
        MockRule(VERDICT_MARK, "VERDICT: adequate"),
        MockRule(ANSWER_MARK, "2"),
    ]
    backend, index = build(rules)
    record, trace = answer_with_variant(
        question, asset, index, summary, backend, "full", n=3
    )
    prompt = trace.iterations[0].prompt_text
    positions = [
        prompt.index("Video summary digest"),
        prompt.index("Question:"),
        prompt.index("Additional context:"),
        prompt.index("Transcript excerpts:"),
        prompt.index("Frame at "),
        prompt.index("Options:"),
        prompt.index("Answer with a single digit 1-6."),
    ]
    assert positions == sorted(positions)
    assert "term_frequency: " in prompt
    assert f"6. {OPTION_SIX}" in prompt
    # timestamps are rendered for transcripts and frames alike
    import re

    assert re.search(r"\[\d+\.\d{3}-\d+\.\d{3}\] scene \d", prompt)
    assert re.search(r"Frame at \d+\.\d{3} s", prompt)


def test_determinism_identical_runs(pipeline):
    asset, summary, question, build = pipeline
    outcomes = []
    for _ in range(2):
        backend, index = build(
            [
                MockRule(PLAN_MARK, "NONE"),
                MockRule(VERDICT_MARK, INADEQUATE, max_uses=1),
                MockRule(VERDICT_MARK, "VERDICT: adequate"),
                MockRule(ANSWER_MARK, "5"),
            ]
        )
        record, trace = answer_with_variant(
            question, asset, index, summary, backend, "full", n=3
        )
        outcomes.append((record.chosen_index, record.prompt_digest, trace_to_dict(trace)))
    assert outcomes[0] == outcomes[1]


def test_question_validation():
    with pytest.raises(ValueError):
        make_question(category="Sports")
    with pytest.raises(ValueError):
        make_question(gold=6)
