from __future__ import annotations

import random

import pytest

from coread import (
    GenerationOutcome,
    LoopConfig,
    PageGenerationError,
    QuestionKind,
    ScriptedBackend,
    generate_for_page,
    generate_for_story,
    request_digest,
)
from coread.rubric import CROWD_ORDER, applicable_types
from conftest import (
    StubBackend,
    VALID_QUESTION_BY_KIND,
    generation_payload,
    judge_payload,
    passing_judge_responses,
)


def seed_for_first_pick(story, page_index, wanted: QuestionKind) -> int:
    """Find a seed whose first uniform draw from the page's pool is `wanted`."""
    pool = [kind for kind in CROWD_ORDER if kind in applicable_types(story, page_index)]
    for seed in range(1000):
        if pool[random.Random(seed).randrange(len(pool))] is wanted:
            return seed
    raise AssertionError("no seed found")


def failing_generations(kind: QuestionKind, count: int) -> list[str]:
    """Candidates that fail a structural check for their own type."""
    bad = {
        QuestionKind.COMPLETION: "The fox tricked the stork.",  # no blank
        QuestionKind.RECALL: "The stork made a plan? And then what? Tell me?",
        QuestionKind.OPEN_ENDED: "Maybe the fox felt sorry.",
        QuestionKind.WH: "The fox served soup? In what dish?",
        QuestionKind.DISTANCING: "Nobody likes being tricked.",
    }[kind]
    return [generation_payload(bad)] * count


def test_two_failures_then_success_feeds_counter_examples(lion_story):
    seed = seed_for_first_pick(lion_story, 3, QuestionKind.OPEN_ENDED)
    questions = [
        "How did the lion get caught in the net?",
        "What sound did the lion make in the forest?",
        "How do you think the mouse felt hearing her friend roar?",
    ]
    explanations = [
        "The answer is stated on the current page.",
        "Too similar to the text on the page.",
    ]
    backend = ScriptedBackend(
        {
            "generate:openEnded": [generation_payload(text) for text in questions],
            "judge:openEnded.relevance": [judge_payload("Relevant", True)] * 3,
            "judge:openEnded.authenticity": [
                judge_payload("Authentic", False, explanations[0]),
                judge_payload("Authentic", False, explanations[1]),
                judge_payload("Authentic", True),
            ],
            "judge:openEnded.type_specific": [judge_payload("Suitable", True)],
        }
    )
    outcome = generate_for_page(
        backend, lion_story, 3, LoopConfig(rng_seed=seed), random.Random(seed)
    )
    assert outcome.question is not None
    assert outcome.question.text == questions[2]
    assert len(outcome.attempts) == 3
    assert [record.attempt for record in outcome.attempts] == [1, 2, 3]
    third_prompt = [
        request for request in backend.requests if request.request_tag == "generate:openEnded"
    ][2].messages[-1].content
    for text, explanation in zip(questions[:2], explanations):
        assert text in third_prompt
        assert explanation in third_prompt


def test_exhausted_kind_leaves_pool_and_next_kind_succeeds(fox_story):
    page_index = 3
    seed = seed_for_first_pick(fox_story, page_index, QuestionKind.RECALL)
    backend = ScriptedBackend(
        {
            "generate:recall": failing_generations(QuestionKind.RECALL, 3),
        }
    )
    # Whatever is drawn second gets a passing run.
    for kind in QuestionKind:
        if kind is QuestionKind.RECALL:
            continue
        backend.add("generate:" + kind.value, generation_payload(VALID_QUESTION_BY_KIND[kind]))
        for tag, responses in passing_judge_responses(kind).items():
            backend.add(tag, *responses)
    outcome = generate_for_page(
        backend, fox_story, page_index, LoopConfig(rng_seed=seed), random.Random(seed)
    )
    assert outcome.question is not None
    assert len(outcome.types_tried) == 2
    assert outcome.types_tried[0] is QuestionKind.RECALL
    recall_attempts = [r for r in outcome.attempts if r.kind is QuestionKind.RECALL]
    assert len(recall_attempts) == 3
    assert len(outcome.attempts) == 4


def test_all_kinds_failing_yields_questionless_outcome(fox_story):
    page_index = 2  # refrain page: every kind applicable
    assert applicable_types(fox_story, page_index) == set(QuestionKind)
    responses = {
        "generate:" + kind.value: failing_generations(kind, 3) for kind in QuestionKind
    }
    backend = ScriptedBackend(responses)
    outcome = generate_for_page(backend, fox_story, page_index, LoopConfig(rng_seed=7))
    assert outcome.question is None
    assert outcome.questions == ()
    generation_calls = [t for t in backend.tags_seen() if t.startswith("generate:")]
    assert len(generation_calls) == 15  # 3 attempts x 5 kinds
    assert len(outcome.attempts) == 15
    assert set(outcome.types_tried) == set(QuestionKind)
    judge_calls = [t for t in backend.tags_seen() if t.startswith("judge:")]
    assert judge_calls == []  # structural failures never reach a judge


def test_recall_never_tried_on_first_page(plain_story, stub_backend):
    for seed in range(200):
        outcome = generate_for_page(
            stub_backend, plain_story, 0, LoopConfig(rng_seed=seed), random.Random(seed)
        )
        assert QuestionKind.RECALL not in outcome.types_tried
        assert QuestionKind.COMPLETION not in outcome.types_tried


def test_unparseable_output_consumes_an_attempt(lion_story):
    seed = seed_for_first_pick(lion_story, 3, QuestionKind.OPEN_ENDED)
    backend = ScriptedBackend(
        {
            "generate:openEnded": [
                "I cannot answer that.",
                generation_payload(VALID_QUESTION_BY_KIND[QuestionKind.OPEN_ENDED]),
            ],
            **passing_judge_responses(QuestionKind.OPEN_ENDED),
        }
    )
    outcome = generate_for_page(
        backend, lion_story, 3, LoopConfig(rng_seed=seed), random.Random(seed)
    )
    assert outcome.question is not None
    assert len(outcome.attempts) == 2
    assert outcome.attempts[0].error is not None
    assert outcome.attempts[0].candidate is None
    assert outcome.attempts[1].verdict.suitable


def test_inconclusive_judge_consumes_an_attempt(lion_story):
    seed = seed_for_first_pick(lion_story, 3, QuestionKind.OPEN_ENDED)
    backend = ScriptedBackend(
        {
            "generate:openEnded": [
                generation_payload("How could the mouse repay the lion?"),
                generation_payload(VALID_QUESTION_BY_KIND[QuestionKind.OPEN_ENDED]),
            ],
            "judge:openEnded.relevance": [
                "garbled",
                "garbled again",
                judge_payload("Relevant", True),
            ],
            "judge:openEnded.authenticity": [judge_payload("Authentic", True)],
            "judge:openEnded.type_specific": [judge_payload("Suitable", True)],
        }
    )
    outcome = generate_for_page(
        backend, lion_story, 3, LoopConfig(rng_seed=seed), random.Random(seed)
    )
    assert outcome.question is not None
    assert outcome.attempts[0].error is not None
    assert "inconclusive" in outcome.attempts[0].error


def test_feedback_never_crosses_kinds(fox_story):
    page_index = 3
    seed = seed_for_first_pick(fox_story, page_index, QuestionKind.OPEN_ENDED)
    backend = ScriptedBackend(
        {
            "generate:openEnded": [
                generation_payload("How do you think the stork felt?"),
            ] * 3,
            "judge:openEnded.relevance": [
                judge_payload("Relevant", False, "openEnded rejection reason"),
            ] * 3,
        }
    )
    for kind in QuestionKind:
        if kind is QuestionKind.OPEN_ENDED:
            continue
        backend.add("generate:" + kind.value, generation_payload(VALID_QUESTION_BY_KIND[kind]))
        for tag, responses in passing_judge_responses(kind).items():
            backend.add(tag, *responses)
    outcome = generate_for_page(
        backend, fox_story, page_index, LoopConfig(rng_seed=seed), random.Random(seed)
    )
    assert outcome.question is not None
    assert outcome.types_tried[0] is QuestionKind.OPEN_ENDED
    second_kind = outcome.types_tried[1]
    first_prompt_of_second_kind = next(
        request
        for request in backend.requests
        if request.request_tag == f"generate:{second_kind.value}"
    ).messages[-1].content
    assert "Previously rejected prompt" not in first_prompt_of_second_kind
    assert "openEnded rejection reason" not in first_prompt_of_second_kind


def test_trace_is_deterministic_under_seed(lion_story):
    def run() -> GenerationOutcome:
        return generate_for_page(
            StubBackend(), lion_story, 3, LoopConfig(rng_seed=42), random.Random(42)
        )

    first, second = run(), run()
    assert first.types_tried == second.types_tried
    assert [r.candidate.text for r in first.attempts] == [
        r.candidate.text for r in second.attempts
    ]
    assert first.llm_call_count == second.llm_call_count


def test_backend_hard_failure_carries_partial_trace(lion_story):
    seed = seed_for_first_pick(lion_story, 3, QuestionKind.OPEN_ENDED)
    backend = ScriptedBackend(
        {
            "generate:openEnded": [
                generation_payload("How might the story end?"),
            ],
            "judge:openEnded.relevance": [
                judge_payload("Relevant", False, "needs another attempt"),
            ],
            # second generation attempt finds an empty queue -> hard failure
        }
    )
    with pytest.raises(PageGenerationError) as excinfo:
        generate_for_page(
            backend, lion_story, 3, LoopConfig(rng_seed=seed), random.Random(seed)
        )
    partial = excinfo.value.partial
    assert len(partial.attempts) == 1
    assert partial.error is not None


def test_generate_for_story_is_total_over_pages(lion_story, stub_backend):
    outcomes = generate_for_story(stub_backend, lion_story, LoopConfig(rng_seed=5))
    assert sorted(outcomes) == list(range(6))
    for outcome in outcomes.values():
        assert outcome.question is not None
        assert outcome.error is None


def test_generate_for_story_records_page_errors_without_spreading(lion_story):
    page2_main_slot = "for this main text:\n\n" + lion_story.pages[2].text

    class FlakyBackend(StubBackend):
        def complete(self, request):
            if (
                request.request_tag.startswith("generate:")
                and page2_main_slot in request.messages[-1].content
            ):
                from coread.backends import TransportError

                raise TransportError("endpoint down")
            return super().complete(request)

    outcomes = generate_for_story(FlakyBackend(), lion_story, LoopConfig(rng_seed=5))
    assert outcomes[2].question is None
    assert outcomes[2].error is not None
    for index in (0, 1, 3, 4, 5):
        assert outcomes[index].question is not None


def test_accepted_question_kind_is_applicable(plain_story, stub_backend):
    for seed in range(50):
        outcome = generate_for_page(
            stub_backend, plain_story, 2, LoopConfig(rng_seed=seed), random.Random(seed)
        )
        assert outcome.question.kind in applicable_types(plain_story, 2)


def test_page_binding_full_story_run(lion_story):
    backend = StubBackend()
    outcomes = generate_for_story(backend, lion_story, LoopConfig(rng_seed=11))
    for page_index, outcome in outcomes.items():
        question = outcome.question
        assert question is not None
        assert question.page_index == page_index
        request = next(
            r for r in backend.requests if request_digest(r) == question.prompt_digest
        )
        prompt = request.messages[-1].content
        main_text = prompt.split("for this main text:\n\n", 1)[1].split(
            "\n\nFormat your response in JSON", 1
        )[0]
        assert main_text == lion_story.pages[page_index].text


def test_desired_count_collects_multiple_questions(refrain_story, stub_backend):
    outcome = generate_for_page(
        stub_backend,
        refrain_story,
        1,
        LoopConfig(rng_seed=3, desired_count=2),
        random.Random(3),
    )
    assert len(outcome.questions) == 2
    assert outcome.question is outcome.questions[0]


def test_parallel_story_generation_matches_sequential(lion_story):
    sequential = generate_for_story(StubBackend(), lion_story, LoopConfig(rng_seed=17))
    parallel = generate_for_story(
        StubBackend(), lion_story, LoopConfig(rng_seed=17, page_parallelism=3)
    )
    assert sorted(parallel) == sorted(sequential)
    for index in sequential:
        assert parallel[index].question.text == sequential[index].question.text
        assert parallel[index].types_tried == sequential[index].types_tried
