"""Shared fixtures: stories, scripted responses, and deterministic backends."""

from __future__ import annotations

import json

import pytest

from coread import (
    ChatRequest,
    ChatResponse,
    CriterionMode,
    QuestionKind,
    Story,
    load_fixture,
    parse_story,
)
from coread.rubric import criteria_for, criterion_by_id


def make_story(story_id: str, pages: list[str], title: str = "Test Story") -> Story:
    return parse_story(json.dumps({"id": story_id, "title": title, "pages": pages}))


@pytest.fixture
def lion_story() -> Story:
    return load_fixture("the-lion-and-the-mouse")


@pytest.fixture
def fox_story() -> Story:
    return load_fixture("the-fox-and-the-stork")


@pytest.fixture
def plain_story() -> Story:
    """Six pages of plain prose: no refrain, no rhyme."""
    return make_story(
        "plain",
        [
            "A quiet boy walked along the winding road toward town.",
            "He carried a basket of ripe apples for the busy market.",
            "On the way he met an old farmer leading a gray donkey.",
            "The farmer offered to trade a warm loaf for two apples.",
            "The boy agreed, and they ate together under a wide oak.",
            "By evening he reached town with bread crumbs on his shirt.",
        ],
    )


@pytest.fixture
def refrain_story() -> Story:
    """Page 1 repeats a four-word phrase from page 0 and within itself."""
    return make_story(
        "refrain",
        [
            "Run, run, as fast as you can, said the little hare.",
            "Run, run, as fast as you can! Run, run, as fast as you can!",
            "The hare ran past the meadow and over the hill.",
        ],
    )


def generation_payload(text: str) -> str:
    return json.dumps({"prompt": text})


def judge_payload(field: str, value, explanation: str = "ok") -> str:
    return json.dumps({field: value, "Explanation": explanation})


def passing_judge_responses(kind: QuestionKind, repeat: int = 1) -> dict[str, list[str]]:
    """One all-pass response per judged criterion of a type, repeated."""
    responses: dict[str, list[str]] = {}
    for criterion in criteria_for(kind, CriterionMode.LLM_JUDGED):
        value = criterion.judge.expected
        responses[f"judge:{criterion.id}"] = [
            judge_payload(criterion.judge.field_name, value) for _ in range(repeat)
        ]
    return responses


VALID_QUESTION_BY_KIND = {
    QuestionKind.COMPLETION: "The lion let the little mouse go ____.",
    QuestionKind.RECALL: "What happened after the mouse promised to repay the lion?",
    QuestionKind.OPEN_ENDED: "How do you think the mouse felt about her promise?",
    QuestionKind.WH: "Who found the lion trapped in the net?",
    QuestionKind.DISTANCING: "Have you ever helped a friend who was much bigger than you?",
}


class StubBackend:
    """Answers any request with a structurally valid response for its tag.

    Generation tags get a per-kind canned question; judge tags get a verdict
    that matches the criterion's expectation. Records every request.
    """

    def __init__(self) -> None:
        self.requests: list[ChatRequest] = []

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def tags_seen(self) -> list[str]:
        return [request.request_tag for request in self.requests]

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.requests.append(request)
        tag = request.request_tag
        if tag.startswith("generate:"):
            kind = QuestionKind(tag.split(":", 1)[1])
            content = generation_payload(VALID_QUESTION_BY_KIND[kind])
        elif tag.startswith("judge:"):
            judge = criterion_by_id(tag.split(":", 1)[1]).judge
            content = judge_payload(judge.field_name, judge.expected)
        else:  # pragma: no cover - unknown tags are a test bug
            raise AssertionError(f"unexpected request tag {tag!r}")
        return ChatResponse(content=content)


@pytest.fixture
def stub_backend() -> StubBackend:
    return StubBackend()
