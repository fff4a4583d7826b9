"""Builds generation prompts and parses candidate questions from model output."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .backends import ChatBackend, ChatMessage, ChatRequest, DEFAULT_MODEL, request_digest
from .prompts import PromptLibrary, bundled_library
from .rubric import QuestionKind, applicable_types
from .stories import Story, context_window

if TYPE_CHECKING:
    from .review import CounterExample

GENERATION_TEMPERATURE = 0.7
GENERATION_MAX_TOKENS = 300


class GenerationParseError(ValueError):
    """Model output contained no usable JSON object."""

    def __init__(self, message: str, raw: str, request: ChatRequest | None = None) -> None:
        super().__init__(message)
        self.raw = raw
        self.request = request


class ResponseSchemaError(GenerationParseError):
    """JSON was found but the 'prompt' field is missing, non-string, or empty."""


@dataclass(frozen=True)
class TypeInstruction:
    kind: QuestionKind
    instruction_text: str


@dataclass(frozen=True)
class CandidateQuestion:
    """One synthesized question, bound to the page and request that produced it."""

    text: str
    kind: QuestionKind
    story_id: str
    page_index: int
    attempt: int
    prompt_digest: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("candidate question text is empty")
        if self.page_index < 0:
            raise ValueError("page_index must be non-negative")
        if self.attempt < 1:
            raise ValueError("attempt is 1-based")


def type_instruction(kind: QuestionKind, library: PromptLibrary | None = None) -> TypeInstruction:
    library = library or bundled_library()
    return TypeInstruction(kind, library.section(f"instruction.{kind.value}"))


def extract_first_json_object(raw: str) -> dict:
    """First JSON object found in ``raw``, tolerating prose and code fences."""
    decoder = json.JSONDecoder()
    position = 0
    while True:
        start = raw.find("{", position)
        if start == -1:
            raise ValueError("no JSON object found")
        try:
            value, _ = decoder.raw_decode(raw[start:])
        except json.JSONDecodeError:
            position = start + 1
            continue
        if isinstance(value, dict):
            return value
        position = start + 1


def parse_generation_response(raw: str) -> str:
    """Extract the generated question from a model reply."""
    try:
        payload = extract_first_json_object(raw)
    except ValueError as exc:
        raise GenerationParseError(f"unparseable generation response: {exc}", raw) from exc
    value = payload.get("prompt")
    if not isinstance(value, str) or not value.strip():
        raise ResponseSchemaError(
            "generation response JSON lacks a non-empty string 'prompt' field", raw
        )
    return value.strip()


def _article(kind: QuestionKind) -> str:
    return "an" if kind.value[0].lower() in "aeiou" else "a"


def build_generation_prompt(
    story: Story,
    page_index: int,
    kind: QuestionKind,
    feedback: Sequence["CounterExample"] = (),
    *,
    library: PromptLibrary | None = None,
    model: str = DEFAULT_MODEL,
    temperature: float = GENERATION_TEMPERATURE,
) -> ChatRequest:
    """Render the generation prompt for one (page, type) slot.

    Pure: identical inputs produce identical requests, hence identical
    digests. Counter-example feedback is appended between the task framing
    and the context block, one block per rejected candidate.
    """
    if kind not in applicable_types(story, page_index):
        raise ValueError(
            f"question type '{kind.value}' is not applicable on page {page_index}"
        )
    for item in feedback:
        if item.kind is not kind:
            raise ValueError(
                f"feedback for '{item.kind.value}' cannot steer a '{kind.value}' prompt"
            )
    library = library or bundled_library()
    feedback_block = "".join(
        library.fill("feedback_item", question=item.question_text, reason=item.explanation)
        + "\n\n"
        for item in feedback
    )
    content = library.fill(
        "generation",
        article=_article(kind),
        kind=kind.value,
        type_instruction=library.section(f"instruction.{kind.value}"),
        type_guidance=library.section(f"guidance.{kind.value}"),
        feedback_block=feedback_block,
        context_block="\n\n".join(context_window(story, page_index)),
        current_page=story.pages[page_index].text,
    )
    return ChatRequest(
        messages=(ChatMessage("user", content),),
        model=model,
        temperature=temperature,
        max_tokens=GENERATION_MAX_TOKENS,
        request_tag=f"generate:{kind.value}",
    )


def synthesize(
    backend: ChatBackend,
    story: Story,
    page_index: int,
    kind: QuestionKind,
    feedback: Sequence["CounterExample"] = (),
    *,
    attempt: int = 1,
    library: PromptLibrary | None = None,
    model: str = DEFAULT_MODEL,
) -> CandidateQuestion:
    """Generate one candidate question: build prompt, call the model, parse."""
    request = build_generation_prompt(
        story, page_index, kind, feedback, library=library, model=model
    )
    response = backend.complete(request)
    try:
        text = parse_generation_response(response.content)
    except GenerationParseError as exc:
        exc.request = request
        raise
    return CandidateQuestion(
        text=text,
        kind=kind,
        story_id=story.id,
        page_index=page_index,
        attempt=attempt,
        prompt_digest=request_digest(request),
    )
