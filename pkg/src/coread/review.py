"""Applies the suitability rubric to candidate questions and explains failures.

Structural criteria run first and cost nothing; judged criteria each cost one
LLM call and short-circuit on the first failure, so no judge call is ever
made for a structurally broken candidate.
"""

from __future__ import annotations

from dataclasses import dataclass
from .backends import ChatBackend, ChatMessage, ChatRequest, DEFAULT_MODEL
from .prompts import PromptLibrary, bundled_library
from .rubric import (
    CriterionMode,
    CriterionResult,
    QuestionKind,
    RubricCriterion,
    criteria_for,
    structural_check,
)
from .stories import Story, context_window
from .synthesis import CandidateQuestion, extract_first_json_object

JUDGE_TEMPERATURE = 0.0
JUDGE_MAX_TOKENS = 300


class JudgeParseError(ValueError):
    """The judge reply contained no parsable verdict."""

    def __init__(self, raw: str) -> None:
        super().__init__("judge response carries no True/False verdict")
        self.raw = raw


class InconclusiveCriterionError(RuntimeError):
    """A judge failed to produce a verdict twice; the check is inconclusive."""

    def __init__(self, criterion_id: str, judge_call_count: int) -> None:
        super().__init__(f"criterion '{criterion_id}' is inconclusive after a re-ask")
        self.criterion_id = criterion_id
        self.judge_call_count = judge_call_count


@dataclass(frozen=True)
class SuitabilityVerdict:
    suitable: bool
    results: tuple[CriterionResult, ...]
    failing_criterion: str | None = None
    explanation: str | None = None
    judge_call_count: int = 0

    def __post_init__(self) -> None:
        all_passed = all(result.passed for result in self.results)
        if self.suitable != all_passed:
            raise ValueError("suitable must reflect whether every evaluated result passed")
        if not self.suitable and (not self.failing_criterion or not self.explanation):
            raise ValueError("an unsuitable verdict needs a failing criterion and explanation")

    def to_dict(self) -> dict:
        return {
            "suitable": self.suitable,
            "failing_criterion": self.failing_criterion,
            "explanation": self.explanation,
            "results": [result.to_dict() for result in self.results],
        }


@dataclass(frozen=True)
class CounterExample:
    """A rejected candidate plus the explanation fed back into synthesis."""

    question_text: str
    kind: QuestionKind
    explanation: str
    source_criterion_id: str

    def __post_init__(self) -> None:
        if not self.explanation:
            raise ValueError("a counter-example needs a non-empty explanation")


def build_suitability_prompt(
    criterion: RubricCriterion,
    candidate: CandidateQuestion,
    story: Story,
    *,
    library: PromptLibrary | None = None,
    model: str = DEFAULT_MODEL,
) -> ChatRequest:
    """Render the judge prompt for one criterion against one candidate."""
    if criterion.mode is not CriterionMode.LLM_JUDGED:
        raise ValueError(f"criterion '{criterion.id}' is not judged by the model")
    if candidate.kind not in criterion.applicable_kinds:
        raise ValueError(
            f"criterion '{criterion.id}' does not apply to '{candidate.kind.value}' questions"
        )
    library = library or bundled_library()
    spec = criterion.judge
    content = library.fill(
        criterion.prompt_template_key,
        property=spec.property_label,
        property_noun=spec.noun_label,
        field=spec.field_name,
        definition=spec.definition,
        previous_pages="\n\n".join(context_window(story, candidate.page_index)),
        current_page=story.pages[candidate.page_index].text,
        candidate=candidate.text,
    )
    return ChatRequest(
        messages=(ChatMessage("user", content),),
        model=model,
        temperature=JUDGE_TEMPERATURE,
        max_tokens=JUDGE_MAX_TOKENS,
        request_tag=f"judge:{criterion.id}",
    )


def parse_verdict(raw: str) -> tuple[bool, str]:
    """Extract (verdict, explanation) from a judge reply.

    The verdict is the first boolean-valued field (boolean literal or a
    case-insensitive "true"/"false" string); the explanation comes from the
    'Explanation' field, verbatim.
    """
    try:
        payload = extract_first_json_object(raw)
    except ValueError:
        raise JudgeParseError(raw) from None
    verdict: bool | None = None
    explanation = ""
    for key, value in payload.items():
        if key.lower() == "explanation":
            if isinstance(value, str):
                explanation = value
            continue
        if verdict is None:
            if isinstance(value, bool):
                verdict = value
            elif isinstance(value, str) and value.strip().lower() in ("true", "false"):
                verdict = value.strip().lower() == "true"
    if verdict is None:
        raise JudgeParseError(raw)
    return verdict, explanation


def evaluate(
    backend: ChatBackend,
    candidate: CandidateQuestion,
    story: Story,
    *,
    library: PromptLibrary | None = None,
    model: str = DEFAULT_MODEL,
) -> SuitabilityVerdict:
    """Check a candidate against every applicable criterion.

    Structural failures return immediately with zero judge calls. Judged
    criteria run in registry order (relevance, authenticity, type-specific)
    and stop at the first failure. A judge that cannot produce a verdict is
    re-asked once; a second failure raises InconclusiveCriterionError.
    """
    results = list(structural_check(candidate))
    failed = next((result for result in results if not result.passed), None)
    if failed is not None:
        return SuitabilityVerdict(
            suitable=False,
            results=tuple(results),
            failing_criterion=failed.criterion_id,
            explanation=failed.explanation,
            judge_call_count=0,
        )
    judge_calls = 0
    for criterion in criteria_for(candidate.kind, CriterionMode.LLM_JUDGED):
        request = build_suitability_prompt(
            criterion, candidate, story, library=library, model=model
        )
        response = backend.complete(request)
        judge_calls += 1
        try:
            verdict_value, explanation = parse_verdict(response.content)
        except JudgeParseError:
            response = backend.complete(request)
            judge_calls += 1
            try:
                verdict_value, explanation = parse_verdict(response.content)
            except JudgeParseError:
                raise InconclusiveCriterionError(criterion.id, judge_calls) from None
        passed = verdict_value == criterion.judge.expected
        results.append(
            CriterionResult(criterion.id, passed, explanation, CriterionMode.LLM_JUDGED)
        )
        if not passed:
            reason = explanation or f"Judged unsuitable against: {criterion.description}"
            return SuitabilityVerdict(
                suitable=False,
                results=tuple(results),
                failing_criterion=criterion.id,
                explanation=reason,
                judge_call_count=judge_calls,
            )
    return SuitabilityVerdict(
        suitable=True, results=tuple(results), judge_call_count=judge_calls
    )


def to_counter_example(
    verdict: SuitabilityVerdict, candidate: CandidateQuestion
) -> CounterExample:
    """Package an unsuitable verdict as synthesis feedback."""
    if verdict.suitable:
        raise ValueError("cannot build a counter-example from a suitable verdict")
    return CounterExample(
        question_text=candidate.text,
        kind=candidate.kind,
        explanation=verdict.explanation,
        source_criterion_id=verdict.failing_criterion,
    )
