"""Per-page synthesis-review loop: random type selection, bounded retries, fallback."""

from __future__ import annotations

import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .backends import BackendError, ChatBackend, DEFAULT_MODEL
from .prompts import PromptLibrary, bundled_library
from .review import (
    CounterExample,
    InconclusiveCriterionError,
    SuitabilityVerdict,
    evaluate,
    to_counter_example,
)
from .rubric import CROWD_ORDER, QuestionKind, applicable_types
from .stories import Story
from .synthesis import CandidateQuestion, GenerationParseError, synthesize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopConfig:
    attempts_per_type: int = 3
    desired_count: int = 1
    rng_seed: int | str | None = None
    page_parallelism: int = 1
    model: str = DEFAULT_MODEL

    def __post_init__(self) -> None:
        if self.attempts_per_type < 1:
            raise ValueError("attempts_per_type must be at least 1")
        if self.desired_count < 1:
            raise ValueError("desired_count must be at least 1")
        if self.page_parallelism < 1:
            raise ValueError("page_parallelism must be at least 1")


@dataclass(frozen=True)
class AttemptRecord:
    """One synthesize-evaluate cycle. ``error`` is set when the cycle died
    before producing a verdict (unparseable output, inconclusive judge)."""

    kind: QuestionKind
    attempt: int
    candidate: CandidateQuestion | None = None
    verdict: SuitabilityVerdict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "attempt": self.attempt,
            "candidate": self.candidate.text if self.candidate else None,
            "verdict": self.verdict.to_dict() if self.verdict else None,
            "error": self.error,
        }


@dataclass(frozen=True)
class GenerationOutcome:
    """Result of one page's loop, with the full attempt trace."""

    questions: tuple[CandidateQuestion, ...]
    attempts: tuple[AttemptRecord, ...]
    types_tried: tuple[QuestionKind, ...]
    llm_call_count: int
    error: str | None = None

    @property
    def question(self) -> CandidateQuestion | None:
        return self.questions[0] if self.questions else None

    def verdict_for(self, candidate: CandidateQuestion) -> SuitabilityVerdict | None:
        for record in self.attempts:
            if record.candidate is candidate and record.verdict is not None:
                return record.verdict
        return None

    def to_dict(self) -> dict:
        return {
            "questions": [q.text for q in self.questions],
            "attempts": [record.to_dict() for record in self.attempts],
            "types_tried": [kind.value for kind in self.types_tried],
            "llm_call_count": self.llm_call_count,
            "error": self.error,
        }


class PageGenerationError(RuntimeError):
    """A backend hard failure aborted a page's loop; carries the partial trace."""

    def __init__(self, message: str, partial: GenerationOutcome) -> None:
        super().__init__(message)
        self.partial = partial


def generate_for_page(
    backend: ChatBackend,
    story: Story,
    page_index: int,
    config: LoopConfig = LoopConfig(),
    rng: random.Random | None = None,
    *,
    library: PromptLibrary | None = None,
) -> GenerationOutcome:
    """Run the synthesis-review loop for one page.

    A type is drawn uniformly at random from the applicable pool. Each type
    gets up to ``attempts_per_type`` cycles, with every rejection fed back
    into the next attempt as a counter-example; a type that exhausts its
    attempts leaves the pool. Feedback never crosses types or pages. An
    empty pool ends the loop with a questionless outcome.
    """
    rng = rng if rng is not None else random.Random(config.rng_seed)
    library = library or bundled_library()
    pool = [kind for kind in CROWD_ORDER if kind in applicable_types(story, page_index)]
    accepted: list[CandidateQuestion] = []
    trace: list[AttemptRecord] = []
    types_tried: list[QuestionKind] = []
    calls = 0

    def partial(error: str | None = None) -> GenerationOutcome:
        return GenerationOutcome(
            tuple(accepted), tuple(trace), tuple(types_tried), calls, error=error
        )

    while pool and len(accepted) < config.desired_count:
        kind = pool[rng.randrange(len(pool))]
        types_tried.append(kind)
        feedback: list[CounterExample] = []
        succeeded = False
        for attempt in range(1, config.attempts_per_type + 1):
            try:
                candidate = synthesize(
                    backend,
                    story,
                    page_index,
                    kind,
                    tuple(feedback),
                    attempt=attempt,
                    library=library,
                    model=config.model,
                )
                calls += 1
            except GenerationParseError as exc:
                calls += 1
                trace.append(AttemptRecord(kind, attempt, error=f"unusable output: {exc}"))
                continue
            except BackendError as exc:
                raise PageGenerationError(str(exc), partial(str(exc))) from exc
            try:
                verdict = evaluate(backend, candidate, story, library=library, model=config.model)
                calls += verdict.judge_call_count
            except InconclusiveCriterionError as exc:
                calls += exc.judge_call_count
                trace.append(AttemptRecord(kind, attempt, candidate=candidate, error=str(exc)))
                continue
            except BackendError as exc:
                raise PageGenerationError(str(exc), partial(str(exc))) from exc
            trace.append(AttemptRecord(kind, attempt, candidate=candidate, verdict=verdict))
            if verdict.suitable:
                accepted.append(candidate)
                succeeded = True
                break
            feedback.append(to_counter_example(verdict, candidate))
        if not succeeded:
            pool.remove(kind)
            logger.debug(
                "page %d: type '%s' exhausted after %d attempts",
                page_index, kind.value, config.attempts_per_type,
            )
    return partial()


def _page_rng(seed: int | str | None, page_index: int) -> random.Random:
    if seed is None:
        return random.Random()
    return random.Random(f"{seed}:{page_index}")


def generate_for_story(
    backend: ChatBackend,
    story: Story,
    config: LoopConfig = LoopConfig(),
    *,
    library: PromptLibrary | None = None,
) -> dict[int, GenerationOutcome]:
    """Run the loop for every page independently.

    The returned map is total over pages: a page whose pool was exhausted
    maps to a questionless outcome, and a page whose backend hard-failed
    maps to an outcome carrying the error and partial trace.
    """
    library = library or bundled_library()

    def run_page(page_index: int) -> GenerationOutcome:
        rng = _page_rng(config.rng_seed, page_index)
        try:
            return generate_for_page(
                backend, story, page_index, config, rng, library=library
            )
        except PageGenerationError as exc:
            logger.warning("page %d generation failed: %s", page_index, exc)
            return exc.partial

    indexes = range(story.page_count)
    if config.page_parallelism > 1:
        with ThreadPoolExecutor(max_workers=config.page_parallelism) as pool:
            outcomes = list(pool.map(run_page, indexes))
    else:
        outcomes = [run_page(index) for index in indexes]
    return dict(zip(indexes, outcomes))
