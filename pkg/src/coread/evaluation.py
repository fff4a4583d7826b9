"""Ablation runs, rating statistics, and inter-rater agreement."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from io import StringIO
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .backends import BackendError, ChatBackend
from .loop import LoopConfig, PageGenerationError, generate_for_page, _page_rng
from .prompts import PromptLibrary, bundled_library
from .rubric import CROWD_ORDER, applicable_types
from .stories import Story
from .synthesis import GenerationParseError, synthesize

logger = logging.getLogger(__name__)

SUITABILITY_THRESHOLD = 3


class System(str, Enum):
    FULL = "full"
    ABLATED = "ablated"


class UndefinedRateError(ValueError):
    """No rating records exist for the requested system."""


class DegenerateAgreementError(ValueError):
    """Both raters used a single identical label; chance agreement is 1."""


@dataclass(frozen=True)
class RatingRecord:
    question_id: str
    rater_id: str
    score: int
    system: System

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3, 4, 5):
            raise ValueError(f"score must be an integer 1-5, got {self.score!r}")


@dataclass(frozen=True)
class GeneratedQuestion:
    question_id: str
    story_id: str
    page_index: int
    kind: str
    text: str
    system: System
    slot: int


@dataclass(frozen=True)
class AblationRun:
    """Question sets produced by the full pipeline and the ablated one."""

    full: tuple[GeneratedQuestion, ...]
    ablated: tuple[GeneratedQuestion, ...]
    failures: tuple[str, ...]
    seed: int

    @property
    def questions(self) -> tuple[GeneratedQuestion, ...]:
        return self.full + self.ablated

    def key(self) -> dict[str, str]:
        return {q.question_id: q.system.value for q in self.questions}

    def blinded_order(self) -> tuple[GeneratedQuestion, ...]:
        """Both systems' questions interleaved by a seed-driven shuffle."""
        combined = list(self.questions)
        random.Random(self.seed).shuffle(combined)
        return tuple(combined)

    def export(self, directory: Path | str) -> dict[str, Path]:
        """Write the rater-facing files (blinded) and the system key.

        - questions_blinded.csv: question_id, story_id, page_index, text
        - ratings_template.csv: question_id, rater_id, score (to be filled in)
        - key.csv: question_id, system (never shown to raters)
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        blinded = self.blinded_order()
        questions_path = directory / "questions_blinded.csv"
        with questions_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["question_id", "story_id", "page_index", "text"])
            for question in blinded:
                writer.writerow(
                    [question.question_id, question.story_id, question.page_index, question.text]
                )
        template_path = directory / "ratings_template.csv"
        with template_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["question_id", "rater_id", "score"])
            for question in blinded:
                writer.writerow([question.question_id, "", ""])
        key_path = directory / "key.csv"
        with key_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["question_id", "system"])
            for question in self.questions:
                writer.writerow([question.question_id, question.system.value])
        return {"questions": questions_path, "template": template_path, "key": key_path}


def _ablation_question_id(system: System, story: Story, slot: int, text: str) -> str:
    raw = f"{system.value}:{story.source_hash}:{slot}:{text}"
    return "e" + hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def run_ablation(
    backend: ChatBackend,
    corpus: Sequence[Story],
    per_story_count: int,
    seed: int,
    *,
    library: PromptLibrary | None = None,
    config: LoopConfig | None = None,
) -> AblationRun:
    """Generate matched question sets from the full loop and from the bare
    synthesizer (no review, first parseable output accepted).

    Slots are spread round-robin across pages; type choice is random over
    the page's applicable pool in both arms. Backend failures are recorded
    per slot and the run continues.
    """
    if not corpus:
        raise ValueError("corpus must contain at least one story")
    library = library or bundled_library()
    config = config or LoopConfig()
    full: list[GeneratedQuestion] = []
    ablated: list[GeneratedQuestion] = []
    failures: list[str] = []

    for story in corpus:
        for slot in range(per_story_count):
            page_index = slot % story.page_count
            rng = _page_rng(f"{seed}:full:{story.id}:{slot}", page_index)
            try:
                outcome = generate_for_page(
                    backend, story, page_index, config, rng, library=library
                )
            except PageGenerationError as exc:
                failures.append(f"full:{story.id}:{slot}: {exc}")
                continue
            if outcome.question is None:
                failures.append(f"full:{story.id}:{slot}: pool exhausted")
                continue
            question = outcome.question
            full.append(
                GeneratedQuestion(
                    question_id=_ablation_question_id(System.FULL, story, slot, question.text),
                    story_id=story.id,
                    page_index=page_index,
                    kind=question.kind.value,
                    text=question.text,
                    system=System.FULL,
                    slot=slot,
                )
            )

    for story in corpus:
        for slot in range(per_story_count):
            page_index = slot % story.page_count
            rng = _page_rng(f"{seed}:ablated:{story.id}:{slot}", page_index)
            pool = [k for k in CROWD_ORDER if k in applicable_types(story, page_index)]
            kind = pool[rng.randrange(len(pool))]
            try:
                candidate = synthesize(
                    backend, story, page_index, kind, library=library, model=config.model
                )
            except (GenerationParseError, BackendError) as exc:
                failures.append(f"ablated:{story.id}:{slot}: {exc}")
                continue
            ablated.append(
                GeneratedQuestion(
                    question_id=_ablation_question_id(
                        System.ABLATED, story, slot, candidate.text
                    ),
                    story_id=story.id,
                    page_index=page_index,
                    kind=kind.value,
                    text=candidate.text,
                    system=System.ABLATED,
                    slot=slot,
                )
            )

    return AblationRun(tuple(full), tuple(ablated), tuple(failures), seed)


def suitability_rate(records: Iterable[RatingRecord], system: System) -> float:
    """Proportion of a system's ratings at or above the suitability threshold.

    Each rating record counts once, so a question with several raters
    contributes one term per rater.
    """
    selected = [record for record in records if record.system is system]
    if not selected:
        raise UndefinedRateError(f"no rating records for system '{system.value}'")
    suitable = sum(1 for record in selected if record.score >= SUITABILITY_THRESHOLD)
    return suitable / len(selected)


def mean_score(records: Iterable[RatingRecord], system: System) -> float:
    selected = [record.score for record in records if record.system is system]
    if not selected:
        raise UndefinedRateError(f"no rating records for system '{system.value}'")
    return sum(selected) / len(selected)


def cohens_kappa(ratings_a: Sequence, ratings_b: Sequence) -> float:
    """Chance-corrected agreement between two raters over shared items.

    kappa = (p_o - p_e) / (1 - p_e), with p_o the observed agreement and
    p_e the chance agreement implied by each rater's label marginals.
    """
    if len(ratings_a) != len(ratings_b):
        raise ValueError("rating sequences must have equal length")
    total = len(ratings_a)
    if total == 0:
        raise ValueError("rating sequences must be non-empty")
    observed = sum(1 for a, b in zip(ratings_a, ratings_b) if a == b) / total
    counts_a = Counter(ratings_a)
    counts_b = Counter(ratings_b)
    labels = set(counts_a) | set(counts_b)
    expected = sum(
        (counts_a.get(label, 0) / total) * (counts_b.get(label, 0) / total)
        for label in labels
    )
    if expected == 1.0:
        raise DegenerateAgreementError(
            "both raters used one identical label; agreement is degenerate"
        )
    return (observed - expected) / (1.0 - expected)


def write_ratings_csv(
    records: Iterable[RatingRecord], path: Path | str, *, blinded: bool = False
) -> None:
    """Write rating records; the blinded variant omits the system column."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if blinded:
            writer.writerow(["question_id", "rater_id", "score"])
            for record in records:
                writer.writerow([record.question_id, record.rater_id, record.score])
        else:
            writer.writerow(["question_id", "rater_id", "score", "system"])
            for record in records:
                writer.writerow(
                    [record.question_id, record.rater_id, record.score, record.system.value]
                )


def read_ratings_csv(
    path: Path | str, key: Mapping[str, str] | None = None
) -> list[RatingRecord]:
    """Read rating records; a blinded file needs the system key to join on."""
    records = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for row in csv.DictReader(handle):
            system_value = row.get("system") or (key or {}).get(row["question_id"])
            if system_value is None:
                raise ValueError(
                    f"no system label for question '{row['question_id']}' "
                    "(blinded file without a key?)"
                )
            records.append(
                RatingRecord(
                    question_id=row["question_id"],
                    rater_id=row["rater_id"],
                    score=int(row["score"]),
                    system=System(system_value),
                )
            )
    return records


@dataclass(frozen=True)
class AblationReport:
    """Summary statistics over rated questions from both systems."""

    question_counts: dict
    rating_counts: dict
    suitability_rates: dict
    mean_scores: dict
    kind_counts: dict
    rater_distributions: dict

    @classmethod
    def build(
        cls,
        ratings: Sequence[RatingRecord],
        kinds_by_question: Mapping[str, str] | None = None,
    ) -> "AblationReport":
        kinds_by_question = kinds_by_question or {}
        question_counts: dict[str, int] = {}
        rating_counts: dict[str, int] = {}
        rates: dict[str, float] = {}
        means: dict[str, float] = {}
        kind_counts: dict[str, Counter] = {}
        for system in System:
            selected = [record for record in ratings if record.system is system]
            if not selected:
                continue
            question_counts[system.value] = len({r.question_id for r in selected})
            rating_counts[system.value] = len(selected)
            rates[system.value] = suitability_rate(ratings, system)
            means[system.value] = mean_score(ratings, system)
            kinds = Counter(
                kinds_by_question.get(record.question_id, "unknown") for record in selected
            )
            kind_counts[system.value] = kinds
        rater_distributions: dict[str, Counter] = defaultdict(Counter)
        for record in ratings:
            rater_distributions[record.rater_id][record.score] += 1
        return cls(
            question_counts=question_counts,
            rating_counts=rating_counts,
            suitability_rates=rates,
            mean_scores=means,
            kind_counts={system: dict(counts) for system, counts in kind_counts.items()},
            rater_distributions={
                rater: dict(counts) for rater, counts in sorted(rater_distributions.items())
            },
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "question_counts": self.question_counts,
                "rating_counts": self.rating_counts,
                "suitability_rates": self.suitability_rates,
                "mean_scores": self.mean_scores,
                "kind_counts": self.kind_counts,
                "rater_distributions": self.rater_distributions,
            },
            indent=2,
            sort_keys=True,
        )

    def to_table(self) -> str:
        out = StringIO()
        out.write(f"{'system':<10}{'questions':>10}{'ratings':>10}{'suitable':>10}{'mean':>8}\n")
        for system in sorted(self.suitability_rates):
            out.write(
                f"{system:<10}"
                f"{self.question_counts.get(system, 0):>10}"
                f"{self.rating_counts.get(system, 0):>10}"
                f"{self.suitability_rates[system]:>9.1%}"
                f"{self.mean_scores[system]:>8.2f}\n"
            )
        out.write("\nper-type question ratings:\n")
        for system, counts in sorted(self.kind_counts.items()):
            parts = ", ".join(f"{kind}={count}" for kind, count in sorted(counts.items()))
            out.write(f"  {system}: {parts}\n")
        out.write("\nper-rater score distributions:\n")
        for rater, counts in self.rater_distributions.items():
            parts = ", ".join(f"{score}:{count}" for score, count in sorted(counts.items()))
            out.write(f"  {rater}: {parts}\n")
        return out.getvalue()
