"""CROWD question taxonomy and the dialogic-question suitability rubric.

Every rubric cell is registered as a criterion. Structural criteria are
decided here from the question text alone; judged criteria declare the
definition an LLM judge applies and are executed by the review module.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

if TYPE_CHECKING:
    from .stories import Story
    from .synthesis import CandidateQuestion


class QuestionKind(str, Enum):
    """The five CROWD prompt types."""

    COMPLETION = "completion"
    RECALL = "recall"
    OPEN_ENDED = "openEnded"
    WH = "wh"
    DISTANCING = "distancing"


CROWD_ORDER: tuple[QuestionKind, ...] = (
    QuestionKind.COMPLETION,
    QuestionKind.RECALL,
    QuestionKind.OPEN_ENDED,
    QuestionKind.WH,
    QuestionKind.DISTANCING,
)


@dataclass(frozen=True)
class QuestionType:
    kind: QuestionKind
    level: int
    authentic: bool


TYPE_TABLE: dict[QuestionKind, QuestionType] = {
    QuestionKind.COMPLETION: QuestionType(QuestionKind.COMPLETION, level=1, authentic=False),
    QuestionKind.RECALL: QuestionType(QuestionKind.RECALL, level=2, authentic=False),
    QuestionKind.OPEN_ENDED: QuestionType(QuestionKind.OPEN_ENDED, level=3, authentic=True),
    QuestionKind.WH: QuestionType(QuestionKind.WH, level=1, authentic=False),
    QuestionKind.DISTANCING: QuestionType(QuestionKind.DISTANCING, level=3, authentic=True),
}


def type_level(kind: QuestionKind) -> int:
    """Cognitive-complexity level (1-3) assigned to a question type."""
    return TYPE_TABLE[kind].level


def is_authentic(kind: QuestionKind) -> bool:
    """Whether the type is expected to lack a prescribed answer in the text."""
    return TYPE_TABLE[kind].authentic


@dataclass(frozen=True)
class QuestionLevel:
    level: int
    definition: str


QUESTION_LEVELS: tuple[QuestionLevel, ...] = (
    QuestionLevel(
        1,
        "Information recall questions focused on what can immediately be seen "
        "(or read) in the text. Questions ask children to define, describe, list, "
        "or name attributes or utility of objects or characters in the text.",
    ),
    QuestionLevel(
        2,
        "Questions involving information processing, asking children to analyze, "
        "compare, contrast, group, infer, sequence, or synthesize information "
        "gathered from the text.",
    ),
    QuestionLevel(
        3,
        "Questions related to the story plot that may also relate to the child's "
        "personal experiences or remote events, asking the child to apply, "
        "evaluate, hypothesize, imagine, judge, predict, or speculate about the "
        "story and their own experiences.",
    ),
)


class CriterionMode(str, Enum):
    STRUCTURAL = "structural"
    LLM_JUDGED = "llm_judged"


@dataclass(frozen=True)
class JudgeSpec:
    """How an LLM judge is asked about one criterion.

    ``expected`` is the verdict that counts as a pass; the authenticity
    criterion of an inauthentic type expects False.
    """

    property_label: str
    noun_label: str
    field_name: str
    definition: str
    expected: bool


@dataclass(frozen=True)
class RubricCriterion:
    id: str
    applicable_kinds: frozenset[QuestionKind]
    mode: CriterionMode
    description: str
    prompt_template_key: str | None = None
    judge: JudgeSpec | None = None
    check: Callable[[str], tuple[bool, str]] | None = None

    def __post_init__(self) -> None:
        if self.mode is CriterionMode.LLM_JUDGED:
            if self.prompt_template_key is None or self.judge is None:
                raise ValueError(f"judged criterion '{self.id}' needs a template key and judge spec")
        else:
            if self.prompt_template_key is not None:
                raise ValueError(f"structural criterion '{self.id}' must not carry a template key")
            if self.check is None:
                raise ValueError(f"structural criterion '{self.id}' needs a check function")


@dataclass(frozen=True)
class CriterionResult:
    criterion_id: str
    passed: bool
    explanation: str
    mode: CriterionMode

    def to_dict(self) -> dict:
        return {
            "criterion_id": self.criterion_id,
            "passed": self.passed,
            "explanation": self.explanation,
            "mode": self.mode.value,
        }


# Rubric rows, one tuple of cell texts per type. The registry is built from
# these strings and a self-test asserts each appears in some criterion
# description for its type.
RUBRIC_ROWS: dict[QuestionKind, tuple[str, ...]] = {
    QuestionKind.COMPLETION: (
        "Completion phrase is at most one sentence long",
        "Blank should be at the end of the phrase",
        "Completion phrase is on current page",
        "Deals with rhyming or repeated phrases",
    ),
    QuestionKind.RECALL: (
        "The question is not a composite of multiple questions",
        "Starts with an interrogative adverb/pronoun",
        "Asks child to summarize thematically important events",
        "Asks child to summarize elements of plot or describe sequences of events",
        "Answer cannot be determined solely from the current page",
    ),
    QuestionKind.OPEN_ENDED: (
        "Starts with an interrogative adverb/pronoun",
        "Questions should relate to story themes, soliciting speculation about or "
        "foreshadowing upcoming story events",
        "Relates to the current page of the story",
        "Solicits ideas or opinions about story elements or asks child to speculate "
        "about something related to the story (e.g., plot, characters, setting)",
        "Does not directly ask about child's personal experiences, but child may "
        "need to draw on personal experiences to answer",
        "Children should not easily be able to opt-out of answering the question",
        "Question discourages one word answers",
    ),
    QuestionKind.WH: (
        "Start with an interrogative pronoun",
        "Not a composite of multiple questions",
        "Details should pertain to objects or characters that are thematically "
        "important to the story plot",
        "Answer is in the text or pictures on the current page",
        "Focuses on story details",
    ),
    QuestionKind.DISTANCING: (
        "Start with an interrogative adverb/pronoun or a verb",
        "Relates to the current page of the story",
        "Explicitly asks the child about their experiences",
        "Relates to the current page",
        "Cannot be answered in one word",
    ),
}

INTERROGATIVE_WORDS = frozenset(
    {"what", "when", "who", "whom", "whose", "which", "where", "why", "how"}
)

# Verb starters accepted for distancing prompts; covers auxiliary/linking
# verbs plus the imperative openers seen in practice.
DISTANCING_VERB_STARTERS = frozenset(
    {
        "have", "has", "did", "do", "does", "can", "could", "would",
        "was", "were", "is", "are", "tell", "think", "imagine",
    }
)

AUTHENTICITY_DEFINITION = (
    "True if [PROMPT] does NOT have a prescribed answer on [CURRENT PAGE] or [PREVIOUS PAGES].\n"
    "False if [PROMPT] has a prescribed answer, which can be determined from "
    "[CURRENT PAGE] or [PREVIOUS PAGES]."
)

_BLANK_RE = re.compile(r"_{2,}")
_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SENTENCE_END_RE = re.compile(r"[.!?]")


def _first_word(text: str) -> str:
    match = re.search(r"[a-zA-Z]+", text)
    return match.group(0).lower() if match else ""


def _normalized_tokens(text: str) -> list[str]:
    collapsed = text.lower().replace("'", "").replace("’", "")
    return _TOKEN_RE.findall(collapsed)


def _ngrams(tokens: Sequence[str], n: int = 4) -> list[tuple[str, ...]]:
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def detect_repetition_or_rhyme(page_text: str, previous_texts: Iterable[str] = ()) -> bool:
    """Heuristic for pages that can host a completion prompt.

    True when a normalized 4-gram of the page recurs (within the page or in
    any previous page), or when two sentence-final words on the page share a
    trailing suffix of at least three letters.
    """
    tokens = _normalized_tokens(page_text)
    grams = _ngrams(tokens)
    counts = Counter(grams)
    if any(count >= 2 for count in counts.values()):
        return True
    if grams:
        gram_set = set(grams)
        for previous in previous_texts:
            if gram_set & set(_ngrams(_normalized_tokens(previous))):
                return True
    finals = []
    for sentence in re.split(r"[.!?]+", page_text):
        words = _normalized_tokens(sentence)
        if words:
            finals.append(words[-1])
    for i in range(len(finals)):
        for j in range(i + 1, len(finals)):
            a, b = finals[i], finals[j]
            if len(a) >= 3 and len(b) >= 3 and a[-3:] == b[-3:]:
                return True
    return False


def applicable_types(story: Story, page_index: int) -> set[QuestionKind]:
    """Question types that may be generated for a page.

    Recall needs at least one previous page; completion needs rhyme or
    repetition on (or leading into) the page. The other types always apply.
    """
    if not 0 <= page_index < story.page_count:
        raise IndexError(
            f"page_index {page_index} out of range for {story.page_count}-page story"
        )
    kinds = {QuestionKind.OPEN_ENDED, QuestionKind.WH, QuestionKind.DISTANCING}
    if page_index > 0:
        kinds.add(QuestionKind.RECALL)
    previous = [page.text for page in story.pages[:page_index]]
    if detect_repetition_or_rhyme(story.pages[page_index].text, previous):
        kinds.add(QuestionKind.COMPLETION)
    return kinds


def _check_interrogative_start(text: str) -> tuple[bool, str]:
    word = _first_word(text)
    if word in INTERROGATIVE_WORDS:
        return True, f"Starts with an interrogative adverb/pronoun ('{word}')."
    return False, (
        "Starts with an interrogative adverb/pronoun: the question starts with "
        f"'{word or text.strip()[:20]}', which is not an interrogative word such as "
        "'what', 'who', or 'why'."
    )


def _check_not_composite(text: str) -> tuple[bool, str]:
    count = text.count("?")
    if count <= 1:
        return True, "The question is not a composite of multiple questions."
    return False, (
        "The question is not a composite of multiple questions: it contains "
        f"{count} question marks, so it reads as several questions joined together."
    )


def _check_blank_at_end(text: str) -> tuple[bool, str]:
    matches = list(_BLANK_RE.finditer(text))
    if not matches:
        return False, (
            "Blank should be at the end of the phrase: the completion phrase has "
            "no blank (two or more underscores)."
        )
    tail = text[matches[-1].end() :]
    if re.search(r"\w", tail):
        return False, (
            "Blank should be at the end of the phrase: words continue after the blank."
        )
    return True, "Blank should be at the end of the phrase."


def _check_single_sentence(text: str) -> tuple[bool, str]:
    match = _BLANK_RE.search(text)
    before = text[: match.start()] if match else text
    terminals = len(_SENTENCE_END_RE.findall(before))
    if terminals <= 1:
        return True, "Completion phrase is at most one sentence long."
    return False, (
        "Completion phrase is at most one sentence long: found "
        f"{terminals} sentence endings before the blank."
    )


def _check_distancing_starter(text: str) -> tuple[bool, str]:
    word = _first_word(text)
    if word in INTERROGATIVE_WORDS or word in DISTANCING_VERB_STARTERS:
        return True, f"Start with an interrogative adverb/pronoun or a verb ('{word}')."
    return False, (
        "Start with an interrogative adverb/pronoun or a verb: the question starts "
        f"with '{word or text.strip()[:20]}', which is neither."
    )


def _check_repetition_gate(text: str) -> tuple[bool, str]:
    # Enforced when the page is chosen: completion is only offered on pages
    # where rhyme or repetition was detected, so the text check passes here.
    return True, (
        "Deals with rhyming or repeated phrases: completion prompts are only "
        "offered on pages where rhyme or repetition was detected."
    )


def _structural(
    cid: str, kinds: Iterable[QuestionKind], description: str, check: Callable[[str], tuple[bool, str]]
) -> RubricCriterion:
    return RubricCriterion(
        id=cid,
        applicable_kinds=frozenset(kinds),
        mode=CriterionMode.STRUCTURAL,
        description=description,
        check=check,
    )


def _judged(
    cid: str,
    kinds: Iterable[QuestionKind],
    description: str,
    judge: JudgeSpec,
) -> RubricCriterion:
    return RubricCriterion(
        id=cid,
        applicable_kinds=frozenset(kinds),
        mode=CriterionMode.LLM_JUDGED,
        description=description,
        prompt_template_key="suitability",
        judge=judge,
    )


def _relevance_judge(cells: Sequence[str]) -> JudgeSpec:
    joined = "; ".join(cells)
    return JudgeSpec(
        property_label="RELEVANT",
        noun_label="RELEVANCE",
        field_name="Relevant",
        definition=(
            f"True if [PROMPT] satisfies all of the following: {joined}.\n"
            "False otherwise."
        ),
        expected=True,
    )


def _authenticity_judge(kind: QuestionKind) -> JudgeSpec:
    return JudgeSpec(
        property_label="AUTHENTIC",
        noun_label="AUTHENTICITY",
        field_name="Authentic",
        definition=AUTHENTICITY_DEFINITION,
        expected=is_authentic(kind),
    )


def _type_specific_judge(cells: Sequence[str]) -> JudgeSpec:
    joined = "; ".join(cells)
    return JudgeSpec(
        property_label="SUITABLE",
        noun_label="SUITABILITY",
        field_name="Suitable",
        definition=(
            f"True if [PROMPT] satisfies all of the following: {joined}.\n"
            "False otherwise."
        ),
        expected=True,
    )


def _build_criteria() -> tuple[RubricCriterion, ...]:
    c = QuestionKind.COMPLETION
    r = QuestionKind.RECALL
    o = QuestionKind.OPEN_ENDED
    w = QuestionKind.WH
    d = QuestionKind.DISTANCING
    rows = RUBRIC_ROWS
    return (
        # Completion
        _structural("completion.single_sentence", [c], rows[c][0], _check_single_sentence),
        _structural("completion.blank_at_end", [c], rows[c][1], _check_blank_at_end),
        _structural("completion.repetition_or_rhyme", [c], rows[c][3], _check_repetition_gate),
        _judged("completion.relevance", [c], rows[c][2], _relevance_judge([rows[c][2]])),
        _judged(
            "completion.authenticity",
            [c],
            "Inauthentic: a completion phrase has a prescribed answer in the text.",
            _authenticity_judge(c),
        ),
        # Recall
        _structural("recall.interrogative_start", [r], rows[r][1], _check_interrogative_start),
        _structural("recall.not_composite", [r], rows[r][0], _check_not_composite),
        _judged("recall.relevance", [r], rows[r][2], _relevance_judge([rows[r][2]])),
        _judged(
            "recall.authenticity",
            [r],
            "Inauthentic: a recall question has a prescribed answer in the story so far.",
            _authenticity_judge(r),
        ),
        _judged(
            "recall.type_specific",
            [r],
            "; ".join(rows[r][3:5]),
            _type_specific_judge(rows[r][3:5]),
        ),
        # Open-ended
        _structural("openEnded.interrogative_start", [o], rows[o][0], _check_interrogative_start),
        _judged(
            "openEnded.relevance",
            [o],
            "; ".join(rows[o][1:3]),
            _relevance_judge(rows[o][1:3]),
        ),
        _judged(
            "openEnded.authenticity",
            [o],
            "Authentic: an open-ended question must not have a prescribed answer in the text.",
            _authenticity_judge(o),
        ),
        _judged(
            "openEnded.type_specific",
            [o],
            "; ".join(rows[o][3:7]),
            _type_specific_judge(rows[o][3:7]),
        ),
        # Wh-
        _structural("wh.interrogative_start", [w], rows[w][0], _check_interrogative_start),
        _structural("wh.not_composite", [w], rows[w][1], _check_not_composite),
        _judged("wh.relevance", [w], "; ".join(rows[w][2:4]), _relevance_judge(rows[w][2:4])),
        _judged(
            "wh.authenticity",
            [w],
            "Inauthentic: a wh- question's answer is in the text on the current page.",
            _authenticity_judge(w),
        ),
        _judged("wh.type_specific", [w], rows[w][4], _type_specific_judge([rows[w][4]])),
        # Distancing
        _structural("distancing.starter", [d], rows[d][0], _check_distancing_starter),
        _judged(
            "distancing.relevance",
            [d],
            "; ".join([rows[d][1], rows[d][3]]),
            _relevance_judge([rows[d][1]]),
        ),
        _judged(
            "distancing.authenticity",
            [d],
            "Authentic: a distancing question must not have a prescribed answer in the text.",
            _authenticity_judge(d),
        ),
        _judged(
            "distancing.type_specific",
            [d],
            "; ".join(rows[d][2:5]),
            _type_specific_judge([rows[d][2], rows[d][4]]),
        ),
    )


CRITERIA: tuple[RubricCriterion, ...] = _build_criteria()

_BY_ID = {criterion.id: criterion for criterion in CRITERIA}


def criterion_by_id(criterion_id: str) -> RubricCriterion:
    return _BY_ID[criterion_id]


def criteria_for(
    kind: QuestionKind, mode: CriterionMode | None = None
) -> tuple[RubricCriterion, ...]:
    """Criteria applicable to a question type, in registry order."""
    return tuple(
        criterion
        for criterion in CRITERIA
        if kind in criterion.applicable_kinds and (mode is None or criterion.mode is mode)
    )


def structural_check(candidate: CandidateQuestion) -> tuple[CriterionResult, ...]:
    """Run every structural criterion applicable to the candidate's type.

    Pure: identical inputs always produce identical results. Each result's
    explanation is phrased so it can serve directly as counter-example text.
    """
    if not candidate.text or not candidate.text.strip():
        raise ValueError("candidate question text is empty")
    results = []
    for criterion in criteria_for(candidate.kind, CriterionMode.STRUCTURAL):
        passed, explanation = criterion.check(candidate.text)
        results.append(
            CriterionResult(criterion.id, passed, explanation, CriterionMode.STRUCTURAL)
        )
    return tuple(results)


def registry_audit_text() -> str:
    """Human-readable audit of the criterion registry."""
    lines = ["Suitability criterion registry", "=" * 30, ""]
    for kind in CROWD_ORDER:
        qt = TYPE_TABLE[kind]
        lines.append(
            f"{kind.value} (level {qt.level}, "
            f"{'authentic' if qt.authentic else 'inauthentic'})"
        )
        for criterion in criteria_for(kind):
            applies = ", ".join(sorted(k.value for k in criterion.applicable_kinds))
            lines.append(f"  [{criterion.mode.value}] {criterion.id} (applies to: {applies})")
            lines.append(f"      {criterion.description}")
        lines.append("")
    return "\n".join(lines)
