"""Paginated story model: parsing, validation, and context-window extraction."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

# Number of previous pages supplied as context to generation and judging
# prompts unless a caller asks for a different window.
DEFAULT_CONTEXT_PAGES = 5


class StoryError(ValueError):
    """Base class for story parsing and validation failures."""


class StoryFormatError(StoryError):
    """The document is not a well-formed story file; names the offending field."""


class StoryValidationError(StoryError):
    """The document parsed but violates a story invariant."""


@dataclass(frozen=True)
class Page:
    """One page of narrative text. Immutable and safe to share."""

    index: int
    text: str

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class Story:
    """A paginated story. ``source_hash`` digests the title and page texts."""

    id: str
    title: str
    pages: tuple[Page, ...]
    source_hash: str

    @property
    def page_count(self) -> int:
        return len(self.pages)

    @property
    def word_count(self) -> int:
        return sum(page.word_count for page in self.pages)


def compute_source_hash(title: str, page_texts: Iterable[str]) -> str:
    """Digest of the canonical serialized story content.

    Covers the title and every page text, so the hash changes exactly when
    the reader-visible content changes.
    """
    canonical = json.dumps(
        {"title": title, "pages": list(page_texts)},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def story_from_fields(story_id: str, title: str, page_texts: list[str]) -> Story:
    """Build a validated Story from already-decoded fields."""
    if not isinstance(story_id, str) or not story_id:
        raise StoryFormatError("field 'id' must be a non-empty string")
    if not isinstance(title, str):
        raise StoryFormatError("field 'title' must be a string")
    if not isinstance(page_texts, list):
        raise StoryFormatError("field 'pages' must be an array of strings")
    if not page_texts:
        raise StoryValidationError("field 'pages' must contain at least one page")
    pages = []
    for index, text in enumerate(page_texts):
        if not isinstance(text, str):
            raise StoryFormatError(f"field 'pages[{index}]' must be a string")
        if not text.strip():
            raise StoryValidationError(f"page {index} has empty text")
        pages.append(Page(index=index, text=text))
    return Story(
        id=story_id,
        title=title,
        pages=tuple(pages),
        source_hash=compute_source_hash(title, page_texts),
    )


def parse_story(document: str) -> Story:
    """Parse a UTF-8 story document: ``{"id", "title", "pages": [...]}``."""
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise StoryFormatError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise StoryFormatError("document must be a JSON object")
    for field_name in ("id", "title", "pages"):
        if field_name not in payload:
            raise StoryFormatError(f"field '{field_name}' is missing")
    return story_from_fields(payload["id"], payload["title"], payload["pages"])


def serialize_story(story: Story) -> str:
    """Render a Story back into the on-disk document format."""
    return json.dumps(
        {"id": story.id, "title": story.title, "pages": [p.text for p in story.pages]},
        indent=2,
        ensure_ascii=False,
    )


def context_window(
    story: Story, page_index: int, k: int = DEFAULT_CONTEXT_PAGES
) -> tuple[str, ...]:
    """Texts of the up-to-``k`` pages before ``page_index``, in story order.

    Never includes the current page; the window is empty on the first page.
    """
    if not 0 <= page_index < story.page_count:
        raise IndexError(
            f"page_index {page_index} out of range for {story.page_count}-page story"
        )
    if k < 0:
        raise ValueError("window size k must be non-negative")
    start = max(0, page_index - k)
    return tuple(page.text for page in story.pages[start:page_index])


def fixture_names() -> tuple[str, ...]:
    """Names of the story fixtures bundled with the package."""
    files = resources.files("coread").joinpath("fixtures")
    return tuple(
        sorted(path.name[: -len(".json")] for path in files.iterdir() if path.name.endswith(".json"))
    )


def load_fixture(name: str) -> Story:
    """Load a bundled fixture story by name (see :func:`fixture_names`)."""
    document = (
        resources.files("coread").joinpath("fixtures").joinpath(f"{name}.json").read_text("utf-8")
    )
    return parse_story(document)
