"""File-backed persistence: stories, question records, and session event logs.

Everything is plain JSON under one data directory, so a restarted service
sees exactly the state it left behind. Question records are cached by
(story content hash, page index, prompt version, model); concurrent misses
for the same key coalesce into a single generation run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .backends import ChatBackend
from .loop import GenerationOutcome, LoopConfig, _page_rng, generate_for_page
from .prompts import PromptLibrary, bundled_library
from .stories import Story, StoryError, parse_story
from .synthesis import CandidateQuestion

logger = logging.getLogger(__name__)

EVENT_KINDS = frozenset(
    {"session_start", "page_turn", "question_shown", "info_opened", "session_end"}
)


class StoreError(RuntimeError):
    pass


class UnknownStoryError(StoreError):
    pass


class UnknownPageError(StoreError):
    pass


class UnknownSessionError(StoreError):
    pass


class StoryConflictError(StoreError):
    """A different story already exists under the same id."""


class EventValidationError(StoreError):
    pass


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    story_id: str
    page_index: int
    kind: str
    text: str
    verdict: dict
    prompt_version: str
    model: str
    created_at: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "story_id": self.story_id,
            "page_index": self.page_index,
            "kind": self.kind,
            "text": self.text,
            "verdict": self.verdict,
            "prompt_version": self.prompt_version,
            "model": self.model,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QuestionRecord":
        return cls(
            question_id=payload["question_id"],
            story_id=payload["story_id"],
            page_index=payload["page_index"],
            kind=payload["kind"],
            text=payload["text"],
            verdict=payload["verdict"],
            prompt_version=payload["prompt_version"],
            model=payload["model"],
            created_at=payload["created_at"],
        )


@dataclass(frozen=True)
class SessionEvent:
    session_id: str
    timestamp_ms: int
    kind: str
    page_index: int | None = None
    question_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "timestamp_ms": self.timestamp_ms,
            "kind": self.kind,
            "page_index": self.page_index,
            "question_id": self.question_id,
        }


def _read_json(path: Path):
    return json.loads(path.read_text("utf-8"))


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False), "utf-8")
    os.replace(tmp, path)


def question_cache_key(
    source_hash: str, page_index: int, prompt_version: str, model: str
) -> str:
    raw = f"{source_hash}:{page_index}:{prompt_version}:{model}"
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:24]


def question_id_for(
    source_hash: str, page_index: int, prompt_version: str, model: str, kind: str, text: str
) -> str:
    """Deterministic question id: a replayed generation run reproduces it."""
    raw = f"{source_hash}:{page_index}:{prompt_version}:{model}:{kind}:{text}"
    return "q" + hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


def _utc_now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


class Store:
    """Data directory layout:

    - ``stories/{story_id}.json`` story documents
    - ``questions/{cache_key}.json`` accepted question records
    - ``outcomes/{cache_key}.json`` full loop traces for audit
    - ``sessions/{session_id}.json`` + ``.events.jsonl`` session logs
    """

    def __init__(self, root: Path | str, clock: Callable[[], str] = _utc_now) -> None:
        self.root = Path(root)
        self._clock = clock
        self._flight_guard = threading.Lock()
        self._inflight: dict[str, threading.Lock] = {}
        self._session_guard = threading.Lock()
        self._session_last_ts: dict[str, int] = {}
        for sub in ("stories", "questions", "outcomes", "sessions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    # -- stories -----------------------------------------------------------

    def _story_path(self, story_id: str) -> Path:
        return self.root / "stories" / f"{story_id}.json"

    def ingest_story(self, document: str) -> str:
        """Persist a story document; idempotent on identical content."""
        story = parse_story(document)
        for existing in self.iter_stories():
            if existing.source_hash == story.source_hash:
                return existing.id
        path = self._story_path(story.id)
        if path.exists():
            raise StoryConflictError(
                f"a different story already uses id '{story.id}'"
            )
        _write_json(
            path,
            {"id": story.id, "title": story.title, "pages": [p.text for p in story.pages]},
        )
        logger.info("ingested story '%s' (%d pages)", story.id, story.page_count)
        return story.id

    def get_story(self, story_id: str) -> Story | None:
        path = self._story_path(story_id)
        if not path.exists():
            return None
        return parse_story(path.read_text("utf-8"))

    def require_story(self, story_id: str) -> Story:
        story = self.get_story(story_id)
        if story is None:
            raise UnknownStoryError(f"unknown story '{story_id}'")
        return story

    def iter_stories(self) -> Iterator[Story]:
        for path in sorted((self.root / "stories").glob("*.json")):
            try:
                yield parse_story(path.read_text("utf-8"))
            except StoryError:
                logger.warning("skipping unreadable story file %s", path)

    # -- question records ----------------------------------------------------

    def _question_path(self, key: str) -> Path:
        return self.root / "questions" / f"{key}.json"

    def get_cached_question(
        self, story_id: str, page_index: int, prompt_version: str, model: str
    ) -> QuestionRecord | None:
        story = self.require_story(story_id)
        self._check_page(story, page_index)
        key = question_cache_key(story.source_hash, page_index, prompt_version, model)
        path = self._question_path(key)
        if not path.exists():
            return None
        return QuestionRecord.from_dict(_read_json(path))

    def get_question(
        self,
        story_id: str,
        page_index: int,
        mode: str = "cached",
        *,
        backend: ChatBackend | None = None,
        library: PromptLibrary | None = None,
        config: LoopConfig | None = None,
    ) -> QuestionRecord | None:
        """Fetch the page's question; optionally generate and persist on miss.

        ``cached`` mode never touches the backend. ``generate`` mode runs the
        loop on a miss, persisting the record and the full trace; a
        questionless outcome returns None and is not cached.
        """
        if mode not in ("cached", "generate"):
            raise ValueError(f"unknown question mode '{mode}'")
        library = library or bundled_library()
        config = config or LoopConfig()
        story = self.require_story(story_id)
        self._check_page(story, page_index)
        key = question_cache_key(
            story.source_hash, page_index, library.version, config.model
        )
        path = self._question_path(key)
        if path.exists():
            return QuestionRecord.from_dict(_read_json(path))
        if mode == "cached":
            return None
        if backend is None:
            raise StoreError("generate mode requires a backend")
        with self._key_lock(key):
            if path.exists():
                return QuestionRecord.from_dict(_read_json(path))
            rng = _page_rng(config.rng_seed, page_index)
            outcome = generate_for_page(
                backend, story, page_index, config, rng, library=library
            )
            _write_json(self.root / "outcomes" / f"{key}.json", outcome.to_dict())
            question = outcome.question
            if question is None:
                return None
            record = self._record_from(story, question, outcome, library.version, config.model)
            _write_json(path, record.to_dict())
            return record

    def _record_from(
        self,
        story: Story,
        question: CandidateQuestion,
        outcome: GenerationOutcome,
        prompt_version: str,
        model: str,
    ) -> QuestionRecord:
        verdict = outcome.verdict_for(question)
        return QuestionRecord(
            question_id=question_id_for(
                story.source_hash,
                question.page_index,
                prompt_version,
                model,
                question.kind.value,
                question.text,
            ),
            story_id=story.id,
            page_index=question.page_index,
            kind=question.kind.value,
            text=question.text,
            verdict=verdict.to_dict() if verdict else {"suitable": True, "results": []},
            prompt_version=prompt_version,
            model=model,
            created_at=self._clock(),
        )

    def _key_lock(self, key: str) -> threading.Lock:
        with self._flight_guard:
            return self._inflight.setdefault(key, threading.Lock())

    def list_questions(self, story_id: str) -> list[QuestionRecord]:
        self.require_story(story_id)
        records = []
        for path in sorted((self.root / "questions").glob("*.json")):
            record = QuestionRecord.from_dict(_read_json(path))
            if record.story_id == story_id:
                records.append(record)
        records.sort(key=lambda record: (record.page_index, record.question_id))
        return records

    def find_question(self, question_id: str) -> QuestionRecord | None:
        for path in (self.root / "questions").glob("*.json"):
            record = QuestionRecord.from_dict(_read_json(path))
            if record.question_id == question_id:
                return record
        return None

    @staticmethod
    def _check_page(story: Story, page_index: int) -> None:
        if not 0 <= page_index < story.page_count:
            raise UnknownPageError(
                f"page {page_index} out of range for story '{story.id}'"
            )

    # -- sessions ------------------------------------------------------------

    def _session_meta_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.json"

    def _session_events_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.events.jsonl"

    def create_session(self, story_id: str, questions_enabled: bool = True) -> str:
        self.require_story(story_id)
        session_id = uuid.uuid4().hex[:12]
        _write_json(
            self._session_meta_path(session_id),
            {
                "session_id": session_id,
                "story_id": story_id,
                "questions_enabled": questions_enabled,
                "created_at": self._clock(),
            },
        )
        return session_id

    def session_meta(self, session_id: str) -> dict:
        path = self._session_meta_path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"unknown session '{session_id}'")
        return _read_json(path)

    def record_event(
        self,
        session_id: str,
        kind: str,
        page_index: int | None = None,
        question_id: str | None = None,
    ) -> SessionEvent:
        """Append a session event; per-session order is timestamp-monotonic."""
        meta = self.session_meta(session_id)
        if kind not in EVENT_KINDS:
            raise EventValidationError(f"unknown event kind '{kind}'")
        story = self.require_story(meta["story_id"])
        if kind in ("page_turn", "question_shown"):
            if page_index is None:
                raise EventValidationError(f"event '{kind}' requires a page_index")
            if not 0 <= page_index < story.page_count:
                raise EventValidationError(
                    f"page_index {page_index} out of range for story '{story.id}'"
                )
        if kind == "question_shown":
            if question_id is None:
                raise EventValidationError("event 'question_shown' requires a question_id")
            record = self.find_question(question_id)
            if record is None or record.story_id != story.id or record.page_index != page_index:
                raise EventValidationError(
                    f"question '{question_id}' was not generated for page {page_index} "
                    f"of story '{story.id}'"
                )
        with self._session_guard:
            last = self._session_last_ts.get(session_id)
            if last is None:
                last = self._last_event_ts(session_id)
            timestamp_ms = max(int(time.time() * 1000), last + 1)
            event = SessionEvent(session_id, timestamp_ms, kind, page_index, question_id)
            events_path = self._session_events_path(session_id)
            with events_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
            self._session_last_ts[session_id] = timestamp_ms
        return event

    def _last_event_ts(self, session_id: str) -> int:
        path = self._session_events_path(session_id)
        if not path.exists():
            return 0
        last = 0
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    last = json.loads(line)["timestamp_ms"]
        return last

    def session_events(self, session_id: str) -> list[SessionEvent]:
        self.session_meta(session_id)
        path = self._session_events_path(session_id)
        if not path.exists():
            return []
        events = []
        with path.open(encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    payload = json.loads(line)
                    events.append(
                        SessionEvent(
                            session_id=payload["session_id"],
                            timestamp_ms=payload["timestamp_ms"],
                            kind=payload["kind"],
                            page_index=payload.get("page_index"),
                            question_id=payload.get("question_id"),
                        )
                    )
        return events
