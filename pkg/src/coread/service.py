"""HTTP API for story ingestion, question retrieval, and session logging."""

from __future__ import annotations

import json
import logging
import uuid

from fastapi import Body, FastAPI, HTTPException, Query

from .backends import BackendError, ChatBackend
from .loop import LoopConfig, PageGenerationError
from .prompts import PromptLibrary, bundled_library
from .store import (
    EventValidationError,
    Store,
    StoryConflictError,
    UnknownPageError,
    UnknownSessionError,
    UnknownStoryError,
)
from .stories import StoryError

logger = logging.getLogger(__name__)

# Shown by the reader's tooltip info button. Served by the API so the UI and
# its tests share one source of truth. Exactly three sentences.
INFO_POPUP_TEXT = (
    "Talking about a story while you read it helps your child build vocabulary, "
    "comprehension, and a lifelong love of books. "
    "Questions like this one invite your child to share ideas, make predictions, "
    "and connect the story to their own life. "
    "There are no wrong answers, so pause, listen, and enjoy the conversation."
)


def create_app(
    store: Store,
    *,
    backend: ChatBackend | None = None,
    library: PromptLibrary | None = None,
    loop_config: LoopConfig | None = None,
) -> FastAPI:
    """Build the service around a store and an optional generation backend.

    Without a backend the service still serves stories, cached questions,
    and session logging; generate-mode question requests return 503.
    """
    library = library or bundled_library()
    loop_config = loop_config or LoopConfig()
    app = FastAPI(title="coread", version="0.1.0")

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/meta/info-text")
    def info_text() -> dict:
        return {"text": INFO_POPUP_TEXT}

    @app.post("/stories")
    def ingest_story(payload: dict = Body(...)) -> dict:
        try:
            story_id = store.ingest_story(json.dumps(payload, ensure_ascii=False))
        except StoryError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except StoryConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"story_id": story_id}

    @app.get("/stories")
    def list_stories() -> dict:
        return {
            "stories": [
                {"id": story.id, "title": story.title, "page_count": story.page_count}
                for story in store.iter_stories()
            ]
        }

    @app.get("/stories/{story_id}")
    def get_story(story_id: str) -> dict:
        story = store.get_story(story_id)
        if story is None:
            raise HTTPException(status_code=404, detail=f"unknown story '{story_id}'")
        return {
            "id": story.id,
            "title": story.title,
            "pages": [page.text for page in story.pages],
            "page_count": story.page_count,
            "source_hash": story.source_hash,
        }

    @app.get("/stories/{story_id}/pages/{page_index}/question")
    def get_question(
        story_id: str,
        page_index: int,
        mode: str = Query(default="cached", pattern="^(cached|generate)$"),
    ) -> dict:
        if mode == "generate" and backend is None:
            raise HTTPException(status_code=503, detail="no generation backend configured")
        try:
            record = store.get_question(
                story_id,
                page_index,
                mode,
                backend=backend,
                library=library,
                config=loop_config,
            )
        except (UnknownStoryError, UnknownPageError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except (BackendError, PageGenerationError) as exc:
            trace_id = uuid.uuid4().hex[:12]
            logger.error("generation backend failure [%s]: %s", trace_id, exc)
            raise HTTPException(
                status_code=502,
                detail={"error": "generation backend failure", "trace_id": trace_id},
            ) from exc
        return {"question": record.to_dict() if record else None}

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)) -> dict:
        story_id = payload.get("story_id")
        if not isinstance(story_id, str):
            raise HTTPException(status_code=400, detail="field 'story_id' is required")
        questions_enabled = bool(payload.get("questions_enabled", True))
        try:
            session_id = store.create_session(story_id, questions_enabled)
        except UnknownStoryError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/events")
    def record_event(session_id: str, payload: dict = Body(...)) -> dict:
        kind = payload.get("kind")
        if not isinstance(kind, str):
            raise HTTPException(status_code=400, detail="field 'kind' is required")
        try:
            event = store.record_event(
                session_id,
                kind,
                page_index=payload.get("page_index"),
                question_id=payload.get("question_id"),
            )
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except EventValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"ok": True, "timestamp_ms": event.timestamp_ms}

    @app.get("/sessions/{session_id}/events")
    def list_events(session_id: str) -> dict:
        try:
            events = store.session_events(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"events": [event.to_dict() for event in events]}

    return app
