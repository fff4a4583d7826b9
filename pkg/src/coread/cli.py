"""Operator CLI: ingest stories, pre-generate questions, serve, export."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .backends import (
    ChatBackend,
    DEFAULT_MODEL,
    LiveBackend,
    LiveBackendConfig,
    ReplayBackend,
    ScriptedBackend,
)
from .loop import LoopConfig
from .prompts import bundled_library
from .service import create_app
from .store import Store

DEFAULT_API_BASE = "https://api.openai.com"


def _store(data_dir: str) -> Store:
    return Store(Path(data_dir))


def _build_backend(
    kind: str, cassette: str | None, script_file: str | None
) -> ChatBackend:
    if kind == "scripted":
        if not script_file:
            raise click.UsageError("--backend scripted requires --script FILE")
        payload = json.loads(Path(script_file).read_text("utf-8"))
        return ScriptedBackend({tag: list(items) for tag, items in payload.items()})
    base_url = os.environ.get("COREAD_API_BASE", DEFAULT_API_BASE)
    live = LiveBackend(LiveBackendConfig(base_url=base_url))
    if kind == "live":
        if cassette:
            # Record while hitting the live endpoint so the run can be
            # replayed later without network access.
            return ReplayBackend(Path(cassette), inner=live)
        return live
    if kind == "replay":
        if not cassette:
            raise click.UsageError("--backend replay requires --cassette DIR")
        return ReplayBackend(Path(cassette))
    raise click.UsageError(f"unknown backend '{kind}'")


data_dir_option = click.option(
    "--data-dir",
    envvar="COREAD_DATA_DIR",
    default="data",
    show_default=True,
    help="Directory holding stories, questions, and session logs.",
)


@click.group()
def main() -> None:
    """Dialogic question generation and co-reading service."""


@main.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@data_dir_option
def ingest(file: str, data_dir: str) -> None:
    """Ingest a story document (JSON with id, title, pages)."""
    story_id = _store(data_dir).ingest_story(Path(file).read_text("utf-8"))
    click.echo(story_id)


@main.command()
@click.argument("story_id")
@click.option("--seed", type=int, default=None, help="Seed for reproducible type selection.")
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["live", "replay", "scripted"]),
    default="live",
    show_default=True,
)
@click.option("--cassette", type=click.Path(), default=None,
              help="Cassette directory for recording (live) or replaying.")
@click.option("--script", "script_file", type=click.Path(exists=True), default=None,
              help="JSON file of request_tag -> canned responses (scripted backend).")
@click.option("--model", default=DEFAULT_MODEL, show_default=True)
@data_dir_option
def pregen(
    story_id: str,
    seed: int | None,
    backend_kind: str,
    cassette: str | None,
    script_file: str | None,
    model: str,
    data_dir: str,
) -> None:
    """Generate and cache a question for every page of a story."""
    store = _store(data_dir)
    backend = _build_backend(backend_kind, cassette, script_file)
    config = LoopConfig(rng_seed=seed, model=model)
    story = store.require_story(story_id)
    generated = 0
    for page_index in range(story.page_count):
        record = store.get_question(
            story_id, page_index, "generate", backend=backend, config=config
        )
        if record is None:
            click.echo(f"page {page_index}: no suitable question")
        else:
            generated += 1
            click.echo(f"page {page_index}: [{record.kind}] {record.text}")
    click.echo(f"{generated}/{story.page_count} pages have questions")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["none", "live", "replay", "scripted"]),
    default="none",
    show_default=True,
    help="Generation backend for mode=generate requests.",
)
@click.option("--cassette", type=click.Path(), default=None)
@click.option("--script", "script_file", type=click.Path(exists=True), default=None)
@click.option("--model", default=DEFAULT_MODEL, show_default=True)
@data_dir_option
def serve(
    host: str,
    port: int,
    backend_kind: str,
    cassette: str | None,
    script_file: str | None,
    model: str,
    data_dir: str,
) -> None:
    """Run the HTTP service."""
    import uvicorn

    backend = None
    if backend_kind != "none":
        backend = _build_backend(backend_kind, cassette, script_file)
    app = create_app(
        _store(data_dir),
        backend=backend,
        library=bundled_library(),
        loop_config=LoopConfig(model=model),
    )
    uvicorn.run(app, host=host, port=port)


@main.command("export-questions")
@click.argument("story_id")
@click.option("--output", type=click.Path(), default="-", show_default=True,
              help="Destination file, or - for stdout.")
@data_dir_option
def export_questions(story_id: str, output: str, data_dir: str) -> None:
    """Dump every cached question record for a story as JSON."""
    records = _store(data_dir).list_questions(story_id)
    payload = json.dumps([record.to_dict() for record in records], indent=2, ensure_ascii=False)
    if output == "-":
        click.echo(payload)
    else:
        Path(output).write_text(payload + "\n", "utf-8")
        click.echo(f"wrote {len(records)} records to {output}", err=True)


if __name__ == "__main__":
    main(sys.argv[1:])
