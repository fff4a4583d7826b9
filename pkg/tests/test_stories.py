from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from coread import (
    StoryFormatError,
    StoryValidationError,
    context_window,
    load_fixture,
    fixture_names,
    parse_story,
    serialize_story,
)
from conftest import make_story


def test_parse_story_round_trip(lion_story):
    reparsed = parse_story(serialize_story(lion_story))
    assert reparsed == lion_story


def test_fixture_shape():
    assert set(fixture_names()) == {"the-fox-and-the-stork", "the-lion-and-the-mouse"}
    for name in fixture_names():
        story = load_fixture(name)
        assert story.page_count == 6
        assert story.word_count == 300
        assert all(page.word_count == 50 for page in story.pages)


def test_word_count_per_page(lion_story):
    for page in lion_story.pages:
        assert page.word_count == len(page.text.split())


def test_parse_rejects_empty_pages_array():
    with pytest.raises(StoryValidationError):
        parse_story(json.dumps({"id": "x", "title": "t", "pages": []}))


def test_parse_rejects_blank_page_text_citing_index():
    document = json.dumps({"id": "x", "title": "t", "pages": ["ok", "   "]})
    with pytest.raises(StoryValidationError, match="page 1"):
        parse_story(document)


@pytest.mark.parametrize("missing", ["id", "title", "pages"])
def test_parse_names_missing_field(missing):
    payload = {"id": "x", "title": "t", "pages": ["text"]}
    del payload[missing]
    with pytest.raises(StoryFormatError, match=missing):
        parse_story(json.dumps(payload))


def test_parse_rejects_non_json():
    with pytest.raises(StoryFormatError):
        parse_story("not json at all")


def test_parse_rejects_non_string_page():
    with pytest.raises(StoryFormatError, match=r"pages\[0\]"):
        parse_story(json.dumps({"id": "x", "title": "t", "pages": [42]}))


def test_source_hash_tracks_content():
    a = make_story("a", ["one", "two"])
    same_text = make_story("b", ["one", "two"], title="Test Story")
    changed_page = make_story("a", ["one", "two!"])
    changed_title = make_story("a", ["one", "two"], title="Other")
    assert a.source_hash == same_text.source_hash
    assert a.source_hash != changed_page.source_hash
    assert a.source_hash != changed_title.source_hash


def test_context_window_first_page_is_empty(lion_story):
    assert context_window(lion_story, 0, 5) == ()


def test_context_window_short_prefix(lion_story):
    window = context_window(lion_story, 3, 5)
    assert window == tuple(page.text for page in lion_story.pages[:3])


def test_context_window_clips_to_k():
    story = make_story("eight", [f"page {i} text" for i in range(8)])
    window = context_window(story, 7, 5)
    assert window == tuple(f"page {i} text" for i in range(2, 7))


def test_context_window_out_of_range(lion_story):
    with pytest.raises(IndexError):
        context_window(lion_story, 6, 5)
    with pytest.raises(IndexError):
        context_window(lion_story, -1, 5)


@given(page_index=st.integers(min_value=0, max_value=7))
def test_context_window_length_is_min_of_index_and_k(page_index):
    story = make_story("prop", [f"page {i}" for i in range(8)])
    window = context_window(story, page_index, 5)
    assert len(window) == min(page_index, 5)
    assert story.pages[page_index].text not in window


@given(
    pages=st.lists(st.text(alphabet="abc xyz", min_size=1).filter(str.strip), min_size=1, max_size=6)
)
def test_serialize_parse_round_trip_property(pages):
    story = make_story("prop", pages)
    assert parse_story(serialize_story(story)) == story
