"""Versioned prompt-template file: named sections with {slot} placeholders.

The file's content digest is recorded as ``prompt_version`` on every
persisted question, so editing templates invalidates cached questions.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache
from importlib import resources
from pathlib import Path

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.-]+)\]\s*$")
_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


class PromptTemplateError(ValueError):
    """The template file is malformed or a named section is missing."""


class PromptLibrary:
    """Parsed template file. Immutable after construction."""

    def __init__(self, raw: str) -> None:
        self._sections = self._parse(raw)
        self.version = hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]

    @staticmethod
    def _parse(raw: str) -> dict[str, str]:
        sections: dict[str, list[str]] = {}
        current: list[str] | None = None
        for line in raw.splitlines():
            header = _SECTION_RE.match(line)
            if header:
                name = header.group(1)
                if name in sections:
                    raise PromptTemplateError(f"duplicate template section '{name}'")
                current = sections.setdefault(name, [])
                continue
            if current is None:
                continue  # preamble comments before the first section
            current.append(line)
        if not sections:
            raise PromptTemplateError("template file defines no sections")
        return {name: "\n".join(lines).strip("\n") for name, lines in sections.items()}

    @classmethod
    def from_path(cls, path: Path | str) -> "PromptLibrary":
        return cls(Path(path).read_text("utf-8"))

    def section(self, name: str) -> str:
        try:
            return self._sections[name]
        except KeyError:
            raise PromptTemplateError(f"unknown template section '{name}'") from None

    def fill(self, name: str, **slots: str) -> str:
        """Render a section, replacing known ``{slot}`` tokens.

        Unknown tokens are left untouched so literal JSON braces in the
        template survive rendering.
        """
        template = self.section(name)

        def replace(match: re.Match[str]) -> str:
            key = match.group(1)
            return slots[key] if key in slots else match.group(0)

        return _SLOT_RE.sub(replace, template)


@lru_cache(maxsize=1)
def bundled_library() -> PromptLibrary:
    """The prompt templates shipped with the package."""
    raw = resources.files("coread").joinpath("templates/prompts.txt").read_text("utf-8")
    return PromptLibrary(raw)
