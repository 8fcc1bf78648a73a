"""Four-segment prompt rendering and structured-output extraction.

Every prompt the engine sends is built from the same fixed slots, in this
order: instruction, designer criteria (serialized JSON), optional prior
context, and a one-shot example of the JSON reply format. Replies come
back as free text and are mined for the first balanced JSON object that
satisfies the expected key schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import InvalidTemplate, NoJsonFound, SchemaMismatch

SEGMENT_ORDER = ("instruction", "criteria", "context", "one_shot")

REPLY_FORMAT_LEAD = "Reply in this format:"

DEFAULT_CONTEXT_PREAMBLE = "Consider this additional context:"

_SEPARATOR = "\n\n"

VALUE_KINDS = ("string", "number", "array", "object")


@dataclass(frozen=True)
class PromptTemplate:
    """One fixed-slot prompt: instruction text plus a literal JSON reply skeleton."""

    id: str
    instruction: str
    one_shot_example: str
    context_preamble: str = DEFAULT_CONTEXT_PREAMBLE

    def validate(self) -> None:
        if not self.instruction.strip():
            raise InvalidTemplate(f"template {self.id!r} has an empty instruction")
        try:
            parsed = json.loads(self.one_shot_example)
        except (json.JSONDecodeError, TypeError) as exc:
            raise InvalidTemplate(f"template {self.id!r} one-shot example is not valid JSON: {exc}") from exc
        if not isinstance(parsed, dict):
            raise InvalidTemplate(f"template {self.id!r} one-shot example must be a JSON object")


@dataclass(frozen=True)
class RenderedPrompt:
    """Final prompt text plus (segment_kind, (start, end)) character spans."""

    text: str
    segments: tuple[tuple[str, tuple[int, int]], ...]

    def segment_text(self, kind: str) -> str | None:
        for seg_kind, (start, end) in self.segments:
            if seg_kind == kind:
                return self.text[start:end]
        return None


@dataclass(frozen=True)
class OutputSchema:
    """Required (key, kind) pairs a reply object must carry."""

    required_keys: tuple[tuple[str, str], ...]

    def __post_init__(self):
        names = [name for name, _ in self.required_keys]
        if len(names) != len(set(names)):
            raise ValueError("schema key names must be unique")
        for name, kind in self.required_keys:
            if kind not in VALUE_KINDS:
                raise ValueError(f"unknown kind {kind!r} for key {name!r}")

    @classmethod
    def of(cls, **kinds: str) -> "OutputSchema":
        return cls(required_keys=tuple(kinds.items()))


def render(template: PromptTemplate, criteria: dict, context: str = "") -> RenderedPrompt:
    """Assemble the prompt text and record where each segment landed.

    Criteria are serialized as pretty-printed JSON with sorted keys so the
    same inputs always produce byte-identical prompts. The context segment
    is omitted entirely when ``context`` is empty.
    """
    template.validate()
    if not isinstance(criteria, dict):
        raise TypeError(f"criteria must be a JSON object, got {type(criteria).__name__}")

    pieces: list[tuple[str, str]] = [
        ("instruction", template.instruction),
        ("criteria", json.dumps(criteria, indent=2, sort_keys=True)),
    ]
    if context:
        pieces.append(("context", f"{template.context_preamble}\n{context}"))
    pieces.append(("one_shot", f"{REPLY_FORMAT_LEAD}\n{template.one_shot_example}"))

    text_parts: list[str] = []
    segments: list[tuple[str, tuple[int, int]]] = []
    cursor = 0
    for kind, part in pieces:
        if text_parts:
            text_parts.append(_SEPARATOR)
            cursor += len(_SEPARATOR)
        text_parts.append(part)
        segments.append((kind, (cursor, cursor + len(part))))
        cursor += len(part)
    return RenderedPrompt(text="".join(text_parts), segments=tuple(segments))


def _scan_balanced_object(raw: str, start: int) -> str | None:
    """Return the balanced {...} slice starting at ``start``, honoring string escapes."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1]
    return None


def _kind_matches(kind: str, value) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "array":
        return isinstance(value, list)
    if kind == "object":
        return isinstance(value, dict)
    return False


def extract_structured(raw: str, schema: OutputSchema) -> dict:
    """Find the first balanced JSON object in ``raw`` that satisfies ``schema``.

    The scan walks every ``{`` in order, so objects wrapped in prose or
    fenced code blocks (and objects nested inside non-matching wrappers)
    are all candidates. Malformed JSON is never repaired; the caller
    retries through the LLM gateway instead.
    """
    first_failure: SchemaMismatch | None = None
    pos = raw.find("{")
    while pos != -1:
        candidate = _scan_balanced_object(raw, pos)
        if candidate is not None:
            try:
                obj = json.loads(candidate)
            except json.JSONDecodeError:
                obj = None
            if isinstance(obj, dict):
                missing = [name for name, _ in schema.required_keys if name not in obj]
                mistyped = [
                    name
                    for name, kind in schema.required_keys
                    if name in obj and not _kind_matches(kind, obj[name])
                ]
                if not missing and not mistyped:
                    return obj
                if first_failure is None:
                    first_failure = SchemaMismatch(missing=missing, mistyped=mistyped)
        pos = raw.find("{", pos + 1)
    if first_failure is not None:
        raise first_failure
    raise NoJsonFound("no balanced JSON object in reply")


def text_reply(completion: str, key: str) -> str:
    """Pull ``key`` out of a JSON-shaped reply, or take the raw text as-is.

    Live models answer in the one-shot JSON format; scripted fixtures and
    the summarizer fallback may hand back plain prose. Both are accepted.
    """
    try:
        return str(extract_structured(completion, OutputSchema.of(**{key: "string"}))[key])
    except (NoJsonFound, SchemaMismatch):
        return completion


class TemplateRegistry:
    """Prompt templates loaded from a directory of one-JSON-per-template files."""

    def __init__(self, templates: dict[str, PromptTemplate]):
        self._templates = dict(templates)

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise InvalidTemplate(f"no template with id {template_id!r}") from None

    def has(self, template_id: str) -> bool:
        return template_id in self._templates

    def ids(self) -> list[str]:
        return sorted(self._templates)

    @classmethod
    def from_dir(cls, directory: Path) -> "TemplateRegistry":
        templates: dict[str, PromptTemplate] = {}
        for path in sorted(Path(directory).glob("*.json")):
            data = json.loads(path.read_text())
            template = PromptTemplate(
                id=str(data["id"]),
                instruction=str(data["instruction"]),
                one_shot_example=json.dumps(data["one_shot_example"], indent=2)
                if isinstance(data["one_shot_example"], dict)
                else str(data["one_shot_example"]),
                context_preamble=str(data.get("context_preamble", DEFAULT_CONTEXT_PREAMBLE)),
            )
            template.validate()
            templates[template.id] = template
        return cls(templates)


@lru_cache(maxsize=1)
def default_templates() -> TemplateRegistry:
    """Registry over the template files bundled with the package."""
    with resources.as_file(resources.files("storyloom") / "templates") as path:
        return TemplateRegistry.from_dir(path)
