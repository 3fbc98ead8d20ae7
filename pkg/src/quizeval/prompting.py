"""Assembly of the structured interaction payload sent to the engine.

Every prompt is an ordered payload: instruction text first, then the
question stem, then the enumerated choices, and finally the image
attachment. The instruction text must contain the answer-marker phrase so
that letter extraction downstream is well-posed.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urlparse

from .corpus import Question

ANSWER_MARKER = "Correct Choice:"

# Default instruction text, reproduced character-for-character from the run
# this tool replays; override per run to experiment with other protocols.
DEFAULT_RULES_TEXT = (
    "Describe the image and then use the that description and the following "
    "symptoms to choose the correct answer without explanation. At the end of "
    "the response write Correct Choice:(ONLY the correct letter)."
)

DEFAULT_MODEL_ID = "gpt-4-vision-preview"
DEFAULT_MAX_TOKENS = 4000
DEFAULT_ENDPOINT_URL = "https://api.openai.com/v1/chat/completions"

_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg"}


class PromptError(Exception):
    pass


class MarkerMissingError(PromptError):
    """The instruction text lacks the answer-marker phrase."""


class ImageReadError(PromptError):
    """The question's image could not be read or has an unsupported type."""


@dataclass(frozen=True)
class RulesOfConduct:
    """Instruction text prepended to every prompt."""

    instruction_text: str = DEFAULT_RULES_TEXT

    def has_marker(self) -> bool:
        return ANSWER_MARKER in self.instruction_text


@dataclass(frozen=True)
class EngineConfig:
    """Settings for the completion endpoint under evaluation."""

    model_id: str = DEFAULT_MODEL_ID
    max_tokens: int = DEFAULT_MAX_TOKENS
    endpoint_url: str = DEFAULT_ENDPOINT_URL
    temperature: float | None = None

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        parsed = urlparse(self.endpoint_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"endpoint_url is not a valid http(s) URL: {self.endpoint_url!r}")
        if self.temperature is not None and self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class PromptEnvelope:
    """Ordered interaction payload: rules, stem, choices, one image.

    The image travels as raw bytes plus a media type and is never inlined
    into the text parts; the wire encoding is the client's concern.
    """

    question_id: str
    rules_text: str
    stem: str
    choices_text: str
    image_bytes: bytes
    image_media_type: str

    @property
    def text(self) -> str:
        return "\n\n".join((self.rules_text, self.stem, self.choices_text))


def render_choices(question: Question) -> str:
    """One '<letter>. <text>' line per choice, in letter order."""
    return "\n".join(f"{c.letter}. {c.text}" for c in question.choices)


def build_prompt(
    question: Question,
    rules: RulesOfConduct,
    config: EngineConfig | None = None,
) -> PromptEnvelope:
    """Assemble the payload for one question.

    ``config`` is accepted so pipeline call sites can validate the whole run
    configuration up front; engine settings themselves travel to the client,
    not inside the envelope. Deterministic: identical inputs yield an
    identical envelope.
    """
    if not rules.has_marker():
        raise MarkerMissingError(f"rules of conduct must contain the marker {ANSWER_MARKER!r}")
    if config is not None and not isinstance(config, EngineConfig):
        raise TypeError("config must be an EngineConfig")
    suffix = question.image.path.suffix.lower()
    media_type = _MEDIA_TYPES.get(suffix)
    if media_type is None:
        raise ImageReadError(f"unsupported image type {suffix!r} for {question.image.path}")
    try:
        image_bytes = question.image.path.read_bytes()
    except OSError as exc:
        raise ImageReadError(f"cannot read image {question.image.path}: {exc}") from exc
    return PromptEnvelope(
        question_id=question.id,
        rules_text=rules.instruction_text,
        stem=question.stem,
        choices_text=render_choices(question),
        image_bytes=image_bytes,
        image_media_type=media_type,
    )
