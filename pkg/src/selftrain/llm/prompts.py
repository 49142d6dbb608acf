"""Prompt templates and response parsing.

Templates live in versioned JSON files (see templates/default.json) so
deployments can swap in their own wording without code changes. The
answer-format directive varies with the labeling mode: plain label,
label plus a yes/no confidence flag, or label plus a numeric score.

Parsing is containment-based and strict: a response must mention exactly
one class name (whole-word, case-insensitive); zero or several matches
raise ParseError rather than guessing. Scores outside [0,1] are rejected,
never clamped.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from ..errors import ConfigError, ParseError

ANSWER_FORMATS = ("label", "label_conf", "label_score")

_CONF_RE = re.compile(r"confident\s*[:=]?\s*(yes|no|true|false)\b", re.IGNORECASE)
_SCORE_RE = re.compile(r"score\s*[:=]?\s*([-+]?(?:\d+\.?\d*|\.\d+))", re.IGNORECASE)


@dataclass(frozen=True)
class PromptTemplate:
    version: str
    system: str
    instruction: str  # must contain the {labels} placeholder exactly once
    example_format: str  # placeholders {text}, {label}
    query_format: str  # placeholder {text}
    directives: Mapping[str, str]  # answer format -> directive line

    def __post_init__(self):
        if self.instruction.count("{labels}") != 1:
            raise ConfigError(
                "template instruction must contain {labels} exactly once"
            )
        missing = set(ANSWER_FORMATS) - set(self.directives)
        if missing:
            raise ConfigError(f"template lacks directives for {sorted(missing)}")

    @classmethod
    def from_dict(cls, raw: Mapping) -> "PromptTemplate":
        unknown = set(raw) - {
            "version", "system", "instruction", "example_format", "query_format", "directives",
        }
        if unknown:
            raise ConfigError(f"unknown template keys {sorted(unknown)}")
        try:
            return cls(
                version=str(raw["version"]),
                system=raw["system"],
                instruction=raw["instruction"],
                example_format=raw["example_format"],
                query_format=raw["query_format"],
                directives=dict(raw["directives"]),
            )
        except KeyError as e:
            raise ConfigError(f"template lacks required key {e.args[0]!r}") from e

    @classmethod
    def from_file(cls, path: str) -> "PromptTemplate":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    @classmethod
    def default(cls) -> "PromptTemplate":
        raw = json.loads(
            resources.files(__package__).joinpath("templates/default.json").read_text("utf-8")
        )
        return cls.from_dict(raw)


def render_messages(
    template: PromptTemplate,
    class_names: Sequence[str],
    text: str,
    examples: Sequence[tuple[str, int]] = (),
    answer_format: str = "label",
) -> list[dict[str, str]]:
    """Build the chat messages for one classification request.

    The instruction's label list names each class exactly once; few-shot
    examples are rendered in the order given (see the pipeline's
    class-interleaved sampling).
    """
    if answer_format not in ANSWER_FORMATS:
        raise ConfigError(f"unknown answer format {answer_format!r}")
    if len(set(class_names)) != len(class_names):
        raise ConfigError(f"class names are not distinct: {list(class_names)}")
    parts = [
        template.instruction.format(labels=", ".join(class_names)),
        template.directives[answer_format],
    ]
    if examples:
        parts.append(
            "\n\n".join(
                template.example_format.format(text=ex_text, label=class_names[ex_label])
                for ex_text, ex_label in examples
            )
        )
    parts.append(template.query_format.format(text=text))
    return [
        {"role": "system", "content": template.system},
        {"role": "user", "content": "\n\n".join(parts)},
    ]


def _class_pattern(name: str) -> re.Pattern:
    return re.compile(rf"(?<!\w){re.escape(name)}(?!\w)", re.IGNORECASE)


def parse_label(response: str, class_names: Sequence[str]) -> int:
    """Resolve a response to the single class it names."""
    matched = [
        c for c, name in enumerate(class_names) if _class_pattern(name).search(response)
    ]
    if not matched:
        raise ParseError(
            f"response names no known class: {response[:120]!r}", raw_response=response
        )
    if len(matched) > 1:
        names = [class_names[c] for c in matched]
        raise ParseError(
            f"response is ambiguous, names {names}: {response[:120]!r}",
            raw_response=response,
        )
    return matched[0]


def parse_label_conf(response: str, class_names: Sequence[str]) -> tuple[int, bool]:
    label = parse_label(response, class_names)
    m = _CONF_RE.search(response)
    if m is None:
        raise ParseError(
            f"response lacks a yes/no confidence: {response[:120]!r}", raw_response=response
        )
    return label, m.group(1).lower() in ("yes", "true")


def parse_label_score(response: str, class_names: Sequence[str]) -> tuple[int, float]:
    label = parse_label(response, class_names)
    m = _SCORE_RE.search(response)
    if m is None:
        raise ParseError(
            f"response lacks a numeric score: {response[:120]!r}", raw_response=response
        )
    score = float(m.group(1))
    if not 0.0 <= score <= 1.0:
        raise ParseError(
            f"score {score} outside [0,1]: {response[:120]!r}", raw_response=response
        )
    return label, score
