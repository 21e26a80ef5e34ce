"""Prompt template registry, rendering and keyword completion.

Template bodies live as text assets under ``afie/templates`` and use
``str.format`` syntax: ``{name}`` is a placeholder and ``{{``/``}}`` are
literal braces.
"""

from __future__ import annotations

import enum
import hashlib
import json
import string
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

from .document import Document
from .errors import IncompleteKeywordError, TemplateError


class PrecisionVariant(enum.Enum):
    NAIVE = "naive"
    NAIVE_DIRECT = "naive_direct"
    NAIVE_SHOT = "naive_shot"
    DIRECT_SHOT = "direct_shot"
    NAIVE_SHOT_PRECISION = "naive_shot_precision"
    DIRECT_SHOT_PRECISION = "direct_shot_precision"

    @property
    def direct(self) -> bool:
        return self in (PrecisionVariant.NAIVE_DIRECT, PrecisionVariant.DIRECT_SHOT, PrecisionVariant.DIRECT_SHOT_PRECISION)

    @property
    def shot(self) -> str | None:
        """``"plain"``, ``"precision"`` or ``None`` for the example style."""
        if self in (PrecisionVariant.NAIVE_SHOT, PrecisionVariant.DIRECT_SHOT):
            return "plain"
        if self in (PrecisionVariant.NAIVE_SHOT_PRECISION, PrecisionVariant.DIRECT_SHOT_PRECISION):
            return "precision"
        return None


class PromptName(enum.Enum):
    QUESTION = "question"
    REFINE = "refine"
    MAP = "map"
    REDUCE = "reduce"
    EXTRACT_SINGLE = "extract_single"
    EXTRACT_BATCH = "extract_batch"


TEMPLATE_NAMES: tuple[str, ...] = tuple(n.value for n in PromptName) + tuple(v.value for v in PrecisionVariant)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        return placeholders(self.body)

    def render(self, **bindings: str) -> str:
        return render_template(self, bindings)


def placeholders(body: str) -> frozenset[str]:
    return frozenset(field for _, field, _, _ in string.Formatter().parse(body) if field is not None)


class _Strict(dict):
    def __missing__(self, key: str) -> str:
        raise TemplateError(key)


def render_template(template: PromptTemplate | str, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder verbatim.

    Raises:
        TemplateError: naming the first placeholder without a binding.
    """
    body = template.body if isinstance(template, PromptTemplate) else template
    for name in sorted(placeholders(body)):
        if name not in bindings:
            raise TemplateError(name)
    return body.format_map(_Strict(bindings))


def _default_dir():
    return resources.files("afie") / "templates"


def load_template(name: str | PromptName | PrecisionVariant, directory: str | Path | None = None) -> PromptTemplate:
    """Read a template asset; ``directory`` overrides the bundled set."""
    key = name.value if isinstance(name, enum.Enum) else str(name)
    if key not in TEMPLATE_NAMES:
        raise KeyError(f"unknown template {key!r}")
    if directory is None:
        return _bundled(key)
    data = (Path(directory) / f"{key}.txt").read_bytes()
    return PromptTemplate(key, data.decode("utf-8"))


@lru_cache(maxsize=None)
def _bundled(key: str) -> PromptTemplate:
    data = (_default_dir() / f"{key}.txt").read_bytes()
    return PromptTemplate(key, data.decode("utf-8"))


def load_all(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    return {name: load_template(name, directory) for name in TEMPLATE_NAMES}


# ---- keywords ---------------------------------------------------------------


class CompletionLevel(enum.Enum):
    A = "A"
    A_C = "A_C"
    A_T = "A_T"
    A_T_C = "A_T_C"

    @property
    def needs_company(self) -> bool:
        return self in (CompletionLevel.A_C, CompletionLevel.A_T_C)

    @property
    def needs_time(self) -> bool:
        return self in (CompletionLevel.A_T, CompletionLevel.A_T_C)


@dataclass(frozen=True)
class Keyword:
    attribute: str
    company: str | None = None
    time: str | None = None
    completion_level: CompletionLevel = CompletionLevel.A_T_C

    def __post_init__(self) -> None:
        object.__setattr__(self, "completion_level", CompletionLevel(self.completion_level))

    def completed_from(self, doc: Document) -> "Keyword":
        """Fill a missing company or time from the document metadata."""
        return Keyword(
            self.attribute,
            self.company or doc.company or None,
            self.time or doc.period or None,
            self.completion_level,
        )

    @property
    def text(self) -> str:
        return complete_keyword(self)

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "company": self.company,
            "time": self.time,
            "completion_level": self.completion_level.value,
            "text": self.text,
        }


def complete_keyword(kw: Keyword) -> str:
    """Render a keyword at its completion level, e.g. ``Net Income of Nvidia 2022Q4``."""
    level = kw.completion_level
    if level.needs_company and not kw.company:
        raise IncompleteKeywordError(f"completion level {level.value} needs a company")
    if level.needs_time and not kw.time:
        raise IncompleteKeywordError(f"completion level {level.value} needs a time")
    if level is CompletionLevel.A:
        return kw.attribute
    if level is CompletionLevel.A_C:
        return f"{kw.attribute} of {kw.company}"
    if level is CompletionLevel.A_T:
        return f"{kw.attribute} of {kw.time}"
    return f"{kw.attribute} of {kw.company} {kw.time}"


def batch_keywords_text(keywords: list[Keyword]) -> str:
    """Keyword line for the multi-keyword JSON extraction prompt.

    All keywords must share company, time and completion level; renders as
    ``"A", "B" and "C" of COMPANY TIME``.
    """
    if not keywords:
        raise ValueError("need at least one keyword")
    first = keywords[0]
    if any((k.company, k.time, k.completion_level) != (first.company, first.time, first.completion_level) for k in keywords):
        raise ValueError("batched keywords must share company, time and completion level")
    quoted = [f'"{k.attribute}"' for k in keywords]
    names = quoted[0] if len(quoted) == 1 else ", ".join(quoted[:-1]) + " and " + quoted[-1]
    suffix = complete_keyword(Keyword("", first.company, first.time, first.completion_level))
    return names + suffix


# ---- fidelity checks --------------------------------------------------------

DIRECT_SENTENCE = "round to three decimal places"
PRECISION_SHOT_VALUES = ("50.125", "1,234.500")
PLAIN_SHOT_MARKER = "$x billion"

ANCHORS: dict[str, tuple[str, ...]] = {
    "question": ("Financial report's segment: {document_segment}", "Keywords: {keywords}", DIRECT_SENTENCE, *PRECISION_SHOT_VALUES),
    "refine": ("Old summary: {old_summary}", "New summary:", DIRECT_SENTENCE, "128,126.248"),
    "map": ("Financial report's segment: {document_segment}", DIRECT_SENTENCE, *PRECISION_SHOT_VALUES),
    "reduce": ('please output "None"', "Result: 65,135.00", "Result: 2.13", "Content: {text}"),
    "extract_single": ('please output "None"', "Result: 65,135.00", "Result: 2.13", "Key words: {key_words}"),
    "extract_batch": ("Output results in JSON format.", '"Total assets": "2,126.00"', "Keywords: {key_words}"),
}


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def verify_templates(directory: str | Path | None = None) -> list[Check]:
    """Check template assets against the bundled checksums, anchors and the variant matrix."""
    manifest = json.loads((_default_dir() / "manifest.json").read_text(encoding="utf-8"))
    checks: list[Check] = []
    templates: dict[str, PromptTemplate] = {}
    for name in TEMPLATE_NAMES:
        try:
            templates[name] = load_template(name, directory)
        except OSError as exc:
            checks.append(Check(f"{name}: present", False, f"{type(exc).__name__}: {exc}"))
    if len(templates) < len(TEMPLATE_NAMES):
        return checks
    for name, tpl in templates.items():
        digest = hashlib.sha256(tpl.body.encode("utf-8")).hexdigest()
        checks.append(Check(f"{name}: checksum", digest == manifest.get(name), digest[:16]))
    for name, anchors in ANCHORS.items():
        missing = [a for a in anchors if a not in templates[name].body]
        checks.append(Check(f"{name}: anchors", not missing, "missing " + repr(missing) if missing else "ok"))
    for variant in PrecisionVariant:
        body = templates[variant.value].body
        want = {
            "direct": variant.direct,
            "plain shot": variant.shot == "plain",
            "precision shot": variant.shot == "precision",
        }
        have = {
            "direct": DIRECT_SENTENCE in body,
            "plain shot": PLAIN_SHOT_MARKER in body,
            "precision shot": all(v in body for v in PRECISION_SHOT_VALUES),
        }
        bad = [k for k in want if want[k] != have[k]]
        ok_fields = placeholders(body) == {"document_segment", "keywords"}
        checks.append(
            Check(
                f"{variant.value}: variant matrix",
                not bad and ok_fields,
                "ok" if not bad and ok_fields else f"mismatch {bad}, placeholders {sorted(placeholders(body))}",
            )
        )
    return checks
