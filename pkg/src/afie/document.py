"""Hybrid document model, token counting and ingestion.

A :class:`Document` is an ordered sequence of paragraph and table elements
plus filing metadata. Documents are immutable once built.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Protocol, Union, runtime_checkable

from .errors import EmptyDocumentError, ParseError


@runtime_checkable
class TokenCounter(Protocol):
    def count(self, text: str) -> int: ...


class HeuristicTokenCounter:
    """Model-agnostic counter: one token per four characters, rounded up.

    Whitespace counts like any other character.
    """

    chars_per_token = 4

    def count(self, text: str) -> int:
        return math.ceil(len(text) / self.chars_per_token)

    def __repr__(self) -> str:
        return "HeuristicTokenCounter()"

    def __eq__(self, other: object) -> bool:
        return type(other) is type(self)

    def __hash__(self) -> int:
        return hash(type(self))


DEFAULT_COUNTER = HeuristicTokenCounter()


def count_tokens(counter: TokenCounter, text: str) -> int:
    return counter.count(text)


class ReportType(enum.Enum):
    TEN_K = "10-K"
    TEN_Q = "10-Q"
    OTHER = "other"


@dataclass(frozen=True)
class Paragraph:
    text: str
    element_id: int = 0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("paragraph text must be nonempty")


@dataclass(frozen=True)
class Table:
    rows: tuple[tuple[str, ...], ...]
    element_id: int = 0

    def __post_init__(self) -> None:
        rows = tuple(tuple(str(c) for c in row) for row in self.rows)
        if not rows:
            raise ValueError("a table needs at least one row")
        if any(len(r) == 0 for r in rows):
            raise ValueError("table rows must be nonempty")
        object.__setattr__(self, "rows", rows)

    @property
    def header(self) -> tuple[str, ...]:
        return self.rows[0]

    @property
    def body(self) -> tuple[tuple[str, ...], ...]:
        return self.rows[1:]


Element = Union[Paragraph, Table]


@dataclass(frozen=True)
class Document:
    id: str
    company: str
    period: str
    report_type: ReportType
    elements: tuple[Element, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be nonempty")
        if not self.period:
            raise ValueError("document period must be nonempty")
        object.__setattr__(self, "elements", tuple(self.elements))

    @classmethod
    def build(
        cls,
        id: str,
        company: str,
        period: str,
        elements: list[Element | str | list[list[str]]],
        report_type: ReportType = ReportType.OTHER,
    ) -> "Document":
        """Build a document, renumbering element ids 0..n-1.

        Plain strings become paragraphs and lists of rows become tables.
        """
        numbered: list[Element] = []
        for i, el in enumerate(elements):
            if isinstance(el, str):
                el = Paragraph(el)
            elif isinstance(el, (list, tuple)):
                el = Table(tuple(tuple(r) for r in el))
            numbered.append(_renumber(el, i))
        return cls(id, company, period, report_type, tuple(numbered))

    def to_dict(self) -> dict:
        elements = []
        for el in self.elements:
            if isinstance(el, Paragraph):
                elements.append({"type": "paragraph", "text": el.text})
            else:
                elements.append({"type": "table", "rows": [list(r) for r in el.rows]})
        return {
            "id": self.id,
            "company": self.company,
            "period": self.period,
            "report_type": self.report_type.value,
            "elements": elements,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=indent)


def _renumber(el: Element, i: int) -> Element:
    if isinstance(el, Paragraph):
        return Paragraph(el.text, i)
    return Table(el.rows, i)


def parse_document(data: bytes | str) -> Document:
    """Parse one document in the JSON elements format.

    Raises:
        ParseError: on malformed JSON (with the byte offset) or schema violations.
        EmptyDocumentError: when the element list is empty.
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", byte_offset=offset) from None
    return document_from_dict(raw)


def document_from_dict(raw: object) -> Document:
    if not isinstance(raw, dict):
        raise ParseError("document must be a JSON object")
    for key in ("id", "company", "period", "report_type"):
        if not isinstance(raw.get(key), str):
            raise ParseError(f"field {key!r} must be a string")
    try:
        report_type = ReportType(raw["report_type"])
    except ValueError:
        raise ParseError(f"unknown report_type {raw['report_type']!r}") from None
    items = raw.get("elements")
    if not isinstance(items, list):
        raise ParseError("field 'elements' must be a list")
    if not items:
        raise EmptyDocumentError("document has no elements")

    elements: list[Element] = []
    for i, item in enumerate(items):
        kind = item.get("type") if isinstance(item, dict) else None
        try:
            if kind == "paragraph":
                if not isinstance(item.get("text"), str):
                    raise ValueError("paragraph needs a string 'text'")
                elements.append(Paragraph(item["text"], i))
            elif kind == "table":
                rows = item.get("rows")
                if not isinstance(rows, list) or not all(
                    isinstance(r, list) and all(isinstance(c, str) for c in r) for r in rows
                ):
                    raise ValueError("table 'rows' must be a list of lists of strings")
                elements.append(Table(tuple(tuple(r) for r in rows), i))
            else:
                raise ValueError(f"unknown element type {kind!r}")
        except ValueError as exc:
            raise ParseError(f"element {i}: {exc}") from None
    try:
        return Document(raw["id"], raw["company"], raw["period"], report_type, tuple(elements))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


_WS = re.compile(r"\s+")

# Tags whose boundaries end the running paragraph.
_BLOCK_TAGS = frozenset(
    "p div br li ul ol h1 h2 h3 h4 h5 h6 section article header footer blockquote pre hr".split()
)
_SKIP_TAGS = frozenset({"script", "style", "head", "title"})


class _TableHTMLParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.out: list[Element] = []
        self._para: list[str] = []
        self._depth = 0  # table nesting depth
        self._rows: list[list[str]] = []
        self._row: list[str] | None = None
        self._cell: list[str] | None = None
        self._skip = 0

    def _flush_paragraph(self) -> None:
        text = _WS.sub(" ", "".join(self._para)).strip()
        self._para = []
        if text:
            self.out.append(Paragraph(text))

    def _close_cell(self) -> None:
        if self._cell is not None and self._row is not None:
            self._row.append(_WS.sub(" ", "".join(self._cell)).strip())
        self._cell = None

    def _close_row(self) -> None:
        self._close_cell()
        if self._row:
            self._rows.append(self._row)
        self._row = None

    def _close_table(self) -> None:
        self._close_row()
        if self._rows:
            self.out.append(Table(tuple(tuple(r) for r in self._rows)))
        self._rows = []

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_TAGS:
            self._skip += 1
            return
        if tag == "table":
            if self._depth == 0:
                self._flush_paragraph()
            elif self._cell is not None:
                self._cell.append(" ")
            self._depth += 1
            return
        if self._depth == 1:
            if tag == "tr":
                self._close_row()
                self._row = []
            elif tag in ("td", "th"):
                self._close_cell()
                if self._row is None:
                    self._row = []
                self._cell = []
        elif self._depth > 1:
            if tag in ("td", "th", "tr") and self._cell is not None:
                self._cell.append(" ")
        elif tag in _BLOCK_TAGS:
            self._flush_paragraph()

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS:
            self._skip = max(0, self._skip - 1)
            return
        if tag == "table" and self._depth > 0:
            self._depth -= 1
            if self._depth == 0:
                self._close_table()
            return
        if self._depth == 1:
            if tag == "tr":
                self._close_row()
            elif tag in ("td", "th"):
                self._close_cell()
        elif self._depth == 0 and tag in _BLOCK_TAGS:
            self._flush_paragraph()

    def handle_data(self, data: str) -> None:
        if self._skip:
            return
        if self._depth == 0:
            self._para.append(data)
        elif self._cell is not None:
            self._cell.append(data)

    def finish(self) -> list[Element]:
        self.close()
        while self._depth > 0:
            self._depth -= 1
            if self._depth == 0:
                self._close_table()
        self._flush_paragraph()
        return self.out


def extract_tables_from_html(html: str) -> list[Element]:
    """Split an HTML page into paragraph and table elements in page order.

    Nested tables are flattened into the enclosing cell's text. Unclosed tags
    are closed at end of input. Element ids are left at 0; ``Document.build``
    numbers them.
    """
    parser = _TableHTMLParser()
    parser.feed(html)
    return parser.finish()
