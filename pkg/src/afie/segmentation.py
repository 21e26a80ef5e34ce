"""Split over-long elements and pack elements into token-budgeted segments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

from .document import DEFAULT_COUNTER, Document, Paragraph, Table, TokenCounter
from .serialization import SerializationFormat, assemble, row_fragments, serialize_table

log = logging.getLogger(__name__)

PARAGRAPH = "paragraph"
TABLE = "table"


@dataclass(frozen=True)
class SegmentationConfig:
    element_limit: int = 2000
    segment_limit: int = 2500
    format: SerializationFormat = SerializationFormat.PLAIN
    counter: TokenCounter = field(default=DEFAULT_COUNTER, compare=False)

    def __post_init__(self) -> None:
        if not 0 < self.element_limit <= self.segment_limit:
            raise ValueError(
                f"need 0 < element_limit <= segment_limit, got {self.element_limit}, {self.segment_limit}"
            )
        object.__setattr__(self, "format", SerializationFormat.parse(self.format))


@dataclass(frozen=True)
class Piece:
    """One serialized element, or one part of a split element."""

    element_id: int
    part: int
    kind: str
    text: str
    header_prefix: str | None = None


@dataclass(frozen=True)
class Segment:
    text: str
    token_count: int
    source_element_ids: tuple[int, ...]
    segment_index: int
    pieces: tuple[Piece, ...] = ()
    over_limit: bool = False

    def to_dict(self) -> dict:
        return {
            "segment_index": self.segment_index,
            "token_count": self.token_count,
            "source_element_ids": list(self.source_element_ids),
            "text": self.text,
        }


def greedy_ranges(n: int, fits: Callable[[int, int], bool]) -> Iterator[tuple[int, int]]:
    """Yield maximal half-open ranges ``[i, j)`` covering ``0..n`` left to right.

    ``fits(i, j)`` must be monotone: once false for some ``j`` it stays false
    for larger ``j``. Each range holds at least one item even when that item
    alone does not fit; callers decide how to treat such ranges.
    """
    i = 0
    while i < n:
        if not fits(i, i + 1):
            yield i, i + 1
            i += 1
            continue
        # gallop to bracket the boundary, then bisect
        lo, step = i + 1, 1
        hi = n + 1
        while lo + step <= n:
            if fits(i, lo + step):
                lo += step
                step *= 2
            else:
                hi = lo + step
                break
        else:
            if fits(i, n):
                lo = n
            else:
                hi = n
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if fits(i, mid):
                lo = mid
            else:
                hi = mid
        yield i, lo
        i = lo


def _split_chars(word: str, limit: int, counter: TokenCounter) -> list[str]:
    return [word[a:b] for a, b in greedy_ranges(len(word), lambda a, b: counter.count(word[a:b]) <= limit)]


def split_words(text: str, limit: int, counter: TokenCounter = DEFAULT_COUNTER) -> list[str]:
    """Pack whitespace-separated words greedily into pieces of at most ``limit`` tokens.

    Pieces join their words with single spaces. A word that alone exceeds
    the limit is cut at character granularity.
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    words = text.split()
    out: list[str] = []
    for a, b in greedy_ranges(len(words), lambda a, b: counter.count(" ".join(words[a:b])) <= limit):
        piece = " ".join(words[a:b])
        if b - a == 1 and counter.count(piece) > limit:
            out.extend(_split_chars(piece, limit, counter))
        else:
            out.append(piece)
    return out


def split_paragraph(text: str, limit: int, counter: TokenCounter = DEFAULT_COUNTER) -> list[str]:
    """Split a paragraph into non-overlapping sub-paragraphs under ``limit`` tokens.

    Text already under the limit comes back unchanged.
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    if counter.count(text) <= limit:
        return [text]
    return split_words(text, limit, counter)


def table_header_prefix(header: Sequence[str], fmt: SerializationFormat | str) -> str:
    """Leading text every serialized (sub-)table with this header starts with."""
    fmt = SerializationFormat.parse(fmt)
    text = serialize_table([header], fmt)
    if fmt in (SerializationFormat.XML, SerializationFormat.HTML):
        text = text[: -len("</table>")]
    return text


def split_table(
    table: Table,
    limit: int,
    fmt: SerializationFormat | str = SerializationFormat.PLAIN,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Table]:
    """Split a table into sub-tables that each repeat the header row.

    Body rows are packed greedily in order. A header plus a single body row
    that is already over the limit is emitted as-is and logged.
    """
    if limit <= 0:
        raise ValueError("limit must be positive")
    fmt = SerializationFormat.parse(fmt)
    if len(table.rows) < 2 or counter.count(serialize_table(table, fmt)) <= limit:
        if counter.count(serialize_table(table, fmt)) > limit:
            log.warning("table %d has no body rows to split and exceeds %d tokens", table.element_id, limit)
        return [table]

    header, body = table.header, table.body
    head, *frags = row_fragments(table.rows, fmt)

    def fits(a: int, b: int) -> bool:
        return counter.count(assemble([head, *frags[a:b]], fmt)) <= limit

    out = []
    for a, b in greedy_ranges(len(body), fits):
        if b - a == 1 and not fits(a, b):
            log.warning("table %d row %d exceeds %d tokens even alone; kept over limit", table.element_id, a + 1, limit)
        out.append(Table((header, *body[a:b]), table.element_id))
    return out


def _as_pieces(items: Iterable[Piece | tuple[int, str]]) -> list[Piece]:
    pieces: list[Piece] = []
    parts: dict[int, int] = {}
    for item in items:
        if isinstance(item, Piece):
            pieces.append(item)
            continue
        eid, text = item
        part = parts.get(eid, 0)
        parts[eid] = part + 1
        pieces.append(Piece(eid, part, PARAGRAPH, text))
    return pieces


def merge_elements(
    serialized_elements: Iterable[Piece | tuple[int, str]],
    segment_limit: int,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> list[Segment]:
    """Greedily concatenate adjacent elements (newline-joined) into segments."""
    pieces = _as_pieces(serialized_elements)
    texts = [p.text for p in pieces]

    def fits(a: int, b: int) -> bool:
        return counter.count("\n".join(texts[a:b])) <= segment_limit

    segments = []
    for idx, (a, b) in enumerate(greedy_ranges(len(pieces), fits)):
        text = "\n".join(texts[a:b])
        n_tokens = counter.count(text)
        ids = tuple(dict.fromkeys(p.element_id for p in pieces[a:b]))
        segments.append(
            Segment(text, n_tokens, ids, idx, tuple(pieces[a:b]), over_limit=n_tokens > segment_limit)
        )
    return segments


def document_pieces(doc: Document, config: SegmentationConfig) -> list[Piece]:
    """Serialize and split every element of ``doc`` into budget-sized pieces."""
    counter, fmt, limit = config.counter, config.format, config.element_limit
    pieces: list[Piece] = []
    for el in doc.elements:
        if isinstance(el, Paragraph):
            for part, text in enumerate(split_paragraph(el.text, limit, counter)):
                pieces.append(Piece(el.element_id, part, PARAGRAPH, text))
        else:
            prefix = table_header_prefix(el.header, fmt)
            for part, sub in enumerate(split_table(el, limit, fmt, counter)):
                pieces.append(Piece(el.element_id, part, TABLE, serialize_table(sub, fmt), prefix))
    return pieces


def segment_document(doc: Document, config: SegmentationConfig | None = None) -> list[Segment]:
    """Serialize, split and merge a document into segments."""
    config = config or SegmentationConfig()
    if not doc.elements:
        raise ValueError("cannot segment an empty document")
    return merge_elements(document_pieces(doc, config), config.segment_limit, config.counter)
