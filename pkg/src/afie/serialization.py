"""Table-to-text serialization in PLAIN, CSV, XML and HTML layouts."""

from __future__ import annotations

import csv
import enum
import html
import io
from typing import Sequence
from xml.sax.saxutils import escape as xml_escape

from .document import Table

Rows = Sequence[Sequence[str]]


class SerializationFormat(enum.Enum):
    PLAIN = "PLAIN"
    CSV = "CSV"
    XML = "XML"
    HTML = "HTML"

    @classmethod
    def parse(cls, value: "str | SerializationFormat") -> "SerializationFormat":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(
                f"unknown serialization format {value!r}; expected one of "
                + ", ".join(f.value for f in cls)
            ) from None


def _plain_cell(cell: str) -> str:
    # newline is the row separator in PLAIN
    if "\n" not in cell and "\r" not in cell:
        return cell
    return cell.replace("\r\n", " ").replace("\n", " ").replace("\r", " ")


def _row_plain(row: Sequence[str]) -> str:
    return " ".join(_plain_cell(c) for c in row)


def _row_csv(row: Sequence[str]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL).writerow(row)
    return buf.getvalue()[:-1]


def _row_xml(row: Sequence[str]) -> str:
    return "<row>" + "".join(f"<cell>{xml_escape(c)}</cell>" for c in row) + "</row>"


def _row_html(row: Sequence[str]) -> str:
    return "<tr>" + "".join(f"<td>{html.escape(c)}</td>" for c in row) + "</tr>"


# every layout is a join of independently rendered rows
_ROWS = {
    SerializationFormat.PLAIN: _row_plain,
    SerializationFormat.CSV: _row_csv,
    SerializationFormat.XML: _row_xml,
    SerializationFormat.HTML: _row_html,
}


def row_fragments(rows: Rows, fmt: SerializationFormat | str = SerializationFormat.PLAIN) -> list[str]:
    """Per-row pieces that :func:`assemble` joins into the serialized table."""
    render = _ROWS[SerializationFormat.parse(fmt)]
    return [render(row) for row in rows]


def assemble(fragments: Sequence[str], fmt: SerializationFormat | str = SerializationFormat.PLAIN) -> str:
    fmt = SerializationFormat.parse(fmt)
    if fmt in (SerializationFormat.PLAIN, SerializationFormat.CSV):
        return "\n".join(fragments)
    return "<table>" + "".join(fragments) + "</table>"


def serialize_table(table: Table | Rows, fmt: SerializationFormat | str = SerializationFormat.PLAIN) -> str:
    """Render a table as text.

    PLAIN joins cells with one space and rows with a newline (cell newlines
    become spaces). CSV quotes cells containing commas, quotes or newlines.
    XML uses ``<table>/<row>/<cell>`` and HTML ``<table>/<tr>/<td>``, both
    with escaped cell text.
    """
    rows = table.rows if isinstance(table, Table) else table
    if not rows:
        raise ValueError("cannot serialize a table with no rows")
    return assemble(row_fragments(rows, fmt), fmt)


def serialize_row(row: Sequence[str], fmt: SerializationFormat | str = SerializationFormat.PLAIN) -> str:
    """Serialize a single row as it appears inside a PLAIN or CSV table."""
    fmt = SerializationFormat.parse(fmt)
    if fmt not in (SerializationFormat.PLAIN, SerializationFormat.CSV):
        raise ValueError("row-level serialization is only defined for PLAIN and CSV")
    return _ROWS[fmt](row)


def parse_csv(text: str) -> list[list[str]]:
    """Inverse of CSV serialization."""
    return [row for row in csv.reader(io.StringIO(text))]
