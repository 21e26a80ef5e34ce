"""Exact money parsing and rendering, normalised to millions."""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation, localcontext
from typing import Iterator

from .errors import MoneyParseError

_SCALE_EXP = {"thousand": -3, "million": 0, "billion": 3}

_MONEY = r"""
    (?:(?P<neg>-)\s*)?
    (?:(?P<open>\()\s*)?
    (?:(?P<cur>\$)\s*)?
    (?:(?P<open2>\()\s*)?
    (?P<num>\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?|\.\d+)
    (?:\s*(?P<close>\)))?
    (?:\s*(?P<scale>thousand|million|billion)s?)?
    (?:\s*(?P<close2>\)))?
"""
_MONEY_FULL = re.compile(_MONEY, re.IGNORECASE | re.VERBOSE)
_MONEY_SCAN = re.compile(r"(?<![\w.,$(-])" + _MONEY + r"(?![\w])", re.IGNORECASE | re.VERBOSE)


def _value(m: re.Match) -> Decimal:
    opens = bool(m["open"]) + bool(m["open2"])
    closes = bool(m["close"]) + bool(m["close2"])
    if opens != closes or opens > 1:
        raise MoneyParseError(f"unbalanced parentheses in {m.group(0)!r}")
    value = Decimal(m["num"].replace(",", ""))
    scale = (m["scale"] or "million").lower()
    value = value.scaleb(_SCALE_EXP[scale])
    if m["neg"] or opens:
        value = -value
    return value


def parse_money(text: str) -> Decimal:
    """Parse a money expression to an exact amount in millions.

    Accepts an optional ``$``, parentheses for negatives, comma digit groups,
    a fractional part and a trailing scale word (thousand/million/billion).
    Bare numbers are taken to be in millions already.

    >>> parse_money("$65.135 billion")
    Decimal('65135')
    >>> parse_money("(1,234)")
    Decimal('-1234')
    """
    m = _MONEY_FULL.fullmatch(text.strip())
    if m is None:
        raise MoneyParseError(f"not a money expression: {text!r}")
    return _value(m)


@dataclass(frozen=True)
class MoneyMatch:
    start: int
    end: int
    text: str
    millions: Decimal
    explicit: bool  # carried a "$" or a scale word


def find_money(text: str) -> Iterator[MoneyMatch]:
    """Scan free text for money expressions not glued to other word characters."""
    for m in _MONEY_SCAN.finditer(text):
        try:
            value = _value(m)
        except MoneyParseError:
            continue
        yield MoneyMatch(m.start(), m.end(), m.group(0), value, bool(m["cur"] or m["scale"]))


def round_half_away(value: Decimal, precision: int) -> Decimal:
    with localcontext() as ctx:
        ctx.prec = max(50, len(value.as_tuple().digits) + precision + 10)
        try:
            q = value.quantize(Decimal(1).scaleb(-precision), rounding=ROUND_HALF_UP)
        except InvalidOperation as exc:
            raise ValueError(f"cannot round {value!r}") from exc
    return q if q else abs(q)  # no negative zero


def render_money(value: Decimal, precision: int = 2, grouping: bool = False) -> str:
    """Format a millions amount with exactly ``precision`` decimals.

    >>> render_money(Decimal("1.005"), 2)
    '1.01'
    >>> render_money(Decimal("65135"), 2, grouping=True)
    '65,135.00'
    """
    q = round_half_away(Decimal(value), precision)
    return f"{q:,.{precision}f}" if grouping else f"{q:.{precision}f}"


@dataclass(frozen=True)
class MoneyValue:
    amount_millions: Decimal
    precision: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "amount_millions", round_half_away(Decimal(self.amount_millions), self.precision))

    @classmethod
    def parse(cls, text: str, precision: int = 2) -> "MoneyValue":
        return cls(parse_money(text), precision)

    def render(self, grouping: bool = False) -> str:
        return render_money(self.amount_millions, self.precision, grouping)

    def __str__(self) -> str:
        return self.render()
