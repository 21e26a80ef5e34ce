"""Ground-truth loading, RETA accuracy and RPD statistics.

All arithmetic is exact (``Fraction``/``Decimal``); values are rounded to
four places only when rendered.
"""

from __future__ import annotations

import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DatasetError, EmptyEvalError, EvalError, UndefinedRpdError

Triple = tuple[str, str, str]
Number = Fraction | Decimal | int | float | str


class Locus(enum.Enum):
    TABLE_ONLY = "table_only"
    TEXT_AND_TABLE = "text_and_table"


@dataclass(frozen=True)
class GroundTruthRecord:
    company: str
    time: str
    keyword: str
    value_millions: Decimal
    aliases: tuple[str, ...] = ()
    locus: Locus | None = None
    doc_id: str | None = None

    @property
    def triple(self) -> Triple:
        return (self.company, self.time, self.keyword)


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


_PERCENT = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*%\s*$")


def parse_tolerance(value: Number) -> Fraction:
    """``"5%"`` and ``0.05`` both mean one twentieth."""
    if isinstance(value, str):
        m = _PERCENT.match(value)
        tol = Fraction(m.group(1)) / 100 if m else _frac(value.strip())
    else:
        tol = _frac(value)
    if tol < 0:
        raise ValueError(f"tolerance must be nonnegative, got {value!r}")
    return tol


def _pct(frac: Fraction) -> str:
    text = format(Decimal(frac.numerator) / Decimal(frac.denominator) * 100, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text + "%"


@dataclass(frozen=True, order=True)
class RetaLevel:
    tolerance: Fraction

    @classmethod
    def parse(cls, value: "RetaLevel | Number") -> "RetaLevel":
        return value if isinstance(value, RetaLevel) else cls(parse_tolerance(value))

    @property
    def label(self) -> str:
        return _pct(self.tolerance)

    def __str__(self) -> str:
        return f"RETA {self.label}"


def parse_levels(spec: str | Iterable[Number]) -> tuple[RetaLevel, ...]:
    """Comma-separated list or iterable of tolerances."""
    items = spec.split(",") if isinstance(spec, str) else spec
    levels = tuple(RetaLevel.parse(x) for x in items if not (isinstance(x, str) and not x.strip()))
    if not levels:
        raise ValueError("need at least one RETA level")
    return levels


COARSE_LEVELS = parse_levels("1%,3%,5%,10%")
FINE_LEVELS = parse_levels("0%,0.001%,0.01%,0.1%")


def reta_correct(truth: Number, pred: Number | None, tolerance: Number) -> bool:
    """True when ``pred`` is within ``tolerance`` relative error of ``truth`` (inclusive).

    A zero truth only accepts an exact zero prediction; a missing prediction
    is never correct.
    """
    if pred is None:
        return False
    t, p = _frac(truth), _frac(pred)
    tol = parse_tolerance(tolerance) if isinstance(tolerance, str) else _frac(tolerance)
    if t == 0:
        return p == 0
    return abs(p - t) <= tol * abs(t)


def accuracy(records: Sequence[tuple[Number, Number | None]], tolerance: Number) -> Fraction:
    if not records:
        raise EmptyEvalError("accuracy of an empty record set")
    hits = sum(reta_correct(t, p, tolerance) for t, p in records)
    return Fraction(hits, len(records))


def rpd(acc_x: Number, acc_y: Number) -> Fraction:
    """Relative percentage difference |x - y| / mean(x, y), as a fraction (not x100)."""
    x, y = _frac(acc_x), _frac(acc_y)
    if x + y == 0:
        raise UndefinedRpdError("RPD is undefined when both accuracies are zero")
    return abs(x - y) / ((x + y) / 2)


def mean(values: Iterable[Number]) -> Fraction:
    vals = [_frac(v) for v in values]
    if not vals:
        raise EmptyEvalError("mean of nothing")
    return sum(vals, Fraction(0)) / len(vals)


def round4(x: Number) -> Decimal:
    f = _frac(x)
    return (Decimal(f.numerator) / Decimal(f.denominator)).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP)


# ---- dataset i/o ------------------------------------------------------------


def _decimal(value: object, what: str, line: int) -> Decimal:
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise DatasetError(f"{what} must be a number or numeric string", line)
    try:
        d = Decimal(str(value).replace(",", ""))
    except InvalidOperation:
        raise DatasetError(f"{what} is not numeric: {value!r}", line) from None
    if not d.is_finite():
        raise DatasetError(f"{what} must be finite", line)
    return d


def load_dataset(path: str | Path) -> list[GroundTruthRecord]:
    """Read ground-truth JSONL; blank lines are skipped.

    Raises:
        DatasetError: with the 1-based line number of the first bad record,
            including duplicate (company, time, keyword) triples.
    """
    records: list[GroundTruthRecord] = []
    seen: set[Triple] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(raw, dict):
                raise DatasetError("record must be a JSON object", lineno)
            for key in ("company", "time", "keyword"):
                if not isinstance(raw.get(key), str):
                    raise DatasetError(f"{key!r} must be a string", lineno)
            if not raw["keyword"].strip():
                raise DatasetError("keyword must be nonempty", lineno)
            if "value_millions" not in raw:
                raise DatasetError("missing 'value_millions'", lineno)
            value = _decimal(raw["value_millions"], "value_millions", lineno)
            if value.as_tuple().exponent < -2:
                raise DatasetError("value_millions has more than two decimal places", lineno)
            aliases = raw.get("aliases", [])
            if not isinstance(aliases, list) or not all(isinstance(a, str) for a in aliases):
                raise DatasetError("'aliases' must be a list of strings", lineno)
            try:
                locus = Locus(raw["locus"]) if raw.get("locus") is not None else None
            except ValueError:
                raise DatasetError(f"unknown locus {raw['locus']!r}", lineno) from None
            rec = GroundTruthRecord(
                raw["company"], raw["time"], raw["keyword"], value, tuple(aliases), locus, raw.get("doc_id")
            )
            if rec.triple in seen:
                raise DatasetError(f"duplicate record {rec.triple}", lineno)
            seen.add(rec.triple)
            records.append(rec)
    return records


def load_predictions(path: str | Path) -> dict[Triple, Decimal | None]:
    preds: dict[Triple, Decimal | None] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                triple = (raw["company"], raw["time"], raw["keyword"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DatasetError(f"bad prediction record: {exc}", lineno) from None
            value = raw.get("value")
            preds[triple] = None if value is None else _decimal(value, "value", lineno)
    return preds


def dump_predictions(predictions: Mapping[Triple, Decimal | str | None]) -> str:
    lines = []
    for (company, time, keyword), value in predictions.items():
        rendered = None if value is None else str(value)
        lines.append(json.dumps({"company": company, "time": time, "keyword": keyword, "value": rendered}, ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


# ---- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    levels: tuple[RetaLevel, ...]
    accuracies: tuple[Fraction, ...]
    verdicts: dict[Triple, tuple[bool, ...]] = field(repr=False)
    n_records: int
    n_absent: int
    averaging: str = "micro"

    @property
    def average(self) -> Fraction:
        return mean(self.accuracies)

    def accuracy_at(self, level: RetaLevel | Number) -> Fraction:
        return self.accuracies[self.levels.index(RetaLevel.parse(level))]

    def accuracy_by(self, part: str = "keyword") -> dict[str, tuple[Fraction, ...]]:
        """Micro accuracy per keyword (or per company / time) at every level."""
        pos = {"company": 0, "time": 1, "keyword": 2}[part]
        groups: dict[str, list[tuple[bool, ...]]] = defaultdict(list)
        for triple, verdict in self.verdicts.items():
            groups[triple[pos]].append(verdict)
        return {
            name: tuple(Fraction(sum(v[i] for v in rows), len(rows)) for i in range(len(self.levels)))
            for name, rows in sorted(groups.items())
        }

    def rpd_between(self, keyword_x: str, keyword_y: str) -> tuple[Fraction, ...]:
        """Per-level RPD between the accuracies of two keywords."""
        by = self.accuracy_by("keyword")
        return tuple(rpd(x, y) for x, y in zip(by[keyword_x], by[keyword_y]))

    def to_dict(self) -> dict:
        return {
            "averaging": self.averaging,
            "n_records": self.n_records,
            "n_absent": self.n_absent,
            "levels": [lv.label for lv in self.levels],
            "accuracy": {lv.label: str(round4(a)) for lv, a in zip(self.levels, self.accuracies)},
            "accuracy_exact": {lv.label: str(a) for lv, a in zip(self.levels, self.accuracies)},
            "average": str(round4(self.average)),
        }

    def to_text(self, name: str = "Run") -> str:
        return format_table({name: self.accuracies}, self.levels)


def evaluate_run(
    dataset: Sequence[GroundTruthRecord],
    predictions: Mapping[Triple, Number | None],
    levels: Sequence[RetaLevel | Number] = COARSE_LEVELS,
    macro: bool = False,
) -> EvalReport:
    """Score predictions against the dataset at each RETA level.

    ``macro`` averages per-company accuracies instead of pooling records.

    Raises:
        EvalError: when a dataset triple has no prediction entry.
    """
    if not dataset:
        raise EmptyEvalError("empty dataset")
    levels = tuple(RetaLevel.parse(lv) for lv in levels)
    verdicts: dict[Triple, tuple[bool, ...]] = {}
    n_absent = 0
    for rec in dataset:
        if rec.triple not in predictions:
            raise EvalError(f"no prediction for {rec.triple}")
        pred = predictions[rec.triple]
        n_absent += pred is None
        verdicts[rec.triple] = tuple(reta_correct(rec.value_millions, pred, lv.tolerance) for lv in levels)
    report = EvalReport(levels, (), verdicts, len(dataset), n_absent, "macro" if macro else "micro")
    if macro:
        per_company = report.accuracy_by("company").values()
        accs = tuple(mean(c[i] for c in per_company) for i in range(len(levels)))
    else:
        accs = tuple(Fraction(sum(v[i] for v in verdicts.values()), len(verdicts)) for i in range(len(levels)))
    return EvalReport(levels, accs, verdicts, len(dataset), n_absent, report.averaging)


def format_table(
    rows: Mapping[str, Sequence[Number]],
    levels: Sequence[RetaLevel],
    average: bool = True,
    percent: bool = False,
) -> str:
    """Aligned plain-text table: one row per run, RETA columns, then Average."""
    header = [""] + [str(lv) for lv in levels] + (["Average"] if average else [])
    body = []
    for name, values in rows.items():
        vals = list(values) + ([mean(values)] if average else [])
        if percent:
            cells = [f"{round4(_frac(v) * 100):.2f}%" for v in vals]
        else:
            cells = [str(round4(v)) for v in vals]
        body.append([name] + cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), rule] + [fmt(r) for r in body]) + "\n"
