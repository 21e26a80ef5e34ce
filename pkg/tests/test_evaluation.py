import json
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from afie import (
    COARSE_LEVELS,
    FINE_LEVELS,
    DatasetError,
    EmptyEvalError,
    EvalError,
    GroundTruthRecord,
    Locus,
    RetaLevel,
    UndefinedRpdError,
    accuracy,
    evaluate_run,
    load_dataset,
    parse_tolerance,
    reta_correct,
    rpd,
)
from afie.evaluation import dump_predictions, format_table, load_predictions, mean, parse_levels, round4

D = Decimal


@pytest.mark.parametrize("truth, pred, tol, ok", [
    ("65135.00", "65135.00", "0%", True),
    ("100.00", "105.00", "5%", True),
    ("100.00", "95.00", "5%", True),
    ("100.00", "105.01", "5%", False),
    ("100.00", "110.01", "10%", False),
    ("-100.00", "-103.00", "3%", True),
    ("0", "0", "0%", True),
    ("0", "0.01", "10%", False),
    ("5", None, "10%", False),
])
def test_reta_correct(truth, pred, tol, ok):
    assert reta_correct(D(truth), None if pred is None else D(pred), tol) is ok


def test_parse_tolerance_forms():
    assert parse_tolerance("5%") == parse_tolerance(0.05) == parse_tolerance("0.05") == Fraction(1, 20)
    assert parse_tolerance("0.001%") == Fraction(1, 100000)
    assert parse_tolerance(0) == 0
    with pytest.raises(ValueError):
        parse_tolerance("-1%")


def test_level_labels():
    assert [lv.label for lv in FINE_LEVELS] == ["0%", "0.001%", "0.01%", "0.1%"]
    assert [str(lv) for lv in COARSE_LEVELS] == ["RETA 1%", "RETA 3%", "RETA 5%", "RETA 10%"]
    assert parse_levels("0,0.001%,0.01%,0.1%") == FINE_LEVELS


def test_accuracy_and_means():
    assert accuracy([(D(1), D(1)), (D(2), D(2))], 0) == 1
    with pytest.raises(EmptyEvalError):
        accuracy([], "1%")
    assert round4(mean(["0.6389", "0.6938", "0.7194", "0.7451"])) == D("0.6993")
    assert mean(["0.4757", "0.5278", "0.5444", "0.5694"]) == Fraction("0.529325")
    assert round4(Fraction("0.529325")) == D("0.5293")


def test_rpd_examples():
    assert rpd("0.5", "0.5") == 0
    assert abs(rpd("0.3056", "0.2361") * 100 - Fraction("25.64")) <= Fraction(1, 10)
    assert abs(rpd("0.0260", "0.0521") * 100 - Fraction("66.90")) <= Fraction(2, 10)
    with pytest.raises(UndefinedRpdError):
        rpd(0, 0)


fractions01 = st.fractions(min_value=0, max_value=1)


@given(fractions01, fractions01)
def test_rpd_laws(x, y):
    if x + y == 0:
        return
    assert rpd(x, y) == rpd(y, x)
    assert 0 <= rpd(x, y) <= 2
    if x:
        assert rpd(x, x) == 0


@given(st.lists(st.tuples(st.decimals(-10**6, 10**6, places=2), st.one_of(st.none(), st.decimals(-10**6, 10**6, places=2))), min_size=1, max_size=30))
def test_accuracy_monotone_in_tolerance(records):
    grid = parse_levels("0,0.001%,0.01%,0.1%,1%,3%,5%,10%")
    accs = [accuracy(records, lv.tolerance) for lv in grid]
    assert accs == sorted(accs)


def write(tmp_path, lines):
    path = tmp_path / "d.jsonl"
    path.write_text("".join((ln if isinstance(ln, str) else json.dumps(ln)) + "\n" for ln in lines))
    return path


def test_load_dataset_example(tmp_path):
    rec = {"company": "COMPANY", "time": "three months ended 2022.12.31", "keyword": "Revenue", "value_millions": "12345.00",
           "aliases": ["Total net sales"], "locus": "table_only"}
    (got,) = load_dataset(write(tmp_path, [rec, ""]))
    assert got == GroundTruthRecord("COMPANY", "three months ended 2022.12.31", "Revenue", D("12345.00"),
                                    ("Total net sales",), Locus.TABLE_ONLY)


def test_empty_dataset(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


@pytest.mark.parametrize("bad, line", [
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": "1"}'] * 2, 2),
    (['{"company": "C", "time": "t", "keyword": "", "value_millions": "1"}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": "1.234"}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": "NaN"}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k"}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": true}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": "1", "locus": "x"}'], 1),
    (['{"company": "C", "time": "t", "keyword": "k", "value_millions": "1"}', "{not json"], 2),
])
def test_dataset_errors_carry_line_numbers(tmp_path, bad, line):
    with pytest.raises(DatasetError) as err:
        load_dataset(write(tmp_path, bad))
    assert err.value.line == line


def records(n):
    return [GroundTruthRecord("C", "t", f"k{i}", D("100.00")) for i in range(n)]


def test_evaluate_run_synthetic_twenty():
    ds = records(20)
    preds = {}
    for i, r in enumerate(ds):
        preds[r.triple] = D("100.00") if i < 10 else D("102.00") if i < 15 else None
    report = evaluate_run(ds, preds, parse_levels("0%,3%"))
    assert report.accuracies == (Fraction(1, 2), Fraction(3, 4))
    assert report.average == Fraction(5, 8)
    assert report.n_absent == 5
    assert report.accuracy_at("3%") == Fraction(3, 4)


def test_evaluate_run_trivial_and_errors():
    ds = records(3)
    perfect = {r.triple: r.value_millions for r in ds}
    assert evaluate_run(ds, perfect, ["0%", "1%"]).accuracies == (1, 1)
    assert evaluate_run(ds, {r.triple: None for r in ds}).accuracies == (0, 0, 0, 0)
    with pytest.raises(EvalError, match="k2"):
        evaluate_run(ds, {r.triple: None for r in ds[:2]})
    with pytest.raises(EmptyEvalError):
        evaluate_run([], {})


def test_macro_vs_micro():
    ds = [GroundTruthRecord("A", "t", f"k{i}", D(1)) for i in range(3)] + [GroundTruthRecord("B", "t", "k", D(1))]
    preds = {r.triple: (D(1) if r.company == "A" else None) for r in ds}
    assert evaluate_run(ds, preds, ["0%"]).accuracies == (Fraction(3, 4),)
    assert evaluate_run(ds, preds, ["0%"], macro=True).accuracies == (Fraction(1, 2),)


def test_slicing_by_keyword_and_rpd():
    ds = [GroundTruthRecord(c, "t", k, D(1)) for c in "ABCD" for k in ("Revenue", "Sales")]
    preds = {r.triple: (D(1) if r.keyword == "Revenue" or r.company == "A" else None) for r in ds}
    report = evaluate_run(ds, preds, ["0%"])
    assert report.accuracy_by("keyword") == {"Revenue": (1,), "Sales": (Fraction(1, 4),)}
    assert report.rpd_between("Revenue", "Sales") == (Fraction(6, 5),)


def test_report_rendering():
    ds = records(3)
    preds = {r.triple: (r.value_millions if i else None) for i, r in enumerate(ds)}
    report = evaluate_run(ds, preds, FINE_LEVELS)
    d = report.to_dict()
    assert d["accuracy"]["0%"] == "0.6667" and d["accuracy_exact"]["0%"] == "2/3"
    assert d["average"] == "0.6667" and d["n_absent"] == 1
    text = report.to_text("Run")
    assert text.splitlines()[0].split("|")[1].strip() == "RETA 0%"
    assert text.splitlines()[2].split("|")[-1].strip() == "0.6667"
    assert "66.67%" in format_table({"x": [Fraction(2, 3)]}, [RetaLevel(Fraction(0))], average=False, percent=True)


def test_predictions_round_trip(tmp_path):
    preds = {("C", "t", "Revenue"): D("5.00"), ("C", "t", "Sales"): None}
    path = tmp_path / "p.jsonl"
    path.write_text(dump_predictions(preds))
    assert load_predictions(path) == preds
