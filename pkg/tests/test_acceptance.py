"""Acceptance criteria, one test each, every one timed against its runtime limit.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""

import json
import random
import time
from contextlib import contextmanager
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from afie import (
    COARSE_LEVELS,
    DEFAULT_COUNTER,
    FINE_LEVELS,
    PROFILES,
    HashingEmbedder,
    MoneyValue,
    SegmentationConfig,
    evaluate_run,
    load_dataset,
    parse_money,
    render_money,
    retrieve_top_k,
    rpd,
    serialize_table,
)
from afie.cli import main
from afie.evaluation import GroundTruthRecord, load_predictions, mean
from afie.prompting import TEMPLATE_NAMES, load_template
from afie.retrieval import score_segments, slice_text
from afie.segmentation import Segment
from money_oracle import as_fraction, money_case, render, round_half_away
from synth import planted_corpus, random_document, random_table, write_corpus
from test_segmentation import check_segments

TABLES = json.loads((Path(__file__).parent / "fixtures" / "published_tables.json").read_text(encoding="utf-8"))


@contextmanager
def within(seconds):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < seconds, f"took {elapsed:.2f}s, limit {seconds}s"


def test_criterion_1_table_averages():
    with within(1):
        rows = 0
        for name, table in TABLES["accuracy_tables"].items():
            for label, (cells, printed) in table["rows"].items():
                # a printed 4-dp average is accepted if it is within half a unit
                gap = abs(mean(cells) - Fraction(printed))
                assert gap <= Fraction(5, 10**5), (name, label, float(mean(cells)), printed)
                rows += 1
        assert rows == 22
        assert mean(TABLES["accuracy_tables"]["retrieval_quantity"]["rows"]["R@3"][0]) == Fraction("0.69930")


def test_criterion_2_rpd_cells():
    with within(1):
        worst, cells = Fraction(0), 0
        for group in TABLES["rpd_tables"].values():
            for row in group:
                pct = [rpd(x, y) * 100 for x, y in zip(row["acc_x"], row["acc_y"])]
                for got, printed in zip(pct, row["rpd_pct"]):
                    worst = max(worst, abs(got - Fraction(printed)))
                    cells += 1
                worst = max(worst, abs(mean(pct) - Fraction(row["average_pct"])))
        assert cells == 16
        assert worst <= Fraction(2, 10), float(worst)
        assert Fraction("25.6") <= rpd("0.3056", "0.2361") * 100 <= Fraction("25.7")


def test_criterion_3_segmentation_properties():
    rng = random.Random(2024)
    configs = [SegmentationConfig(b.element_limit, b.segment_limit) for b in PROFILES.values()]
    with within(30):
        n_segments = 0
        for _ in range(1000):
            doc = random_document(rng, 50_000)
            for config in configs:
                n_segments += len(check_segments(doc, config))
    assert n_segments >= 2000


def test_criterion_4_serialization_token_order():
    rng = random.Random(11)
    tables = []
    while len(tables) < 500:
        rows = random_table(rng, min_rows=2, max_rows=30)
        if len(rows[0]) >= 2:
            tables.append(rows)
    assert all(cell for rows in tables for row in rows for cell in row)
    with within(5):
        for rows in tables:
            n = {f: DEFAULT_COUNTER.count(serialize_table(rows, f)) for f in ("PLAIN", "CSV", "XML", "HTML")}
            assert n["PLAIN"] <= n["CSV"] < n["XML"], n
            assert n["CSV"] < n["HTML"], n


PALETTE = [(Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)), (Fraction(3, 5), Fraction(4, 5)),
           (Fraction(4, 5), Fraction(3, 5)), (Fraction(-1), Fraction(0))]


class PaletteEmbedder:
    """Word ``pN`` maps to palette vector N and the query ``q`` to (1, 0); ties are common."""

    max_input_tokens = 1

    def embed(self, texts):
        return np.array([[1.0, 0.0] if t == "q" else [float(c) for c in PALETTE[int(t[1])]] for t in texts])


def brute_force(scores, k):
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(ranked[:k])


def test_criterion_5_retrieval_oracle():
    rng = random.Random(5)
    hashing = HashingEmbedder()
    with within(20):
        for trial in range(200):
            n = rng.randint(1, 50)
            words = [[f"p{rng.randrange(len(PALETTE))}" for _ in range(rng.randint(1, 6))] for _ in range(n)]
            segs = [Segment(" ".join(w), len(w), (i,), i) for i, w in enumerate(words)]
            exact = [max(PALETTE[int(x[1])][0] for x in w) for w in words]
            for k in (1, 2, 3, 5, 7, n):
                got = retrieve_top_k(segs, "q", k, PaletteEmbedder())
                assert [s.segment_index for s in got] == brute_force(exact, k)
            if trial % 4 == 0:
                texts = [" ".join(rng.choice(("revenue", "assets", "income", "risk", "market")) for _ in range(rng.randint(1, 300)))
                         for _ in range(n)]
                segs = [Segment(t, DEFAULT_COUNTER.count(t), (i,), i) for i, t in enumerate(texts)]
                scores = [float(np.max(hashing.embed(slice_text(t, hashing.max_input_tokens)) @ hashing.embed(["revenue assets"])[0]))
                          for t in texts]
                assert score_segments(segs, "revenue assets", hashing) == scores
                for k in (1, 2, 3, 5, 7, n):
                    got = retrieve_top_k(segs, "revenue assets", k, hashing)
                    assert [s.segment_index for s in got] == brute_force(scores, k)


def test_criterion_6_money_oracle():
    rng = random.Random(6)
    cases = [money_case(rng) for _ in range(500)]
    with within(5):
        for text, value in cases:
            parsed = parse_money(text)
            assert as_fraction(parsed) == value, text
            for places in (2, 3):
                rendered = render_money(parsed, places, grouping=True)
                assert rendered == render(value, places), (text, places)
                assert as_fraction(parse_money(rendered)) == round_half_away(value, places)
        anchors = [("$65.135 billion", 2, "65,135.00"), ("$2.126 million", 2, "2.13"),
                   ("$1.2345 billion", 3, "1,234.500"), ("$50.1245 million", 3, "50.125")]
        for text, places, expected in anchors:
            assert MoneyValue.parse(text, places).render(grouping=True) == expected
    scales = {t.lower().split()[-1] for t, _ in cases}
    assert {"thousand", "million", "billion"} <= scales
    assert any(t.startswith("(") for t, _ in cases) and any("," in t for t, _ in cases)


def _eval(dataset, docs, out, strategy):
    code = main(["eval", "--dataset", str(dataset), "--docs-dir", str(docs), "--out-dir", str(out),
                 "--strategy", strategy, "--k", "3", "--completion", "A_T_C", "--backend", "mock", "--levels", "0"])
    assert code == 0
    return out


def test_criterion_7_end_to_end_mock(tmp_path, capsys):
    dataset, docs = write_corpus(planted_corpus(seed=7, n_docs=50), tmp_path)
    with within(10):
        first = _eval(dataset, docs, tmp_path / "a", "refine")
        second = _eval(dataset, docs, tmp_path / "b", "refine")
        other = _eval(dataset, docs, tmp_path / "c", "map_reduce")
    capsys.readouterr()
    for name in ("predictions.jsonl", "report.json", "report.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    report = json.loads((first / "report.json").read_text(encoding="utf-8"))
    assert report["n_records"] == 150
    assert report["accuracy"] == {"0%": "1.0000"} and report["accuracy_exact"] == {"0%": "1"}
    records = load_dataset(dataset)
    verdicts = [evaluate_run(records, load_predictions(d / "predictions.jsonl"), "0").verdicts for d in (first, other)]
    assert verdicts[0] == verdicts[1]


def test_criterion_8_prompt_fidelity(capsys):
    with within(1):
        assert main(["templates", "verify"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["ok"] and all(c["passed"] for c in out["checks"])
        bodies = {name: load_template(name).body for name in TEMPLATE_NAMES}
        assert "Old summary:" in bodies["refine"]
        assert any("round to three decimal places" in b for b in bodies.values())
        assert any("50.125" in b and "1,234.500" in b for b in bodies.values())
        assert sum(c["name"].endswith("variant matrix") for c in out["checks"]) == 6


def test_criterion_9_reta_monotone():
    rng = random.Random(9)
    grid = FINE_LEVELS + COARSE_LEVELS
    with within(5):
        for _ in range(100):
            n = rng.randint(1, 60)
            dataset = [GroundTruthRecord(f"C{i}", "2022Q1", "Revenue", Decimal(rng.randint(-10**7, 10**7)).scaleb(-2))
                       for i in range(n)]
            preds = {}
            for rec in dataset:
                roll = rng.random()
                if roll < 0.1:
                    preds[rec.triple] = None
                else:
                    noise = Decimal(rng.choice((0, 1e-6, 1e-4, 1e-3, 0.02, 0.04, 0.08, 0.2)) * rng.choice((-1, 1)))
                    preds[rec.triple] = (rec.value_millions * (1 + noise)).quantize(Decimal("0.001"))
            accs = evaluate_run(dataset, preds, grid).accuracies
            assert list(accs) == sorted(accs)
