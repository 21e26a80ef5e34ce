"""``afie`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 pipeline or
document error (and failed template verification), 3 dataset error.
stdout only ever carries JSON (or JSONL); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from .config import BACKENDS, RunConfig
from .document import Document, parse_document
from .errors import AFIEError, DatasetError, EvalError, PipelineError
from .evaluation import dump_predictions, evaluate_run, load_dataset, parse_levels
from .pipeline import Strategy, run_extraction
from .prompting import TEMPLATE_NAMES, CompletionLevel, Keyword, PrecisionVariant, verify_templates
from .segmentation import segment_document
from .serialization import SerializationFormat, serialize_table

log = logging.getLogger("afie")

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE, EXIT_DATASET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _UsageError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def _run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI run configuration")
    p.add_argument("--profile", help="token budget profile name")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--format", type=str.upper, choices=[f.value for f in SerializationFormat])
    p.add_argument("--k", type=int)
    p.add_argument("--precision-variant", choices=[v.value for v in PrecisionVariant])
    p.add_argument("--completion", choices=[c.value for c in CompletionLevel])
    p.add_argument("--trace", help="append every model and embedding call to this JSONL file")


def _config(args: argparse.Namespace) -> RunConfig:
    try:
        base = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
        return base.updated(
            profile=getattr(args, "profile", None),
            backend=getattr(args, "backend", None),
            strategy=getattr(args, "strategy", None),
            format=getattr(args, "format", None),
            k=getattr(args, "k", None),
            precision_variant=getattr(args, "precision_variant", None),
            completion_level=getattr(args, "completion", None),
            trace_path=getattr(args, "trace", None),
            levels=getattr(args, "levels", None),
            jobs=getattr(args, "jobs", None),
        )
    except (OSError, ValueError) as exc:
        raise _UsageError(f"bad configuration: {exc}") from exc


def _load_doc(path: Path) -> Document:
    return parse_document(path.read_bytes())


# ---- subcommands ------------------------------------------------------------


def cmd_extract(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        doc = _load_doc(args.doc)
    except (OSError, AFIEError) as exc:
        log.error("cannot read document %s: %s", args.doc, exc)
        return EXIT_PIPELINE
    tracer = cfg.tracer()
    keyword = Keyword(args.attribute, args.company, args.time, cfg.completion_level)
    try:
        result = run_extraction(doc, keyword, cfg.pipeline_config(tracer), cfg.build_client(tracer))
    except PipelineError as exc:
        log.error("extraction failed: %s", exc)
        return EXIT_PIPELINE
    _emit(result.to_dict())
    return EXIT_OK


class _DocIndex:
    """Documents in a directory, found by id, file stem, or (company, period)."""

    def __init__(self, directory: Path) -> None:
        self.by_id: dict[str, Document] = {}
        self.by_meta: dict[tuple[str, str], list[Document]] = {}
        for path in sorted(directory.glob("*.json")):
            try:
                doc = _load_doc(path)
            except AFIEError as exc:
                log.warning("skipping %s: %s", path.name, exc)
                continue
            self.by_id.setdefault(doc.id, doc)
            self.by_id.setdefault(path.stem, doc)
            self.by_meta.setdefault((doc.company, doc.period), []).append(doc)

    def find(self, doc_id: str | None, company: str, time: str) -> Document | None:
        if doc_id is not None:
            return self.by_id.get(doc_id)
        found = self.by_meta.get((company, time), [])
        if len(found) > 1:
            log.warning("%d documents match %s %s; using %s", len(found), company, time, found[0].id)
        return found[0] if found else None


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        dataset = load_dataset(args.dataset)
    except (OSError, DatasetError) as exc:
        log.error("dataset error: %s", exc)
        return EXIT_DATASET
    if not dataset:
        log.error("dataset error: %s holds no records", args.dataset)
        return EXIT_DATASET
    if not args.docs_dir.is_dir():
        raise _UsageError(f"--docs-dir {args.docs_dir} is not a directory")
    index = _DocIndex(args.docs_dir)
    tracer = cfg.tracer()
    pipeline = cfg.pipeline_config(tracer)
    client = cfg.build_client(tracer)

    def predict(rec):
        doc = index.find(rec.doc_id, rec.company, rec.time)
        if doc is None:
            log.warning("no document for %s", rec.triple)
            return None
        kw = Keyword(rec.keyword, rec.company, rec.time, cfg.completion_level)
        try:
            result = run_extraction(doc, kw, pipeline, client)
        except PipelineError as exc:
            log.warning("%s: %s", rec.triple, exc)
            return None
        return None if result.value is None else result.value.amount_millions

    # map() keeps dataset order whatever the worker count
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        values = list(pool.map(predict, dataset))
    predictions = {rec.triple: v for rec, v in zip(dataset, values)}
    try:
        report = evaluate_run(dataset, predictions, cfg.levels, macro=args.macro)
    except EvalError as exc:
        log.error("evaluation failed: %s", exc)
        return EXIT_DATASET

    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "predictions.jsonl").write_text(dump_predictions(predictions), encoding="utf-8")
    summary = report.to_dict()
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(report.to_text("AFIE"), encoding="utf-8")
    _emit(summary)
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        doc = _load_doc(args.doc)
        segments = segment_document(doc, cfg.pipeline_config().segmentation)
    except (OSError, AFIEError) as exc:
        log.error("segmentation failed: %s", exc)
        return EXIT_PIPELINE
    for seg in segments:
        _emit(seg.to_dict())
    return EXIT_OK


def cmd_serialize(args: argparse.Namespace) -> int:
    cfg = _config(args)
    try:
        doc = _load_doc(args.doc)
    except (OSError, AFIEError) as exc:
        log.error("cannot read document %s: %s", args.doc, exc)
        return EXIT_PIPELINE
    for el in doc.elements:
        if hasattr(el, "rows"):
            _emit({"element_id": el.element_id, "kind": "table", "text": serialize_table(el, cfg.format)})
        else:
            _emit({"element_id": el.element_id, "kind": "paragraph", "text": el.text})
    return EXIT_OK


def cmd_templates(args: argparse.Namespace) -> int:
    if args.action == "list":
        _emit(list(TEMPLATE_NAMES))
        return EXIT_OK
    checks = verify_templates(args.dir)
    for check in checks:
        if not check.passed:
            log.error("FAIL %s: %s", check.name, check.detail)
    ok = all(c.passed for c in checks)
    _emit({"ok": ok, "checks": [asdict(c) for c in checks]})
    return EXIT_OK if ok else EXIT_PIPELINE


def cmd_config(args: argparse.Namespace) -> int:
    cfg = _config(args)
    args.out.write_text(cfg.to_ini(), encoding="utf-8")
    _emit({"written": str(args.out)})
    return EXIT_OK


# ---- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afie", description="Keyword value extraction from hybrid financial documents.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="extract one keyword value from one document")
    p.add_argument("--doc", type=Path, required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--company")
    p.add_argument("--time")
    _run_options(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="run a dataset and score it")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--docs-dir", type=Path, required=True)
    p.add_argument("--levels", type=_levels, help="comma-separated tolerances, e.g. 0,0.001%%,1%%")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out-dir", type=Path, default=Path("afie-eval"))
    p.add_argument("--macro", action="store_true", help="average per-company accuracies")
    _run_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("segment", help="dump the segments of a document as JSONL")
    p.add_argument("--doc", type=Path, required=True)
    _run_options(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("serialize", help="dump serialized document elements as JSONL")
    p.add_argument("--doc", type=Path, required=True)
    _run_options(p)
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("templates", help="list or verify prompt templates")
    p.add_argument("action", choices=["list", "verify"])
    p.add_argument("--dir", type=Path, help="template directory (default: bundled)")
    p.set_defaults(func=cmd_templates)

    p = sub.add_parser("config", help="write the effective configuration as INI")
    p.add_argument("action", choices=["dump"])
    p.add_argument("--out", type=Path, required=True)
    _run_options(p)
    p.set_defaults(func=cmd_config)
    return parser


def _levels(text: str):
    try:
        return parse_levels(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    # own handler: basicConfig is a no-op when the host already configured logging
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.DEBUG if args.verbose else logging.WARNING)
    log.propagate = False
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"afie: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        log.removeHandler(handler)
        log.propagate = True


if __name__ == "__main__":
    sys.exit(main())
