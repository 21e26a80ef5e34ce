"""End-to-end extraction: segment, retrieve, summarize, extract."""

from __future__ import annotations

import enum
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .budget import PROFILES, TokenBudget
from .document import DEFAULT_COUNTER, Document, Paragraph, TokenCounter
from .errors import BudgetError, MoneyParseError, PipelineError
from .llm import LlmClient, MockLlmClient
from .money import MoneyValue
from .prompting import (
    Keyword,
    PrecisionVariant,
    PromptName,
    PromptTemplate,
    batch_keywords_text,
    load_template,
    render_template,
)
from .retrieval import EmbeddingProvider, HashingEmbedder, retrieve_top_k
from .segmentation import Segment, SegmentationConfig, merge_elements, segment_document
from .serialization import SerializationFormat, serialize_table


class Strategy(enum.Enum):
    REFINE = "refine"
    MAP_REDUCE = "map_reduce"


@dataclass(frozen=True)
class PipelineConfig:
    budget: TokenBudget = PROFILES["gpt35-profile"]
    format: SerializationFormat = SerializationFormat.PLAIN
    k: int = 3
    strategy: Strategy = Strategy.REFINE
    # replaces the question/map prompt when set
    precision_variant: PrecisionVariant | None = None
    # decimal places kept on extracted values; ground truth is 2 dp
    precision: int = 2
    extract_max_tokens: int = 64
    template_dir: str | None = None
    n_jobs: int = 1
    counter: TokenCounter = field(default=DEFAULT_COUNTER, compare=False)
    embedder: EmbeddingProvider = field(default_factory=HashingEmbedder, compare=False)

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        object.__setattr__(self, "format", SerializationFormat.parse(self.format))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.precision_variant is not None:
            object.__setattr__(self, "precision_variant", PrecisionVariant(self.precision_variant))
        if self.precision not in (2, 3):
            raise ValueError("precision must be 2 or 3")
        overhead = max(self.counter.count(self.template(n).body) for n in (PromptName.REFINE, PromptName.REDUCE))
        self.budget.check_overhead(overhead + self.budget.keyword_limit)

    @property
    def segmentation(self) -> SegmentationConfig:
        return SegmentationConfig(self.budget.element_limit, self.budget.segment_limit, self.format, self.counter)

    def template(self, name: PromptName | PrecisionVariant) -> PromptTemplate:
        return load_template(name, self.template_dir)

    def opening_template(self, name: PromptName) -> PromptTemplate:
        return self.template(self.precision_variant or name)


@dataclass(frozen=True)
class ExtractionResult:
    keyword: Keyword
    value: MoneyValue | None
    raw_model_output: str
    summary: str
    retrieved_segment_indices: tuple[int, ...] = ()
    parse_error: str | None = None

    def to_dict(self) -> dict:
        return {
            "keyword": self.keyword.to_dict(),
            "value": None if self.value is None else self.value.render(),
            "raw_model_output": self.raw_model_output,
            "summary": self.summary,
            "retrieved_segment_indices": list(self.retrieved_segment_indices),
            "parse_error": self.parse_error,
        }


def truncate_tokens(text: str, limit: int, counter: TokenCounter = DEFAULT_COUNTER) -> str:
    """Longest prefix of ``text`` within ``limit`` tokens, cut at whitespace when possible."""
    if counter.count(text) <= limit:
        return text
    lo, hi = 0, len(text)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if counter.count(text[:mid]) <= limit:
            lo = mid
        else:
            hi = mid
    cut = text[:lo]
    space = max(cut.rfind(" "), cut.rfind("\n"))
    return (cut[:space] if space > 0 else cut).rstrip()


def _call(
    client: LlmClient,
    template: PromptTemplate,
    bindings: Mapping[str, str],
    max_output: int,
    counter: TokenCounter,
) -> str:
    prompt = render_template(template, bindings)
    room = client.window - counter.count(prompt)
    if room < 1:
        raise BudgetError(f"prompt for {template.name!r} leaves no room for output in a {client.window}-token window")
    return client.complete(prompt, min(max_output, room))


def _check_keyword(keyword_text: str, budget: TokenBudget, counter: TokenCounter) -> None:
    if counter.count(keyword_text) > budget.keyword_limit:
        raise BudgetError(f"keyword exceeds {budget.keyword_limit} tokens: {keyword_text!r}")


def _default_config(budget: TokenBudget | None, config: PipelineConfig | None) -> PipelineConfig:
    if config is None:
        return PipelineConfig(budget=budget) if budget is not None else PipelineConfig()
    return config


def summarize_refine(
    segments: Sequence[Segment],
    keyword_text: str,
    client: LlmClient,
    budget: TokenBudget | None = None,
    config: PipelineConfig | None = None,
) -> str:
    """Evolving summary: question prompt on the first segment, refine prompt on each later one."""
    config = _default_config(budget, config)
    budget, counter = config.budget, config.counter
    if not segments:
        raise ValueError("need at least one segment")
    _check_keyword(keyword_text, budget, counter)
    question = config.opening_template(PromptName.QUESTION)
    refine = config.template(PromptName.REFINE)

    first, *rest = segments
    summary = _call(client, question, {"document_segment": first.text, "keywords": keyword_text}, budget.summary_limit, counter)
    summary = truncate_tokens(summary, budget.summary_limit, counter)
    for seg in rest:
        summary = _call(
            client,
            refine,
            {"document_segment": seg.text, "old_summary": summary, "keywords": keyword_text},
            budget.summary_limit,
            counter,
        )
        summary = truncate_tokens(summary, budget.summary_limit, counter)
    return summary


def summarize_map_reduce(
    segments: Sequence[Segment],
    keyword_text: str,
    client: LlmClient,
    budget: TokenBudget | None = None,
    config: PipelineConfig | None = None,
) -> str:
    """Summarize each segment independently, then combine with one reduce call.

    If the joined segment summaries do not fit a segment budget they are
    regrouped and summarized again until they do.
    """
    config = _default_config(budget, config)
    budget, counter = config.budget, config.counter
    if not segments:
        raise ValueError("need at least one segment")
    _check_keyword(keyword_text, budget, counter)
    map_tpl = config.opening_template(PromptName.MAP)
    reduce_tpl = config.template(PromptName.REDUCE)

    def summarize(text: str) -> str:
        out = _call(client, map_tpl, {"document_segment": text, "keywords": keyword_text}, budget.summary_limit, counter)
        return truncate_tokens(out, budget.summary_limit, counter)

    def map_all(texts: list[str]) -> list[str]:
        if config.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
                return list(pool.map(summarize, texts))
        return [summarize(t) for t in texts]

    summaries = map_all([s.text for s in segments])
    while counter.count("\n".join(summaries)) > budget.segment_limit:
        groups = merge_elements(list(enumerate(summaries)), budget.segment_limit, counter)
        if len(groups) >= len(summaries):
            raise BudgetError("segment summaries cannot be regrouped into fewer reduce inputs")
        summaries = map_all([g.text for g in groups])

    out = _call(client, reduce_tpl, {"text": "\n".join(summaries), "keywords": keyword_text}, budget.summary_limit, counter)
    return truncate_tokens(out, budget.summary_limit, counter)


_RESULT_PREFIX = re.compile(r"^\s*(?:result|answer)\s*:\s*", re.IGNORECASE)


def normalize_answer(raw: str) -> str:
    """First nonempty line of a model answer, without a ``Result:`` prefix, quotes or final period."""
    line = next((ln for ln in raw.splitlines() if ln.strip()), "")
    line = _RESULT_PREFIX.sub("", line).strip()
    prev = None
    while line != prev:  # quotes and a final period nest either way round
        prev = line
        line = line.strip("\"'`").strip()
        line = line[:-1].rstrip() if line.endswith(".") else line
    return line


def answer_to_value(raw: str, precision: int = 2) -> tuple[MoneyValue | None, str | None]:
    """Parse a model answer into a value, or ``(None, reason)``."""
    answer = normalize_answer(raw)
    if answer == "None":
        return None, None
    try:
        return MoneyValue.parse(answer, precision), None
    except MoneyParseError as exc:
        return None, str(exc)


def _as_keyword(keyword: Keyword | str) -> Keyword:
    return keyword if isinstance(keyword, Keyword) else Keyword(keyword, completion_level="A")


def extract_value(
    summary: str,
    keyword: Keyword | str,
    client: LlmClient,
    budget: TokenBudget | None = None,
    config: PipelineConfig | None = None,
) -> ExtractionResult:
    """Ask the model for the keyword's value in ``summary``.

    Unparseable answers yield an absent value; the raw output is kept.
    """
    config = _default_config(budget, config)
    if not summary.strip():
        raise ValueError("summary must be nonempty")
    kw = _as_keyword(keyword)
    keyword_text = kw.text
    _check_keyword(keyword_text, config.budget, config.counter)
    raw = _call(
        client,
        config.template(PromptName.EXTRACT_SINGLE),
        {"text": summary, "key_words": keyword_text},
        config.extract_max_tokens,
        config.counter,
    )
    value, error = answer_to_value(raw, config.precision)
    return ExtractionResult(kw, value, raw, summary, parse_error=error)


def extract_values_batch(
    summary: str,
    keywords: list[Keyword],
    client: LlmClient,
    config: PipelineConfig | None = None,
) -> dict[str, ExtractionResult]:
    """Multi-keyword extraction with a JSON answer, keyed by attribute."""
    config = config or PipelineConfig()
    if not summary.strip():
        raise ValueError("summary must be nonempty")
    raw = _call(
        client,
        config.template(PromptName.EXTRACT_BATCH),
        {"text": summary, "key_words": batch_keywords_text(keywords)},
        config.extract_max_tokens * len(keywords),
        config.counter,
    )
    match = re.search(r"\{.*\}", raw, re.DOTALL)
    try:
        answers = json.loads(match.group(0)) if match else {}
    except json.JSONDecodeError:
        answers = {}
    out = {}
    for kw in keywords:
        if kw.attribute in answers:
            value, error = answer_to_value(str(answers[kw.attribute]), config.precision)
        else:
            value, error = None, "attribute missing from JSON answer"
        out[kw.attribute] = ExtractionResult(kw, value, raw, summary, parse_error=error)
    return out


def run_extraction(
    doc: Document,
    keyword: Keyword,
    config: PipelineConfig | None = None,
    client: LlmClient | None = None,
) -> ExtractionResult:
    """Full run for one (document, keyword) pair.

    Retrieval is skipped when the document has no more than ``k`` segments.

    Raises:
        PipelineError: tagged with the failing stage.
    """
    config = config or PipelineConfig()
    client = client or MockLlmClient(config.budget.window, config.counter)
    stage = "keyword"
    try:
        kw = keyword.completed_from(doc)
        keyword_text = kw.text
        stage = "segmentation"
        segments = segment_document(doc, config.segmentation)
        stage = "retrieval"
        selected = retrieve_top_k(segments, keyword_text, config.k, config.embedder, config.counter, config.n_jobs)
        stage = "summarization"
        if config.strategy is Strategy.REFINE:
            summary = summarize_refine(selected, keyword_text, client, config=config)
        else:
            summary = summarize_map_reduce(selected, keyword_text, client, config=config)
        indices = tuple(s.segment_index for s in selected)
        stage = "extraction"
        if not summary.strip():
            return ExtractionResult(kw, None, "", summary, indices, parse_error="empty summary")
        result = extract_value(summary, kw, client, config=config)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc
    return ExtractionResult(kw, result.value, result.raw_model_output, summary, indices, result.parse_error)


def serialize_document(doc: Document, fmt: SerializationFormat | str = SerializationFormat.PLAIN) -> str:
    """Whole document as text, elements joined by newlines."""
    return "\n".join(el.text if isinstance(el, Paragraph) else serialize_table(el, fmt) for el in doc.elements)


def run_naive(
    doc: Document,
    keyword: Keyword,
    config: PipelineConfig | None = None,
    client: LlmClient | None = None,
) -> ExtractionResult:
    """Baseline: the serialized document cut to whatever fits beside the extraction prompt, one call."""
    config = config or PipelineConfig()
    client = client or MockLlmClient(config.budget.window, config.counter)
    try:
        kw = keyword.completed_from(doc)
        template = config.template(PromptName.EXTRACT_SINGLE)
        overhead = config.counter.count(render_template(template, {"text": "", "key_words": kw.text}))
        room = client.window - overhead - config.extract_max_tokens
        if room < 1:
            raise BudgetError("no room for document text")
        text = truncate_tokens(serialize_document(doc, config.format), room, config.counter)
        if not text.strip():
            return ExtractionResult(kw, None, "", text, parse_error="empty document text")
        result = extract_value(text, kw, client, config=config)
    except Exception as exc:
        raise PipelineError("naive", exc) from exc
    return result


__all__ = [
    "ExtractionResult",
    "PipelineConfig",
    "Strategy",
    "answer_to_value",
    "extract_value",
    "extract_values_batch",
    "normalize_answer",
    "run_extraction",
    "run_naive",
    "serialize_document",
    "summarize_map_reduce",
    "summarize_refine",
    "truncate_tokens",
]
