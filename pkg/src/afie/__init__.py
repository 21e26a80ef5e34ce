"""Keyword value extraction from long documents that mix paragraphs and tables.

Typical use::

    from afie import AFIEExtractor, Document
    doc = Document.build("d1", "ACME", "2022Q4", ["Revenue of ACME for 2022Q4 was $5.000 million."])
    AFIEExtractor().fit().predict([(doc, "Revenue")])   # [Decimal('5.00')]
"""

from .budget import PROFILES, TokenBudget
from .config import RunConfig
from .document import (
    DEFAULT_COUNTER,
    Document,
    HeuristicTokenCounter,
    Paragraph,
    ReportType,
    Table,
    TokenCounter,
    count_tokens,
    extract_tables_from_html,
    parse_document,
)
from .errors import (
    AFIEError,
    BudgetError,
    DatasetError,
    EmptyCorpusError,
    EmptyDocumentError,
    EmptyEvalError,
    EvalError,
    IncompleteKeywordError,
    LlmError,
    MoneyParseError,
    ParseError,
    PipelineError,
    RetrievalError,
    TemplateError,
    UndefinedRpdError,
)
from .estimators import AFIEExtractor, DocumentSegmenter, SegmentRetriever
from .evaluation import (
    COARSE_LEVELS,
    FINE_LEVELS,
    EvalReport,
    GroundTruthRecord,
    Locus,
    RetaLevel,
    accuracy,
    evaluate_run,
    load_dataset,
    parse_tolerance,
    reta_correct,
    rpd,
)
from .llm import HttpLlmClient, LlmClient, MockLlmClient, Tracer
from .money import MoneyValue, find_money, parse_money, render_money
from .pipeline import (
    ExtractionResult,
    PipelineConfig,
    Strategy,
    extract_value,
    run_extraction,
    run_naive,
    summarize_map_reduce,
    summarize_refine,
)
from .prompting import (
    CompletionLevel,
    Keyword,
    PrecisionVariant,
    PromptName,
    complete_keyword,
    load_template,
    render_template,
    verify_templates,
)
from .retrieval import EmbeddingProvider, HashingEmbedder, HttpEmbeddingProvider, retrieve_top_k
from .segmentation import Segment, SegmentationConfig, merge_elements, segment_document
from .serialization import SerializationFormat, serialize_table

__version__ = "0.1.0"

import types as _types

__all__ = [n for n, v in dict(globals()).items() if not n.startswith("_") and not isinstance(v, _types.ModuleType)]
