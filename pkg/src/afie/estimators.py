"""scikit-learn style wrappers around the pipeline stages.

The pipeline is not trained, so ``fit`` only validates hyperparameters and
builds the fitted helpers (attributes ending in ``_``). The estimators
support ``get_params``/``set_params``/``clone`` like any other sklearn
estimator.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal
from typing import Any

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .budget import PROFILES, TokenBudget
from .document import DEFAULT_COUNTER
from .evaluation import accuracy, parse_tolerance
from .llm import LlmClient, MockLlmClient
from .pipeline import ExtractionResult, PipelineConfig, Strategy, run_extraction, run_naive
from .prompting import CompletionLevel, PrecisionVariant
from .retrieval import HashingEmbedder, retrieve_top_k
from .segmentation import SegmentationConfig, segment_document
from .serialization import SerializationFormat
from .validation import check_documents, check_pairs, check_positive_int


class DocumentSegmenter(TransformerMixin, BaseEstimator):
    """Turn documents into token-budgeted segments.

    ``transform`` returns one list of :class:`~afie.segmentation.Segment`
    per input document.
    """

    def __init__(self, element_limit=2000, segment_limit=2500, format="PLAIN", counter=None):
        self.element_limit = element_limit
        self.segment_limit = segment_limit
        self.format = format
        self.counter = counter

    def fit(self, X=None, y=None):
        self.config_ = SegmentationConfig(
            check_positive_int(self.element_limit, "element_limit"),
            check_positive_int(self.segment_limit, "segment_limit"),
            SerializationFormat.parse(self.format),
            self.counter or DEFAULT_COUNTER,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        return [segment_document(doc, self.config_) for doc in check_documents(X)]


class SegmentRetriever(BaseEstimator):
    """Keep the ``k`` segments most similar to a keyword.

    ``X`` is a sequence of ``(segments, keyword_text)`` pairs.
    """

    def __init__(self, k=3, embedder=None, counter=None, n_jobs=1):
        self.k = k
        self.embedder = embedder
        self.counter = counter
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        check_positive_int(self.k, "k")
        check_positive_int(self.n_jobs, "n_jobs")
        self.embedder_ = self.embedder if self.embedder is not None else HashingEmbedder()
        return self

    def transform(self, X):
        check_is_fitted(self, "embedder_")
        counter = self.counter or DEFAULT_COUNTER
        return [retrieve_top_k(segs, kw, self.k, self.embedder_, counter, self.n_jobs) for segs, kw in X]


class AFIEExtractor(BaseEstimator):
    """Predict the value of a keyword in a document.

    ``X`` is a sequence of ``(document, keyword)`` pairs, where a keyword is
    a :class:`~afie.prompting.Keyword` or a bare attribute name completed
    from the document metadata at ``completion_level``. Predictions are
    exact decimal amounts in millions, or ``None`` when nothing was found.

    Parameters
    ----------
    profile : str
        Name of a token-allocation profile; ignored when ``budget`` is given.
    llm : LlmClient, optional
        Defaults to the offline :class:`~afie.llm.MockLlmClient`.
    naive : bool
        Run the single-call truncation baseline instead of the pipeline.
    """

    def __init__(
        self,
        profile="gpt35-profile",
        budget=None,
        format="PLAIN",
        k=3,
        strategy="refine",
        precision_variant=None,
        completion_level="A_T_C",
        llm=None,
        embedder=None,
        counter=None,
        n_jobs=1,
        template_dir=None,
        naive=False,
    ):
        self.profile = profile
        self.budget = budget
        self.format = format
        self.k = k
        self.strategy = strategy
        self.precision_variant = precision_variant
        self.completion_level = completion_level
        self.llm = llm
        self.embedder = embedder
        self.counter = counter
        self.n_jobs = n_jobs
        self.template_dir = template_dir
        self.naive = naive

    def fit(self, X=None, y=None):
        if self.budget is not None:
            budget = self.budget if isinstance(self.budget, TokenBudget) else TokenBudget(**self.budget)
        elif self.profile in PROFILES:
            budget = PROFILES[self.profile]
        else:
            raise ValueError(f"unknown profile {self.profile!r}; known: {sorted(PROFILES)}")
        counter = self.counter or DEFAULT_COUNTER
        self.config_ = PipelineConfig(
            budget=budget,
            format=SerializationFormat.parse(self.format),
            k=check_positive_int(self.k, "k"),
            strategy=Strategy(self.strategy),
            precision_variant=None if self.precision_variant is None else PrecisionVariant(self.precision_variant),
            template_dir=self.template_dir,
            n_jobs=check_positive_int(self.n_jobs, "n_jobs"),
            counter=counter,
            embedder=self.embedder if self.embedder is not None else HashingEmbedder(),
        )
        self.completion_level_ = CompletionLevel(self.completion_level)
        self.llm_: LlmClient = self.llm if self.llm is not None else MockLlmClient(budget.window, counter)
        return self

    def predict_results(self, X) -> list[ExtractionResult]:
        check_is_fitted(self, "config_")
        pairs = check_pairs(X, self.completion_level_)
        run = run_naive if self.naive else run_extraction

        def one(pair):
            doc, kw = pair
            return run(doc, kw, self.config_, self.llm_)

        if self.n_jobs > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                return list(pool.map(one, pairs))
        return [one(p) for p in pairs]

    def predict(self, X) -> list[Decimal | None]:
        return [None if r.value is None else r.value.amount_millions for r in self.predict_results(X)]

    def score(self, X, y, tolerance: Any = "5%") -> float:
        """RETA accuracy of the predictions at ``tolerance``."""
        truth = [Decimal(str(v)) for v in y]
        return float(accuracy(list(zip(truth, self.predict(X))), parse_tolerance(tolerance)))
