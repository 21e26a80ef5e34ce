"""Slice-max embedding retrieval of segments for a keyword."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import httpx
import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from .document import DEFAULT_COUNTER, TokenCounter
from .errors import EmptyCorpusError, RetrievalError
from .segmentation import Segment, split_words

log = logging.getLogger(__name__)

# Input length of the reference sentence-embedding model.
DEFAULT_SLICE_TOKENS = 384


@runtime_checkable
class EmbeddingProvider(Protocol):
    max_input_tokens: int

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise RetrievalError("embedding provider returned a zero vector")
    return vectors / norms


class HashingEmbedder:
    """Deterministic offline embedder: feature-hashed word presence, L2-normalised.

    Presence rather than counts keeps boilerplate repeated across a slice
    from drowning out rare terms. Texts without any word token map to a
    fixed reserved unit vector, so every output row has norm 1.
    """

    def __init__(self, n_features: int = 4096, max_input_tokens: int = DEFAULT_SLICE_TOKENS) -> None:
        self.n_features = n_features
        self.max_input_tokens = max_input_tokens
        self._vectorizer = HashingVectorizer(
            n_features=n_features,
            alternate_sign=False,
            norm="l2",
            lowercase=True,
            binary=True,
            token_pattern=r"(?u)\b\w+\b",
        )

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros((0, self.n_features))
        out = self._vectorizer.transform(list(texts)).toarray()
        empty = ~out.any(axis=1)
        out[empty, 0] = 1.0
        return out

    def __repr__(self) -> str:
        return f"HashingEmbedder(n_features={self.n_features}, max_input_tokens={self.max_input_tokens})"


class HttpEmbeddingProvider:
    """Client for an embedding service speaking ``POST {texts} -> {vectors}``.

    Transient failures (timeouts, connection errors, 5xx, 429) are retried
    with exponential backoff; other 4xx responses fail immediately.
    """

    def __init__(
        self,
        base_url: str,
        token: str | None = None,
        max_input_tokens: int = DEFAULT_SLICE_TOKENS,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
    ) -> None:
        self.base_url = base_url
        self.max_input_tokens = max_input_tokens
        self.attempts = attempts
        self.backoff = backoff
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = client or httpx.Client(timeout=timeout)
        self._headers = headers

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        last: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.base_url, json={"texts": list(texts)}, headers=self._headers)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last = RetrievalError(f"embedding service returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise RetrievalError(f"embedding service rejected request: {resp.status_code}")
            vectors = np.asarray(resp.json()["vectors"], dtype=float)
            if vectors.shape[0] != len(texts):
                raise RetrievalError(f"expected {len(texts)} vectors, got {vectors.shape[0]}")
            return _unit_rows(vectors)
        raise RetrievalError(f"embedding service failed after {self.attempts} attempts: {last}")


@dataclass(frozen=True)
class ScoredSegment:
    segment: Segment
    score: float


def slice_text(text: str, slice_limit: int = DEFAULT_SLICE_TOKENS, counter: TokenCounter = DEFAULT_COUNTER) -> list[str]:
    """Cut text into consecutive word-aligned slices of at most ``slice_limit`` tokens."""
    if slice_limit <= 0:
        raise ValueError("slice_limit must be positive")
    return split_words(text, slice_limit, counter) or [""]


def _embed(provider: EmbeddingProvider, texts: list[str]) -> np.ndarray:
    try:
        return np.asarray(provider.embed(texts), dtype=float)
    except RetrievalError:
        raise
    except Exception as exc:
        raise RetrievalError(f"embedding failed: {exc}") from exc


def _check_keyword(keyword_text: str, provider: EmbeddingProvider, counter: TokenCounter) -> None:
    if counter.count(keyword_text) > provider.max_input_tokens:
        raise ValueError(f"keyword exceeds the embedder input limit of {provider.max_input_tokens} tokens")


def score_segment(
    segment: Segment,
    keyword_text: str,
    provider: EmbeddingProvider,
    counter: TokenCounter = DEFAULT_COUNTER,
) -> ScoredSegment:
    """Score = maximum cosine similarity between the keyword and any slice."""
    _check_keyword(keyword_text, provider, counter)
    slices = slice_text(segment.text, provider.max_input_tokens, counter)
    vecs = _embed(provider, [keyword_text, *slices])
    return ScoredSegment(segment, float(np.max(vecs[1:] @ vecs[0])))


def score_segments(
    segments: Sequence[Segment],
    keyword_text: str,
    provider: EmbeddingProvider,
    counter: TokenCounter = DEFAULT_COUNTER,
    n_jobs: int = 1,
) -> list[float]:
    """Slice-max scores for many segments, in input order."""
    _check_keyword(keyword_text, provider, counter)
    slices = [slice_text(s.text, provider.max_input_tokens, counter) for s in segments]
    if n_jobs <= 1:
        flat = [keyword_text] + [t for group in slices for t in group]
        vecs = _embed(provider, flat)
        query, rest = vecs[0], vecs[1:]
        sims = rest @ query
        scores, pos = [], 0
        for group in slices:
            scores.append(float(np.max(sims[pos : pos + len(group)])))
            pos += len(group)
        return scores
    query = _embed(provider, [keyword_text])[0]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        # map() keeps input order regardless of completion order
        blocks = list(pool.map(lambda group: _embed(provider, group), slices))
    return [float(np.max(block @ query)) for block in blocks]


def top_k_indices(scores: Sequence[float], k: int) -> list[int]:
    """Positions of the ``k`` best scores (ties to the lower position), in ascending order."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sorted(order[:k])


def retrieve_top_k(
    segments: Sequence[Segment],
    keyword_text: str,
    k: int = 3,
    provider: EmbeddingProvider | None = None,
    counter: TokenCounter = DEFAULT_COUNTER,
    n_jobs: int = 1,
) -> list[Segment]:
    """Return the ``k`` most similar segments in original document order.

    When there are at most ``k`` segments all of them are returned without
    scoring.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not segments:
        raise EmptyCorpusError("no segments to retrieve from")
    ordered = sorted(segments, key=lambda s: s.segment_index)
    if len(ordered) <= k:
        return ordered
    provider = provider or HashingEmbedder()
    scores = score_segments(ordered, keyword_text, provider, counter, n_jobs)
    return [ordered[i] for i in top_k_indices(scores, k)]
