"""LLM client abstraction, an offline mock, an HTTP client and call tracing."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import httpx

from .document import DEFAULT_COUNTER, TokenCounter
from .errors import BudgetError, LlmError, MoneyParseError
from .money import find_money, parse_money, render_money

log = logging.getLogger(__name__)


class Tracer:
    """Append-only JSONL log of model and embedding calls. Thread-safe."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def record(self, kind: str, request: dict[str, Any], response: Any) -> None:
        line = json.dumps({"kind": kind, "request": request, "response": response}, ensure_ascii=False)
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


@dataclass(frozen=True)
class CallRecord:
    prompt: str
    max_output_tokens: int
    output: str


class LlmClient:
    """Base client. Subclasses implement :meth:`_complete`.

    :meth:`complete` enforces the window: prompt tokens plus the requested
    output allowance may not exceed ``window``.
    """

    def __init__(self, window: int, counter: TokenCounter = DEFAULT_COUNTER, tracer: Tracer | None = None) -> None:
        self.window = window
        self.counter = counter
        self.tracer = tracer
        self.calls: list[CallRecord] = []
        self._lock = threading.Lock()

    def complete(self, prompt: str, max_output_tokens: int) -> str:
        prompt_tokens = self.counter.count(prompt)
        if max_output_tokens < 1 or prompt_tokens + max_output_tokens > self.window:
            raise BudgetError(
                f"prompt of {prompt_tokens} tokens plus {max_output_tokens} output tokens exceeds window {self.window}"
            )
        output = self._complete(prompt, max_output_tokens)
        with self._lock:
            self.calls.append(CallRecord(prompt, max_output_tokens, output))
        if self.tracer is not None:
            self.tracer.record("llm", {"prompt": prompt, "max_tokens": max_output_tokens}, output)
        return output

    def _complete(self, prompt: str, max_output_tokens: int) -> str:
        raise NotImplementedError


# ---- mock -------------------------------------------------------------------

_QUESTION = re.compile(r"^>{4,5}\s*Question:?[ \t]*$", re.MULTILINE)
_LABEL = re.compile(
    r"^(Financial report's segment|Old summary|Keywords|Key words|Content|Summary|New summary|Result):[ \t]?",
    re.MULTILINE,
)
_DECIMALS = re.compile(r"round to (two|three) decimal places")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")
_WORD = re.compile(r"\w+")
_STOPWORDS = frozenset("of the for and a an in at to on by".split())
NO_INFORMATION = "No relevant information."


def _tokens(text: str) -> set[str]:
    return {w for w in _WORD.findall(text.lower()) if w not in _STOPWORDS}


def _units(text: str) -> list[str]:
    out = []
    for line in text.split("\n"):
        out.extend(u.strip() for u in _SENTENCE_END.split(line) if u.strip())
    return out


def _fields(prompt: str) -> dict[str, str]:
    matches = list(_QUESTION.finditer(prompt))
    section = prompt[matches[-1].end():] if matches else prompt
    labels = list(_LABEL.finditer(section))
    out = {}
    for m, nxt in zip(labels, labels[1:] + [None]):
        value = section[m.end(): nxt.start() if nxt else len(section)]
        value = re.sub(r"\n-----\s*$", "", value.rstrip("\n")).strip("\n")
        out[m.group(1)] = value
    return out


class MockLlmClient(LlmClient):
    """Deterministic stand-in that reads prompts the way a cooperative model would.

    Summarization prompts (question, map, refine and the precision variants)
    return the sentences and table lines of the segment (and old summary)
    that mention any keyword term, most relevant first. Extraction prompts
    return the money amount from the first sentence containing every keyword
    term, rounded as the prompt instructs, or ``None``.
    """

    def __init__(self, window: int = 4096, counter: TokenCounter = DEFAULT_COUNTER, tracer: Tracer | None = None) -> None:
        super().__init__(window, counter, tracer)

    def _complete(self, prompt: str, max_output_tokens: int) -> str:
        fields = _fields(prompt)
        keywords = fields.get("Keywords", fields.get("Key words", ""))
        if "Output results in JSON format" in prompt:
            out = self._extract_batch(fields.get("Content", ""), keywords, prompt)
        elif "Result" in fields:
            out = self._extract(fields.get("Content", ""), keywords, _precision(prompt))
        else:
            text = fields.get("Old summary", "") + "\n" + fields.get("Financial report's segment", "")
            out = self._summarize(text, keywords)
        return self._truncate(out, max_output_tokens)

    def _truncate(self, text: str, limit: int) -> str:
        kept: list[str] = []
        for line in text.split("\n"):
            if self.counter.count("\n".join(kept + [line])) > limit:
                break
            kept.append(line)
        return "\n".join(kept)

    @staticmethod
    def _summarize(text: str, keywords: str) -> str:
        wanted = _tokens(keywords)
        scored = []
        for pos, unit in enumerate(dict.fromkeys(_units(text))):
            hits = len(wanted & _tokens(unit))
            if hits:
                scored.append((-hits, pos, unit))
        if not scored:
            return NO_INFORMATION
        return "\n".join(unit for _, _, unit in sorted(scored))

    @staticmethod
    def _find(content: str, wanted: set[str]):
        for unit in _units(content):
            if not wanted <= _tokens(unit):
                continue
            matches = [m for m in find_money(unit) if m.text.lower() not in wanted]
            explicit = [m for m in matches if m.explicit]
            if explicit:
                return explicit[0].millions
            if matches:
                return matches[-1].millions
        try:
            return parse_money(content.strip().rstrip("."))
        except MoneyParseError:
            return None

    def _extract(self, content: str, keywords: str, precision: int) -> str:
        value = self._find(content, _tokens(keywords))
        return "None" if value is None else render_money(value, precision, grouping=True)

    def _extract_batch(self, content: str, keywords: str, prompt: str) -> str:
        names = re.findall(r'"([^"]+)"', keywords)
        context = _tokens(keywords.rsplit('"', 1)[-1])
        result = {}
        for name in names:
            value = self._find(content, _tokens(name) | context)
            result[name] = "None" if value is None else render_money(value, _precision(prompt), grouping=True)
        return json.dumps(result)


def _precision(prompt: str) -> int:
    m = _DECIMALS.search(prompt)
    return 3 if m and m.group(1) == "three" else 2


# ---- http -------------------------------------------------------------------


class HttpLlmClient(LlmClient):
    """Completion endpoint speaking ``POST {prompt, max_tokens, temperature} -> {text}``.

    The API key is read from the environment variable named by
    ``api_key_env``. Timeouts, connection errors, 429 and 5xx responses are
    retried with exponential backoff; any other 4xx fails at once.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "",
        window: int = 4096,
        counter: TokenCounter = DEFAULT_COUNTER,
        api_key_env: str = "AFIE_API_KEY",
        timeout: float = 60.0,
        attempts: int = 3,
        backoff: float = 1.0,
        tracer: Tracer | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        super().__init__(window, counter, tracer)
        self.base_url = base_url
        self.model = model
        self.attempts = attempts
        self.backoff = backoff
        self._http = client or httpx.Client(timeout=timeout)
        key = os.environ.get(api_key_env)
        self._headers = {"Authorization": f"Bearer {key}"} if key else {}

    def _complete(self, prompt: str, max_output_tokens: int) -> str:
        payload = {"prompt": prompt, "max_tokens": max_output_tokens, "temperature": 0}
        if self.model:
            payload["model"] = self.model
        last = "no attempt made"
        for attempt in range(self.attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._http.post(self.base_url, json=payload, headers=self._headers)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, self.attempts, last)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("LLM request failed (attempt %d/%d): %s", attempt + 1, self.attempts, last)
                continue
            if resp.status_code >= 400:
                raise LlmError(f"LLM endpoint rejected the request: HTTP {resp.status_code}", retryable=False)
            try:
                return str(resp.json()["text"])
            except (ValueError, KeyError) as exc:
                raise LlmError(f"malformed LLM response: {exc}") from exc
        raise LlmError(f"LLM endpoint failed after {self.attempts} attempts: {last}", retryable=True)


class TracedEmbedder:
    """Wraps an embedding provider and logs every call to a tracer."""

    def __init__(self, inner, tracer: Tracer) -> None:
        self.inner = inner
        self.tracer = tracer
        self.max_input_tokens = inner.max_input_tokens

    def embed(self, texts):
        vectors = self.inner.embed(texts)
        self.tracer.record("embedding", {"texts": list(texts)}, {"shape": list(getattr(vectors, "shape", ()))})
        return vectors
