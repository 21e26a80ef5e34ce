"""Run configuration stored as an INI file.

Layout::

    [run]
    profile = gpt35-profile
    format = PLAIN
    k = 3
    ...

    [gpt35-profile]
    window = 4096
    element_limit = 2000
    ...

Every section whose name ends in ``-profile`` defines a token budget.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .budget import PROFILES, TokenBudget
from .evaluation import COARSE_LEVELS, RetaLevel, parse_levels
from .llm import HttpLlmClient, LlmClient, MockLlmClient, TracedEmbedder, Tracer
from .pipeline import PipelineConfig, Strategy
from .prompting import CompletionLevel, PrecisionVariant
from .retrieval import HashingEmbedder, HttpEmbeddingProvider
from .serialization import SerializationFormat

BACKENDS = ("mock", "http")
EMBEDDERS = ("hashing", "http")
_BUDGET_KEYS = ("window", "element_limit", "segment_limit", "keyword_limit", "summary_limit")


@dataclass(frozen=True)
class RunConfig:
    profile: str = "gpt35-profile"
    profiles: dict[str, TokenBudget] = field(default_factory=lambda: dict(PROFILES))
    format: SerializationFormat = SerializationFormat.PLAIN
    k: int = 3
    strategy: Strategy = Strategy.REFINE
    precision_variant: PrecisionVariant | None = None
    completion_level: CompletionLevel = CompletionLevel.A_T_C
    backend: str = "mock"
    trace_path: str | None = None
    llm_url: str | None = None
    llm_model: str = ""
    api_key_env: str = "AFIE_API_KEY"
    embedder: str = "hashing"
    embedding_url: str | None = None
    levels: tuple[RetaLevel, ...] = COARSE_LEVELS
    jobs: int = 1
    template_dir: str | None = None

    def __post_init__(self) -> None:
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("format", SerializationFormat.parse(self.format))
        set_("strategy", Strategy(self.strategy))
        set_("completion_level", CompletionLevel(self.completion_level))
        if self.precision_variant is not None:
            set_("precision_variant", PrecisionVariant(self.precision_variant))
        if isinstance(self.levels, str) or not all(isinstance(lv, RetaLevel) for lv in self.levels):
            set_("levels", parse_levels(self.levels))
        if self.profile not in self.profiles:
            raise ValueError(f"profile {self.profile!r} is not defined; have {sorted(self.profiles)}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if isinstance(self.jobs, bool) or not isinstance(self.jobs, int) or self.jobs < 1:
            raise ValueError(f"jobs must be a positive integer, got {self.jobs!r}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.embedder not in EMBEDDERS:
            raise ValueError(f"embedder must be one of {EMBEDDERS}")
        if self.backend == "http" and not self.llm_url:
            raise ValueError("the http backend needs llm_url")
        if self.embedder == "http" and not self.embedding_url:
            raise ValueError("the http embedder needs embedding_url")

    @property
    def budget(self) -> TokenBudget:
        return self.profiles[self.profile]

    def updated(self, **changes) -> "RunConfig":
        """Copy with the non-None entries of ``changes`` applied."""
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    # -- builders --

    def tracer(self) -> Tracer | None:
        return Tracer(self.trace_path) if self.trace_path else None

    def build_embedder(self, tracer: Tracer | None = None):
        if self.embedder == "http":
            inner = HttpEmbeddingProvider(self.embedding_url)
        else:
            inner = HashingEmbedder()
        return TracedEmbedder(inner, tracer) if tracer else inner

    def build_client(self, tracer: Tracer | None = None) -> LlmClient:
        window = self.budget.window
        if self.backend == "http":
            return HttpLlmClient(self.llm_url, self.llm_model, window, api_key_env=self.api_key_env, tracer=tracer)
        return MockLlmClient(window, tracer=tracer)

    def pipeline_config(self, tracer: Tracer | None = None) -> PipelineConfig:
        return PipelineConfig(
            budget=self.budget,
            format=self.format,
            k=self.k,
            strategy=self.strategy,
            precision_variant=self.precision_variant,
            template_dir=self.template_dir,
            embedder=self.build_embedder(tracer),
        )

    # -- ini round trip --

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {
            "profile": self.profile,
            "format": self.format.value,
            "k": str(self.k),
            "strategy": self.strategy.value,
            "precision_variant": self.precision_variant.value if self.precision_variant else "",
            "completion_level": self.completion_level.value,
            "backend": self.backend,
            "trace_path": self.trace_path or "",
            "llm_url": self.llm_url or "",
            "llm_model": self.llm_model,
            "api_key_env": self.api_key_env,
            "embedder": self.embedder,
            "embedding_url": self.embedding_url or "",
            "levels": ",".join(lv.label for lv in self.levels),
            "jobs": str(self.jobs),
            "template_dir": self.template_dir or "",
        }
        for name, budget in self.profiles.items():
            cp[name] = {k: str(v) for k, v in budget.to_dict().items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.read_string(text)
        profiles = dict(PROFILES)
        for name in cp.sections():
            if name.endswith("-profile"):
                sec = cp[name]
                unknown = set(sec) - set(_BUDGET_KEYS)
                if unknown:
                    raise ValueError(f"unknown keys in [{name}]: {sorted(unknown)}")
                profiles[name] = TokenBudget(**{k: int(v) for k, v in sec.items()})
        run = dict(cp["run"]) if cp.has_section("run") else {}
        known = {f.name for f in fields(cls)} - {"profiles"}
        unknown = set(run) - known
        if unknown:
            raise ValueError(f"unknown keys in [run]: {sorted(unknown)}")
        kwargs: dict = {k: (v if v != "" else None) for k, v in run.items()}
        for key in ("k", "jobs"):
            if kwargs.get(key) is not None:
                kwargs[key] = int(kwargs[key])
        return cls(profiles=profiles, **{k: v for k, v in kwargs.items() if v is not None})

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_ini(Path(path).read_text(encoding="utf-8"))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini(), encoding="utf-8")
