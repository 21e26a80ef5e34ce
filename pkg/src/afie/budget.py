"""Token budgets per model profile."""

from __future__ import annotations

from dataclasses import asdict, dataclass

MAX_KEYWORD_TOKENS = 50


@dataclass(frozen=True)
class TokenBudget:
    window: int
    element_limit: int
    segment_limit: int
    keyword_limit: int = MAX_KEYWORD_TOKENS
    summary_limit: int = 500

    def __post_init__(self) -> None:
        if min(self.window, self.element_limit, self.segment_limit, self.keyword_limit, self.summary_limit) <= 0:
            raise ValueError("all budget entries must be positive")
        if self.element_limit > self.segment_limit:
            raise ValueError("element_limit must not exceed segment_limit")
        if self.keyword_limit > MAX_KEYWORD_TOKENS:
            raise ValueError(f"keyword_limit must be <= {MAX_KEYWORD_TOKENS}")
        if self.summary_limit + self.segment_limit >= self.window:
            raise ValueError("summary_limit + segment_limit leave no room for the prompt template")

    def check_overhead(self, template_tokens: int) -> None:
        """Raise if a segment, a summary and the template cannot share one window."""
        need = self.summary_limit + self.segment_limit + template_tokens
        if need > self.window:
            raise ValueError(f"budget needs {need} tokens but the window is {self.window}")

    def to_dict(self) -> dict:
        return asdict(self)


PROFILES: dict[str, TokenBudget] = {
    "gpt35-profile": TokenBudget(window=4096, element_limit=2000, segment_limit=2500, keyword_limit=50, summary_limit=500),
    "gpt4-profile": TokenBudget(window=32768, element_limit=25000, segment_limit=25000, keyword_limit=50, summary_limit=5000),
}
