"""Input coercion for the estimator API."""

from __future__ import annotations

import numbers
from pathlib import Path
from typing import Any, Iterable

from .document import Document, document_from_dict, parse_document
from .prompting import CompletionLevel, Keyword


def check_document(obj: Any) -> Document:
    """Accept a Document, its dict form, a JSON string/bytes, or a path to a JSON file."""
    if isinstance(obj, Document):
        return obj
    if isinstance(obj, dict):
        return document_from_dict(obj)
    if isinstance(obj, Path):
        return parse_document(obj.read_bytes())
    if isinstance(obj, (str, bytes)):
        stripped = obj.lstrip()
        if stripped[:1] in ("{", b"{"):
            return parse_document(obj)
        return parse_document(Path(obj).read_bytes())
    raise TypeError(f"cannot interpret {type(obj).__name__} as a document")


def check_documents(X: Any) -> list[Document]:
    if isinstance(X, (Document, dict, str, bytes, Path)):
        X = [X]
    docs = [check_document(x) for x in X]
    if not docs:
        raise ValueError("expected at least one document")
    return docs


def check_keyword(obj: Any, completion_level: CompletionLevel | str = CompletionLevel.A_T_C) -> Keyword:
    """A Keyword, a bare attribute string, or a dict of Keyword fields."""
    if isinstance(obj, Keyword):
        return obj
    if isinstance(obj, str):
        return Keyword(obj, completion_level=CompletionLevel(completion_level))
    if isinstance(obj, dict):
        fields = {"completion_level": completion_level, **obj}
        return Keyword(**fields)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a keyword")


def check_pairs(X: Iterable[Any], completion_level: CompletionLevel | str = CompletionLevel.A_T_C) -> list[tuple[Document, Keyword]]:
    """Coerce ``(document, keyword)`` pairs."""
    pairs = []
    for i, item in enumerate(X):
        try:
            doc, kw = item
        except (TypeError, ValueError):
            raise ValueError(f"sample {i} is not a (document, keyword) pair") from None
        pairs.append((check_document(doc), check_keyword(kw, completion_level)))
    if not pairs:
        raise ValueError("expected at least one (document, keyword) pair")
    return pairs


def check_positive_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
