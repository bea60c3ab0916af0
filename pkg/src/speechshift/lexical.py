"""Lexical diversity: type-token ratio and MTLD."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .errors import EmptyDocument
from .text_model import Document

MTLD_THRESHOLD = 0.72
MTLD_MIN_TOKENS = 10


@dataclass(frozen=True)
class LexicalFeatures:
    ttr: float
    mtld: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _norms(doc: Document) -> list[str]:
    norms = [t.norm for t in doc.words]
    if not norms:
        raise EmptyDocument(f"document {doc.id!r} has no words")
    return norms


def ttr(doc: Document) -> float:
    norms = _norms(doc)
    return len(set(norms)) / len(norms)


def _mtld_pass(tokens: Sequence[str], threshold: float) -> float:
    factors = 0.0
    types: set[str] = set()
    count = 0
    for tok in tokens:
        types.add(tok)
        count += 1
        if len(types) / count < threshold:
            factors += 1
            types.clear()
            count = 0
    if count:
        factors += (1 - len(types) / count) / (1 - threshold)
    if factors == 0:
        # no full or partial factor (every token distinct)
        return float(len(tokens))
    return len(tokens) / factors


def mtld_tokens(tokens: Sequence[str], threshold: float = MTLD_THRESHOLD) -> float:
    """Bidirectional MTLD (McCarthy & Jarvis) over a token sequence."""
    if not tokens:
        raise EmptyDocument("MTLD of an empty sequence")
    if len(tokens) < MTLD_MIN_TOKENS:
        return float(len(tokens))
    forward = _mtld_pass(tokens, threshold)
    backward = _mtld_pass(tokens[::-1], threshold)
    return (forward + backward) / 2


def mtld(doc: Document, threshold: float = MTLD_THRESHOLD) -> float:
    return mtld_tokens(_norms(doc), threshold)


def lexical_features(doc: Document, threshold: float = MTLD_THRESHOLD) -> LexicalFeatures:
    return LexicalFeatures(ttr=ttr(doc), mtld=mtld(doc, threshold))
