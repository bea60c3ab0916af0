"""LIWC-style psycholinguistic categories as a percentage of word tokens."""

from __future__ import annotations

from .errors import ConfigError, EmptyDocument
from .lexicon import Lexicon, count_matches
from .text_model import Document

AFFECTIVE = ("affect", "positive_emotion", "negative_emotion", "anxiety", "anger", "sadness")
COGNITIVE = (
    "cognition", "insight", "causation", "discrepancy", "tentative",
    "certainty", "inhibition", "inclusion", "exclusion",
)
PERCEPTIVE = ("perception",)
CATEGORIES = AFFECTIVE + COGNITIVE + PERCEPTIVE


def liwc_profile(doc: Document, lex: Lexicon) -> dict[str, float]:
    missing = [c for c in CATEGORIES if c not in lex]
    if missing:
        raise ConfigError(f"lexicon {lex.name!r} lacks categories: {', '.join(missing)}")
    n_words = len(doc.words)
    if n_words == 0:
        raise EmptyDocument(f"document {doc.id!r} has no words")
    return {c: 100.0 * count_matches(doc, c, lex) / n_words for c in CATEGORIES}
