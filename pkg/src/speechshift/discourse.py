"""Discourse features: overlap, rhetorical repetition, transitions,
storytelling and readability."""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import asdict, dataclass
from itertools import combinations
from typing import Sequence

from . import resources
from .errors import ConfigError, EmptyDocument
from .lexicon import Lexicon, find_matches
from .text_model import Document, Sentence, Token, count_syllables

CONTENT_UPOS = frozenset({"NOUN", "VERB", "ADJ", "ADV"})

FLESCH_CONSTANTS = {
    # (base, sentence-length weight, syllables-per-word weight)
    "english": (206.835, 1.015, 84.6),
    "kandel_moles": (209.0, 1.15, 68.0),
}

ANTIMETABOLE_WINDOW = 3

_STRONG_BREAKS = frozenset({";", ":", "(", ")", "—", "–", ".", "!", "?", "…", "..."})


@dataclass(frozen=True)
class DiscourseFeatures:
    local_noun_overlap: float | None
    local_content_overlap: float
    global_noun_overlap: float | None
    global_content_overlap: float
    alliteration: int
    anaphora: float
    antimetabole: int
    epanalepsis: int
    transitions_number: int
    trans_similarity: float
    transition_types_count: int
    transitions_per_sentence: float
    expletives_count: int
    polysyndeton_count: int
    asyndeton_count: int
    narrative_words: int
    comparison_count: int
    flesch_score: float

    def as_dict(self) -> dict[str, float | int | None]:
        return asdict(self)


def fold(text: str) -> str:
    """Strip diacritics: é -> e, ç -> c."""
    return "".join(ch for ch in unicodedata.normalize("NFD", text) if not unicodedata.combining(ch))


def is_content(tok: Token) -> bool:
    if not tok.is_word:
        return False
    if tok.upos:
        return tok.upos in CONTENT_UPOS
    return tok.norm not in resources.function_words() and not tok.norm[0].isdigit()


# --------------------------------------------------------------------------
# overlap


def _overlap(a: set[str], b: set[str]) -> float:
    return len(a & b) / max(1, min(len(a), len(b)))


def _local_global(sets: Sequence[set[str]]) -> tuple[float, float]:
    if len(sets) < 2:
        return 0.0, 0.0
    local = [_overlap(a, b) for a, b in zip(sets, sets[1:])]
    glob = [_overlap(a, b) for a, b in combinations(sets, 2)]
    return sum(local) / len(local), sum(glob) / len(glob)


def overlap_features(doc: Document) -> dict[str, float | None]:
    """Word repetition between consecutive sentences (local) and all pairs (global).

    Noun overlaps need POS tags and come back as ``None`` without them.
    """
    content = [{t.norm for t in s.tokens if is_content(t)} for s in doc.sentences]
    local_c, global_c = _local_global(content)
    tagged = [s for s in doc.sentences if s.has_pos]
    if tagged:
        nouns = [{t.norm for t in s.tokens if t.upos == "NOUN"} for s in tagged]
        local_n, global_n = _local_global(nouns)
    else:
        local_n = global_n = None
    return {
        "local_noun_overlap": local_n,
        "local_content_overlap": local_c,
        "global_noun_overlap": global_n,
        "global_content_overlap": global_c,
    }


# --------------------------------------------------------------------------
# rhetorical repetition


def alliteration(doc: Document) -> int:
    stop = resources.function_words()
    total = 0
    for sent in doc.sentences:
        words = sent.words
        for a, b in zip(words, words[1:]):
            if len(a.norm) < 2 or len(b.norm) < 2 or a.norm in stop or b.norm in stop:
                continue
            ia, ib = fold(a.norm)[0], fold(b.norm)[0]
            if ia.isalpha() and ia == ib:
                total += 1
    return total


def _common_prefix(a: Sequence[str], b: Sequence[str]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def anaphora(doc: Document) -> float:
    """Mean shared-prefix length (in words) between successive clause starts."""
    units = []
    for sent in doc.sentences:
        for clause in sent.clause_tokens():
            units.append([t.norm for t in clause if t.is_word])
    if len(units) < 2:
        return 0.0
    vals = [_common_prefix(a, b) for a, b in zip(units, units[1:])]
    return sum(vals) / len(vals)


def _skip_bigrams(words: Sequence[str], window: int) -> list[tuple[int, int]]:
    out = []
    for i in range(len(words)):
        for j in range(i + 1, min(i + window, len(words) - 1) + 1):
            if words[i] != words[j]:
                out.append((i, j))
    return out


def antimetabole(doc: Document, window: int = ANTIMETABOLE_WINDOW) -> int:
    """Count reversed content-word pairs (A..B later followed by B..A).

    Pairs span at most ``window`` content words inside one sentence; the
    reversal must start after the first pair ends, in the same or the next
    sentence.
    """
    per_sentence = [[t.norm for t in s.tokens if is_content(t)] for s in doc.sentences]
    index: list[dict[tuple[str, str], list[tuple[int, int]]]] = []
    for words in per_sentence:
        occ: dict[tuple[str, str], list[tuple[int, int]]] = {}
        for i, j in _skip_bigrams(words, window):
            occ.setdefault((words[i], words[j]), []).append((i, j))
        index.append(occ)
    total = 0
    for s, occ in enumerate(index):
        for (a, b), spots in occ.items():
            for _, j in spots:
                for k, _ in index[s].get((b, a), ()):
                    if k > j:
                        total += 1
                if s + 1 < len(index):
                    total += len(index[s + 1].get((b, a), ()))
    return total


def epanalepsis(doc: Document) -> int:
    stop = resources.function_words()
    total = 0
    for sent in doc.sentences:
        norms = sent.norms
        if len(norms) < 6:
            continue
        shared = (set(norms[:3]) & set(norms[-3:])) - stop
        if shared:
            total += 1
    return total


# --------------------------------------------------------------------------
# transitions and storytelling


def _first_word_index(sent: Sentence) -> int | None:
    return next((t.index for t in sent.tokens if t.is_word), None)


def _asyndeton_in(sent: Sentence, coordinators: set[str]) -> int:
    count = 0
    chunk: list[list[Token]] = [[]]

    def close() -> int:
        segments = [seg for seg in chunk if any(t.is_word for t in seg)]
        if len(segments) < 3:
            return 0
        first = next(t for t in segments[-1] if t.is_word)
        return 0 if first.norm in coordinators else 1

    for tok in sent.tokens:
        if tok.surface in _STRONG_BREAKS:
            count += close()
            chunk = [[]]
        elif tok.surface == ",":
            chunk.append([])
        else:
            chunk[-1].append(tok)
    count += close()
    return count


def transition_features(doc: Document, lex: Lexicon) -> dict[str, float | int]:
    coord = find_matches(doc, "coordinating_conjunctions", lex)
    subord = find_matches(doc, "subordinating_conjunctions", lex)
    matches = coord + subord
    number = len(matches)
    types = len({m.entry.pattern for m in matches})
    similarity = 1.0 - types / number if number else 0.0

    first_words = [_first_word_index(s) for s in doc.sentences]
    expletives = sum(
        1 for m in find_matches(doc, "expletives", lex) if m.start != first_words[m.sentence]
    )

    by_sentence: dict[int, Counter[str]] = {}
    for m in coord:
        by_sentence.setdefault(m.sentence, Counter())[m.entry.pattern] += 1
    polysyndeton = sum(max(c.values()) - 1 for c in by_sentence.values())

    coordinators = {e.norms[0] for e in lex.entries("coordinating_conjunctions") if len(e.norms) == 1}
    asyndeton = sum(_asyndeton_in(s, coordinators) for s in doc.sentences)

    return {
        "transitions_number": number,
        "trans_similarity": similarity,
        "transition_types_count": types,
        "transitions_per_sentence": number / len(doc.sentences),
        "expletives_count": expletives,
        "polysyndeton_count": polysyndeton,
        "asyndeton_count": asyndeton,
    }


def storytelling(doc: Document, lex: Lexicon) -> tuple[int, int]:
    return len(find_matches(doc, "narrative", lex)), len(find_matches(doc, "comparison", lex))


# --------------------------------------------------------------------------
# readability


def flesch(doc: Document, variant: str = "english") -> float:
    """Flesch reading ease; higher means easier."""
    try:
        base, w_len, w_syl = FLESCH_CONSTANTS[variant]
    except KeyError:
        raise ConfigError(f"unknown Flesch variant {variant!r}; choose from {sorted(FLESCH_CONSTANTS)}") from None
    words = doc.words
    if not words:
        raise EmptyDocument(f"document {doc.id!r} has no words")
    syllables = sum(count_syllables(t.surface) for t in words)
    return base - w_len * (len(words) / len(doc.sentences)) - w_syl * (syllables / len(words))


def discourse_features(doc: Document, lex: Lexicon, flesch_variant: str = "english") -> DiscourseFeatures:
    narrative, comparison = storytelling(doc, lex)
    return DiscourseFeatures(
        **overlap_features(doc),
        alliteration=alliteration(doc),
        anaphora=anaphora(doc),
        antimetabole=antimetabole(doc),
        epanalepsis=epanalepsis(doc),
        **transition_features(doc, lex),
        narrative_words=narrative,
        comparison_count=comparison,
        flesch_score=flesch(doc, flesch_variant),
    )
