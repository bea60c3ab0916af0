"""Syntactic features: Weisfeiler-Lehman structural diversity, negation,
and sentence-structure proportions."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

from . import resources
from .errors import ConfigError
from .lexicon import Lexicon
from .text_model import DependencyTree, Document, Sentence, Token

STRUCTURES = (
    "declarative",
    "interrogative",
    "exclamatory",
    "imperative",
    "passive",
    "cleft",
    "conditional",
    "nominal",
    "relative",
    "impersonal",
)

WL_LABELS = ("deprel", "upos")
WL_AGGREGATES = ("nearest", "pairwise")

_PASSIVE_RELATIONS = frozenset({"aux:pass", "nsubj:pass", "csubj:pass", "expl:pass"})
_VERB_UPOS = frozenset({"VERB", "AUX"})
_NOUNISH_UPOS = frozenset({"NOUN", "PROPN"})
_DEMONSTRATIVE_HEADS = frozenset({"celui", "celle", "ceux", "celles"})
# partners of "ne" that are absorbed into a single negation
_NE_PARTNERS_EXTRA = frozenset({"guère", "point", "nullement", "nulle"})
_AMBIGUOUS_BARE = frozenset({"pas", "plus"})


@dataclass(frozen=True)
class SyntacticFeatures:
    syntactic_diversity_mean: float | None
    negation_count: int
    proportions: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float | int | None]:
        out: dict[str, float | int | None] = {
            "syntactic_diversity_mean": self.syntactic_diversity_mean,
            "negation_count": self.negation_count,
        }
        out.update({name: self.proportions[name] for name in STRUCTURES})
        return out


# --------------------------------------------------------------------------
# Weisfeiler-Lehman


class _LabelTable:
    """Compresses composite WL labels to small integers, shared across trees."""

    def __init__(self) -> None:
        self._ids: dict[object, int] = {}

    def __call__(self, key: object) -> int:
        return self._ids.setdefault(key, len(self._ids))


def wl_histogram(tree: DependencyTree, iterations: int = 3, label: str = "deprel",
                 table: _LabelTable | None = None) -> Counter:
    """Multiset of (iteration, label) over ``iterations`` refinement rounds."""
    if label not in WL_LABELS:
        raise ConfigError(f"unknown WL label {label!r}")
    table = table or _LabelTable()
    neighbours = tree.neighbours()
    labels = {n.id: table(("init", getattr(n, label))) for n in tree.nodes}
    hist: Counter = Counter((0, lab) for lab in labels.values())
    for it in range(1, iterations + 1):
        labels = {
            node: table((labels[node], tuple(sorted(labels[nb] for nb in neighbours[node]))))
            for node in labels
        }
        hist.update((it, lab) for lab in labels.values())
    return hist


def histogram_similarity(a: Counter, b: Counter) -> float:
    size = max(sum(a.values()), sum(b.values()))
    if size == 0:
        return 1.0
    return sum((a & b).values()) / size


def wl_diversity_trees(trees: Sequence[DependencyTree], iterations: int = 3, label: str = "deprel",
                       aggregate: str = "nearest") -> float | None:
    """Structural diversity of a set of trees in [0, 1]; ``None`` below two trees.

    ``nearest`` averages, over trees, one minus the similarity to the closest
    other tree.  ``pairwise`` is one minus the mean similarity over all pairs.
    """
    if aggregate not in WL_AGGREGATES:
        raise ConfigError(f"unknown WL aggregate {aggregate!r}")
    if len(trees) < 2:
        return None
    table = _LabelTable()
    hists = [wl_histogram(t, iterations, label, table) for t in trees]
    n = len(hists)
    sim = [[1.0] * n for _ in range(n)]
    for i, j in combinations(range(n), 2):
        sim[i][j] = sim[j][i] = histogram_similarity(hists[i], hists[j])
    if aggregate == "pairwise":
        pairs = [sim[i][j] for i, j in combinations(range(n), 2)]
        return 1.0 - sum(pairs) / len(pairs)
    nearest = [max(sim[i][j] for j in range(n) if j != i) for i in range(n)]
    return 1.0 - sum(nearest) / n


def wl_diversity(doc: Document, iterations: int = 3, label: str = "deprel",
                 aggregate: str = "nearest") -> float | None:
    return wl_diversity_trees([s.parse for s in doc.parsed_sentences], iterations, label, aggregate)


# --------------------------------------------------------------------------
# negation


def negation_count(doc: Document, lex: Lexicon) -> int:
    """Count negations; ``ne ... pas`` (or plus/jamais/rien...) counts once."""
    entries = {e.norms[0] for e in lex.entries("negation") if len(e.norms) == 1}
    ne_words = {"ne"} & entries or {"ne"}
    partners = (entries - ne_words - {"sans"}) | _NE_PARTNERS_EXTRA
    standalone = entries - ne_words - _AMBIGUOUS_BARE
    total = 0
    for sent in doc.sentences:
        for clause in sent.clause_tokens():
            open_ne = False
            pending = False  # a partner before "ne" (rien ne..., aucun ... ne)
            for tok in clause:
                if not tok.is_word:
                    continue
                if tok.norm in ne_words:
                    if not pending:
                        total += 1
                    open_ne, pending = True, False
                elif open_ne and tok.norm in partners:
                    continue
                elif tok.norm in standalone:
                    total += 1
                    pending = tok.norm in partners
    return total


# --------------------------------------------------------------------------
# sentence structures


def _ends_with(word: str, suffixes: Sequence[str]) -> bool:
    return any(word.endswith(s) and len(word) > len(s) for s in suffixes)


def _has_finite_verb(words: Sequence[Token]) -> bool:
    if any(t.upos for t in words):
        return any(t.upos in _VERB_UPOS for t in words)
    finite = resources.wordset("finite_forms")
    clitics = resources.wordset("subject_clitics")
    suffixes = resources.wordlists()["finite_suffixes"]
    excluded = resources.wordset("finite_suffix_exclusions") | resources.function_words()
    for t in words:
        if t.norm in finite or t.norm in clitics:
            return True
        if len(t.norm) >= 4 and t.norm not in excluded and _ends_with(t.norm, suffixes):
            return True
    return False


def _is_imperative(words: Sequence[Token], parsed: bool) -> bool:
    if not words:
        return False
    first = words[0]
    if parsed and first.upos:
        return first.upos in _VERB_UPOS
    if first.norm in resources.wordset("imperative_forms"):
        return True
    if "-" in first.norm:
        head, _, tail = first.norm.rpartition("-")
        return bool(head) and tail in resources.wordset("imperative_clitics") and "-t" not in first.norm
    return False


def _participle_like(tok: Token) -> bool:
    w = tok.norm
    if len(w) < 3 or w in resources.function_words() or w in resources.wordset("etre_forms"):
        return False
    if w in resources.wordset("participle_exclusions"):
        return False
    if tok.upos and tok.upos not in {"VERB", "ADJ"}:
        return False
    return _ends_with(w, resources.wordlists()["participle_suffixes"])


def _is_passive(sent: Sentence) -> bool:
    if sent.parse is not None and any(n.deprel in _PASSIVE_RELATIONS for n in sent.parse.nodes):
        return True
    etre = resources.wordset("etre_forms")
    toks = sent.tokens
    for i, tok in enumerate(toks):
        if not tok.is_word or tok.norm not in etre or tok.norm == "être":
            continue
        prev = next((t for t in reversed(toks[:i]) if t.is_word), None)
        if prev is not None and prev.norm == "ce":
            continue
        seen = 0
        for nxt in toks[i + 1:]:
            if not nxt.is_word:
                break
            seen += 1
            if seen > 3:
                break
            if _participle_like(nxt):
                return True
    return False


def _subordinator_que_positions(words: Sequence[Token]) -> set[int]:
    """Indices of ``que`` belonging to multiword conjunctions (parce que, est-ce que...)."""
    heads = set()
    for entry in resources.auxiliary()["subordinating_conjunctions"]:
        parts = entry.split()
        if len(parts) > 1 and parts[-1] == "que":
            heads.add(parts[-2])
    heads.add("est-ce")
    return {i for i, t in enumerate(words) if t.norm == "que" and i > 0 and words[i - 1].norm in heads}


def _cleft_position(words: Sequence[Token], skip: set[int]) -> int | None:
    etre = resources.wordset("etre_forms")
    for i in range(len(words) - 1):
        if words[i].norm == "ce" and words[i + 1].norm in etre:
            for j in range(i + 2, len(words)):
                if words[j].norm in {"qui", "que"} and j not in skip:
                    return j
    return None


def _relative_positions(words: Sequence[Token], skip: set[int]) -> list[int]:
    rel = resources.wordset("relative_pronouns")
    dets = resources.wordset("determiners")
    stop = resources.function_words()
    out = []
    for i, tok in enumerate(words):
        if tok.norm not in rel or i == 0 or i in skip:
            continue
        prev = words[i - 1]
        if prev.upos:
            nounish = prev.upos in _NOUNISH_UPOS or prev.norm in _DEMONSTRATIVE_HEADS
        else:
            nounish = prev.norm in _DEMONSTRATIVE_HEADS or (
                prev.norm not in stop and any(w.norm in dets for w in words[max(0, i - 3):i - 1])
            )
        if nounish:
            out.append(i)
    return out


def _is_conditional(words: Sequence[Token]) -> bool:
    suffixes = resources.wordlists()["conditional_suffixes"]
    excluded = resources.wordset("conditional_exclusions")
    for i, tok in enumerate(words):
        if tok.norm == "si":
            return True
        if tok.surface.lower().replace("’", "'") == "s'" and i + 1 < len(words) and words[i + 1].norm in {"il", "ils"}:
            return True
        if len(tok.norm) >= 6 and tok.norm not in excluded and _ends_with(tok.norm, suffixes):
            return True
    return False


def _is_impersonal(words: Sequence[Token]) -> bool:
    if len(words) < 2 or words[0].norm != "il":
        return False
    verbs = resources.wordset("impersonal_verbs")
    if words[1].norm in verbs:
        return True
    return len(words) > 2 and words[1].norm == "se" and words[2].norm in {"agit", "agissait"}


def structure_flags(sentence: Sentence) -> frozenset[str]:
    """Structure labels for one sentence; always includes at least one label."""
    words = sentence.words
    norms = [t.norm for t in words]
    flags = set()
    if sentence.terminal_punct == "exclaim":
        flags.add("exclamatory")
    elif sentence.terminal_punct == "question":
        flags.add("interrogative")
    elif norms[:2] == ["est-ce", "que"] or norms[:3] == ["que", "est-ce", "que"]:
        flags.add("interrogative")
    if "interrogative" not in flags and _is_imperative(words, sentence.parse is not None):
        flags.add("imperative")
    if not flags & {"interrogative", "exclamatory", "imperative"}:
        flags.add("declarative")
    if _is_passive(sentence):
        flags.add("passive")
    skip = _subordinator_que_positions(words)
    cleft = _cleft_position(words, skip)
    if cleft is not None:
        flags.add("cleft")
        skip = skip | {cleft}
    if _is_conditional(words):
        flags.add("conditional")
    if not _has_finite_verb(words):
        flags.add("nominal")
    if _relative_positions(words, skip):
        flags.add("relative")
    if _is_impersonal(words):
        flags.add("impersonal")
    return frozenset(flags)


def structure_proportions(doc: Document) -> dict[str, float]:
    counts = Counter()
    for sent in doc.sentences:
        counts.update(structure_flags(sent))
    n = len(doc.sentences)
    return {name: counts[name] / n for name in STRUCTURES}


def syntactic_features(doc: Document, lex: Lexicon, iterations: int = 3, label: str = "deprel",
                       aggregate: str = "nearest") -> SyntacticFeatures:
    return SyntacticFeatures(
        syntactic_diversity_mean=wl_diversity(doc, iterations, label, aggregate),
        negation_count=negation_count(doc, lex),
        proportions=structure_proportions(doc),
    )
