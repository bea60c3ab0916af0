"""Named word lists with exact, prefix-wildcard and phrase entries.

Lexicon files are JSON objects mapping a category name to a list of entry
strings, e.g. ``{"positive_emotion": ["heureux", "joyeu*"]}``.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, TextIO

from . import resources
from .errors import BadPattern, DuplicateCategory, LexiconError, UnknownCategory
from .text_model import Document, Sentence, tokenize

_CATEGORY_RE = re.compile(r"^[a-z_]+$")


@dataclass(frozen=True)
class Entry:
    pattern: str
    norms: tuple[str, ...]
    wildcard: bool = False

    @property
    def is_phrase(self) -> bool:
        return any(ch.isspace() for ch in self.pattern)

    def __len__(self) -> int:
        return len(self.norms)


class Match(NamedTuple):
    sentence: int
    start: int  # token index within the sentence
    end: int
    entry: Entry


@dataclass(frozen=True)
class Lexicon:
    name: str
    categories: Mapping[str, tuple[Entry, ...]]
    version: str

    def __contains__(self, category: str) -> bool:
        return category in self.categories

    def entries(self, category: str) -> tuple[Entry, ...]:
        try:
            return self.categories[category]
        except KeyError:
            raise UnknownCategory(f"category {category!r} not in lexicon {self.name!r}") from None

    def to_json(self) -> dict[str, list[str]]:
        return {c: [e.pattern for e in es] for c, es in self.categories.items()}


def parse_entry(raw: str) -> Entry:
    pattern = raw.strip().lower().replace("’", "'")
    pattern = " ".join(pattern.split())
    if not pattern or pattern == "*":
        raise BadPattern(f"empty entry {raw!r}")
    stars = pattern.count("*")
    if stars > 1 or (stars == 1 and not pattern.endswith("*")):
        raise BadPattern(f"wildcard '*' only allowed once, at the end: {raw!r}")
    wildcard = stars == 1
    body = pattern[:-1] if wildcard else pattern
    if wildcard and any(ch.isspace() for ch in body):
        raise BadPattern(f"phrase entries cannot carry a wildcard: {raw!r}")
    norms = tuple(t.norm for t in tokenize(body) if t.is_word)
    if not norms:
        raise BadPattern(f"entry has no word characters: {raw!r}")
    if wildcard and not body[-1].isalnum():
        raise BadPattern(f"wildcard must follow a letter: {raw!r}")
    return Entry(pattern, norms, wildcard)


def _content_version(categories: Mapping[str, Iterable[Entry]]) -> str:
    blob = json.dumps({c: [e.pattern for e in es] for c, es in categories.items()}, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def build_lexicon(data: Mapping[str, Iterable[str]], name: str = "lexicon") -> Lexicon:
    cats: dict[str, tuple[Entry, ...]] = {}
    for cat, raw_entries in data.items():
        if not isinstance(cat, str) or not _CATEGORY_RE.match(cat):
            raise LexiconError(f"invalid category name {cat!r} (lower-case ASCII and '_' only)")
        if isinstance(raw_entries, str) or not all(isinstance(e, str) for e in raw_entries):
            raise LexiconError(f"category {cat!r} must map to a list of strings")
        seen: dict[str, Entry] = {}
        for raw in raw_entries:
            entry = parse_entry(raw)
            seen.setdefault(entry.pattern, entry)
        cats[cat] = tuple(seen.values())
    return Lexicon(name, MappingProxyType(cats), _content_version(cats))


def _reject_duplicates(pairs: list[tuple[str, object]]) -> dict[str, object]:
    out: dict[str, object] = {}
    for key, value in pairs:
        if key in out:
            raise DuplicateCategory(f"category {key!r} defined twice")
        out[key] = value
    return out


def load_lexicon(stream: TextIO | str | Path, name: str | None = None) -> Lexicon:
    """Load a JSON lexicon from a stream, a path, or a JSON string."""
    if isinstance(stream, Path):
        name = name or stream.stem
        stream = io.StringIO(stream.read_text(encoding="utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    try:
        data = json.load(stream, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise LexiconError(f"lexicon is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise LexiconError("lexicon must be a JSON object")
    return build_lexicon(data, name or "lexicon")


def merge_lexicons(lexicons: Iterable[Lexicon]) -> Lexicon:
    """Combine lexicons; later ones override categories with the same name."""
    lexicons = list(lexicons)
    cats: dict[str, tuple[Entry, ...]] = {}
    for lex in lexicons:
        cats.update(lex.categories)
    name = "+".join(lex.name for lex in lexicons)
    return Lexicon(name, MappingProxyType(cats), _content_version(cats))


@lru_cache(maxsize=None)
def default_lexicon() -> Lexicon:
    aux = load_lexicon(resources.data_text(resources.AUXILIARY_FILE), name="auxiliary")
    liwc = load_lexicon(resources.data_text(resources.LIWC_FILE), name="liwc_fr_mini")
    return merge_lexicons([aux, liwc])


# --------------------------------------------------------------------------
# matching


class _Index:
    def __init__(self, entries: Iterable[Entry]):
        self.exact: dict[str, list[Entry]] = {}
        self.prefix: dict[str, list[Entry]] = {}
        for e in entries:
            if e.wildcard and len(e.norms) == 1:
                self.prefix.setdefault(e.norms[0], []).append(e)
            else:
                self.exact.setdefault(e.norms[0], []).append(e)

    def candidates(self, norm: str) -> list[Entry]:
        out = list(self.exact.get(norm, ()))
        for k in range(1, len(norm) + 1):
            out.extend(self.prefix.get(norm[:k], ()))
        return out


def _matches_at(tokens, i: int, entry: Entry) -> bool:
    n = len(entry.norms)
    if i + n > len(tokens):
        return False
    for k, want in enumerate(entry.norms):
        tok = tokens[i + k]
        if not tok.is_word:
            return False
        last = k == n - 1
        if last and entry.wildcard:
            if not tok.norm.startswith(want):
                return False
        elif tok.norm != want:
            return False
    return True


def _sentence_matches(sent: Sentence, index: _Index, sent_no: int) -> list[Match]:
    toks = sent.tokens
    n = len(toks)
    spans: dict[int, list[Match]] = {}
    for i, tok in enumerate(toks):
        if not tok.is_word:
            continue
        for entry in index.candidates(tok.norm):
            if _matches_at(toks, i, entry):
                spans.setdefault(i, []).append(Match(sent_no, i, i + len(entry), entry))
    # maximum number of non-overlapping matches, ties broken towards longer ones
    best: list[tuple[int, int]] = [(0, 0)] * (n + 1)
    choice: list[Match | None] = [None] * (n + 1)
    for i in range(n - 1, -1, -1):
        best[i], choice[i] = best[i + 1], None
        for m in sorted(spans.get(i, ()), key=lambda m: (-(m.end - m.start), m.entry.pattern)):
            cnt, cov = best[m.end]
            cand = (cnt + 1, cov + m.end - m.start)
            if cand > best[i]:
                best[i], choice[i] = cand, m
    out = []
    i = 0
    while i < n:
        m = choice[i]
        if m is None:
            i += 1
        else:
            out.append(m)
            i = m.end
    return out


_INDEX_CACHE: dict[tuple[str, str], _Index] = {}


def _index_for(lex: Lexicon, category: str) -> _Index:
    key = (lex.version, category)
    index = _INDEX_CACHE.get(key)
    if index is None:
        index = _INDEX_CACHE[key] = _Index(lex.entries(category))
    return index


def find_matches(doc: Document, category: str, lex: Lexicon) -> list[Match]:
    """Non-overlapping matches of ``category`` in reading order."""
    index = _index_for(lex, category)
    out: list[Match] = []
    for k, sent in enumerate(doc.sentences):
        out.extend(_sentence_matches(sent, index, k))
    return out


def count_matches(doc: Document, category: str, lex: Lexicon) -> int:
    return len(find_matches(doc, category, lex))
