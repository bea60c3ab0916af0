"""Transcript normalisation: sentences, clauses, tokens and dependency parses.

Everything here is rule based and deterministic.  A :class:`Document` is
immutable once built, so it can be shared freely between worker processes.
"""

from __future__ import annotations

import difflib
import io
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence, TextIO

from . import resources
from .errors import AlignmentError, EmptyDocument, FormatError, MalformedParse

TERMINAL_PUNCT = ("period", "question", "exclaim", "ellipsis", "none")

ELISIONS = {
    "l'": "le",
    "qu'": "que",
    "n'": "ne",
    "d'": "de",
    "j'": "je",
    "s'": "se",
    "c'": "ce",
    "m'": "me",
    "t'": "te",
}

ABBREVIATIONS = frozenset(
    {
        "m", "mm", "mme", "mmes", "mlle", "mlles", "dr", "pr", "me", "etc", "cf",
        "ex", "p", "pp", "vol", "st", "ste", "av", "apr", "env", "fig", "chap",
        "éd", "coll", "réf", "resp", "vs",
    }
)

_LETTER = r"[^\W\d_]"
_TOKEN_RE = re.compile(
    rf"""
    (?P<fixed>aujourd['’]hui|prud['’]hom{_LETTER}*)
    |(?P<elided>(?<!{_LETTER}){_LETTER}+['’](?={_LETTER}))
    |(?P<word>{_LETTER}+(?:-{_LETTER}+)*)
    |(?P<number>\d+(?:[.,]\d+)*)
    |(?P<ellipsis>\.{{2,}}|…)
    |(?P<other>\S)
    """,
    re.VERBOSE | re.IGNORECASE,
)

_SENTENCE_END = frozenset({".", "!", "?", "…"})
_CLOSERS = frozenset({"»", '"', "”", ")", "]", "’", "'"})
_OPENERS = frozenset({"«", '"', "“", "(", "[", "—", "–", "-"})
# Punctuation closing the current clause (it stays attached to that clause).
_CLAUSE_END = frozenset({",", ";", ":", ")", "—", "–"})
_CLAUSE_OPEN = frozenset({"("})
# Bare "que" is too ambiguous (completive, relative, comparative) to split on.
_NON_SPLITTING_SUBORDINATORS = frozenset({"que"})

VOWELS = frozenset("aàâeéèêëiîïoôuùûüyœæ")


@dataclass(frozen=True)
class Token:
    surface: str
    norm: str
    index: int
    is_word: bool
    upos: str | None = None
    lemma: str | None = None
    start: int = 0

    @property
    def end(self) -> int:
        return self.start + len(self.surface)


@dataclass(frozen=True)
class DepNode:
    id: int
    form: str
    lemma: str
    upos: str
    xpos: str
    feats: str
    head: int  # 0 = ROOT
    deprel: str
    deps: str = "_"
    misc: str = "_"

    @property
    def label(self) -> str:
        return self.deprel


@dataclass(frozen=True)
class DependencyTree:
    nodes: tuple[DepNode, ...]
    sentence_ref: int = 0
    comments: tuple[str, ...] = ()

    @property
    def root(self) -> int:
        return next(n.id for n in self.nodes if n.head == 0)

    def children(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            if n.head:
                out[n.head].append(n.id)
        return out

    def neighbours(self) -> dict[int, list[int]]:
        """Undirected adjacency (parent and children) keyed by node id."""
        out = self.children()
        for n in self.nodes:
            if n.head:
                out[n.id].append(n.head)
        return out


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    clauses: tuple[tuple[int, int], ...]
    terminal_punct: str = "none"
    parse: DependencyTree | None = None
    start: int = 0
    end: int = 0

    @property
    def words(self) -> list[Token]:
        return [t for t in self.tokens if t.is_word]

    @property
    def norms(self) -> list[str]:
        return [t.norm for t in self.tokens if t.is_word]

    def clause_tokens(self) -> Iterator[tuple[Token, ...]]:
        for a, b in self.clauses:
            yield self.tokens[a:b]

    @property
    def has_pos(self) -> bool:
        return any(t.upos for t in self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    sentences: tuple[Sentence, ...]
    language_tag: str = "fr"
    unparsed: tuple[int, ...] = field(default=())
    parser: str | None = None

    @property
    def tokens(self) -> list[Token]:
        return [t for s in self.sentences for t in s.tokens]

    @property
    def words(self) -> list[Token]:
        return [t for s in self.sentences for t in s.tokens if t.is_word]

    @property
    def has_pos(self) -> bool:
        return any(s.has_pos for s in self.sentences)

    @property
    def parsed_sentences(self) -> list[Sentence]:
        return [s for s in self.sentences if s.parse is not None]


# --------------------------------------------------------------------------
# tokenisation and segmentation


def normalise(surface: str) -> str:
    low = surface.lower().replace("’", "'")
    if low.endswith("'") and len(low) > 1:
        if low in ELISIONS:
            return ELISIONS[low]
        if low.endswith("qu'"):
            return low[:-1] + "e"
        return low[:-1] + "e"
    return low


def _is_word(surface: str) -> bool:
    return any(ch.isalnum() for ch in surface)


def tokenize(text: str, offset: int = 0) -> list[Token]:
    """Split ``text`` into tokens covering every non-space character once."""
    out = []
    for i, m in enumerate(_TOKEN_RE.finditer(text)):
        surface = m.group(0)
        out.append(
            Token(
                surface=surface,
                norm=normalise(surface),
                index=i,
                is_word=_is_word(surface),
                start=offset + m.start(),
            )
        )
    return out


def _terminal_kind(tokens: Sequence[Token]) -> str:
    for tok in reversed(tokens):
        if tok.is_word:
            return "none"
        s = tok.surface
        if s in _CLOSERS:
            continue
        if s == "?":
            return "question"
        if s == "!":
            return "exclaim"
        if s == "…" or set(s) == {"."} and len(s) > 1:
            return "ellipsis"
        if s == ".":
            return "period"
        return "none"
    return "none"


def _is_sentence_end(tok: Token) -> bool:
    return tok.surface in _SENTENCE_END or (len(tok.surface) > 1 and set(tok.surface) == {"."})


def _split_sentences(raw: str, tokens: list[Token]) -> list[list[Token]]:
    groups: list[list[Token]] = []
    current: list[Token] = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        current.append(tok)
        i += 1
        if not _is_sentence_end(tok):
            continue
        if tok.surface == "." and len(current) >= 2:
            prev = current[-2]
            if prev.end == tok.start and prev.is_word and (
                prev.norm in ABBREVIATIONS or (len(prev.surface) == 1 and prev.surface.isupper())
            ):
                continue
        # absorb trailing terminal marks and closing quotes/brackets
        while i < n and tokens[i].start == current[-1].end and (
            _is_sentence_end(tokens[i]) or tokens[i].surface in _CLOSERS
        ):
            current.append(tokens[i])
            i += 1
        if i < n and tokens[i].surface in _CLOSERS and not raw[current[-1].end:tokens[i].start].strip():
            # closing quote separated by a space: « Ça va ? »
            if tokens[i].surface in {"»", "”"}:
                current.append(tokens[i])
                i += 1
        if i >= n:
            break
        nxt = tokens[i]
        gap = raw[current[-1].end:nxt.start]
        first = nxt.surface[0]
        if gap and gap.isspace() and (first.isupper() or first.isdigit() or first in _OPENERS):
            groups.append(current)
            current = []
    if current:
        groups.append(current)
    return groups


def _subordinator_patterns() -> list[tuple[str, ...]]:
    pats = []
    for entry in resources.auxiliary()["subordinating_conjunctions"]:
        seq = tuple(normalise(w) for w in entry.split())
        if entry not in _NON_SPLITTING_SUBORDINATORS:
            pats.append(seq)
    # longest first so "parce que" wins over a shorter prefix
    return sorted(set(pats), key=lambda p: (-len(p), p))


_SUBORDINATORS: list[tuple[str, ...]] | None = None


def _clauses(tokens: Sequence[Token]) -> tuple[tuple[int, int], ...]:
    global _SUBORDINATORS
    if _SUBORDINATORS is None:
        _SUBORDINATORS = _subordinator_patterns()
    starts = [0]
    n = len(tokens)
    norms = [t.norm if t.is_word else None for t in tokens]
    i = 0
    while i < n:
        tok = tokens[i]
        if tok.surface in _CLAUSE_END and i + 1 < n:
            starts.append(i + 1)
        elif tok.surface in _CLAUSE_OPEN and i > 0:
            starts.append(i)
        elif tok.is_word and i > 0:
            for pat in _SUBORDINATORS:
                if tuple(norms[i:i + len(pat)]) == pat:
                    starts.append(i)
                    break
        i += 1
    starts = sorted(set(starts))
    spans = [(a, b) for a, b in zip(starts, starts[1:] + [n])]
    # fold clauses holding no word into a neighbour
    merged: list[list[int]] = []
    for a, b in spans:
        has_word = any(t.is_word for t in tokens[a:b])
        if merged and not has_word:
            merged[-1][1] = b
        elif merged and not any(t.is_word for t in tokens[merged[-1][0]:merged[-1][1]]):
            merged[-1][1] = b
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


def _make_sentence(raw: str, toks: list[Token]) -> Sentence:
    toks = [replace(t, index=k) for k, t in enumerate(toks)]
    return Sentence(
        tokens=tuple(toks),
        clauses=_clauses(toks),
        terminal_punct=_terminal_kind(toks),
        start=toks[0].start,
        end=toks[-1].end,
    )


def segment(raw_text: str, doc_id: str = "doc", language_tag: str = "fr") -> Document:
    """Build a :class:`Document` from raw transcript text.

    Raises :class:`EmptyDocument` for empty or whitespace-only input.
    """
    if not raw_text or raw_text.isspace():
        raise EmptyDocument(f"document {doc_id!r} is empty")
    tokens = tokenize(raw_text)
    sentences = tuple(_make_sentence(raw_text, g) for g in _split_sentences(raw_text, tokens))
    return Document(id=doc_id, raw_text=raw_text, sentences=sentences, language_tag=language_tag)


def serialize(doc: Document) -> str:
    """Render a document back to text, one space between sentences."""
    return " ".join(" ".join(doc.raw_text[s.start:s.end].split()) for s in doc.sentences)


# --------------------------------------------------------------------------
# syllables


def count_syllables(word: str) -> int:
    """Count French vowel groups, dropping a silent final ``e``/``es``."""
    w = word.lower()
    groups = 0
    in_vowel = False
    for ch in w:
        if ch in VOWELS:
            if not in_vowel:
                groups += 1
            in_vowel = True
        else:
            in_vowel = False
    if groups == 0:
        return 1
    if groups > 1 and (w.endswith("e") or w.endswith("es")):
        # only a plain, unaccented final e is silent
        stem = w[:-1] if w.endswith("e") else w[:-2]
        if stem and stem[-1] not in VOWELS:
            groups -= 1
    return max(groups, 1)


# --------------------------------------------------------------------------
# CoNLL-U


def _check_tree(nodes: list[DepNode], ordinal: int) -> None:
    ids = [n.id for n in nodes]
    if ids != list(range(1, len(nodes) + 1)):
        raise MalformedParse("node ids are not consecutive from 1", ordinal)
    roots = [n for n in nodes if n.head == 0]
    if len(roots) != 1:
        raise MalformedParse(f"expected exactly one root, found {len(roots)}", ordinal)
    heads = {n.id: n.head for n in nodes}
    for n in nodes:
        if not 0 <= n.head <= len(nodes):
            raise MalformedParse(f"head {n.head} of node {n.id} out of range", ordinal)
    for start in heads:
        seen = set()
        cur = start
        while cur != 0:
            if cur in seen:
                raise MalformedParse(f"head cycle through node {cur}", ordinal)
            seen.add(cur)
            cur = heads[cur]


def ingest_conllu(stream: TextIO | str) -> list[DependencyTree]:
    """Read dependency trees from CoNLL-U text (LF or CRLF line endings)."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    trees: list[DependencyTree] = []
    nodes: list[DepNode] = []
    comments: list[str] = []

    def flush() -> None:
        nonlocal nodes, comments
        if nodes:
            _check_tree(nodes, len(trees) + 1)
            trees.append(DependencyTree(tuple(nodes), len(trees), tuple(comments)))
        elif comments:
            raise FormatError("sentence block without tokens", lineno)
        nodes, comments = [], []

    lineno = 0
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise FormatError(f"expected 10 tab-separated columns, got {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue  # multiword-token range or empty node
        try:
            node_id = int(cols[0])
            head = int(cols[6])
        except ValueError:
            raise FormatError(f"non-integer ID/HEAD ({cols[0]!r}, {cols[6]!r})", lineno) from None
        nodes.append(DepNode(node_id, cols[1], cols[2], cols[3], cols[4], cols[5], head, cols[7], cols[8], cols[9]))
    flush()
    return trees


def serialize_conllu(trees: Iterable[DependencyTree]) -> str:
    out = []
    for tree in trees:
        out.extend(tree.comments)
        for n in tree.nodes:
            out.append("\t".join([str(n.id), n.form, n.lemma, n.upos, n.xpos, n.feats, str(n.head), n.deprel, n.deps, n.misc]))
        out.append("")
    return "\n".join(out) + ("\n" if out else "")


# --------------------------------------------------------------------------
# parse alignment

MAX_UNALIGNED = 0.10


def _count_similarity(a: int, b: int) -> float:
    if max(a, b) == 0:
        return 1.0
    return 1.0 - abs(a - b) / max(a, b)


def _monotone_alignment(sent_sizes: list[int], tree_sizes: list[int]) -> dict[int, int]:
    n, m = len(sent_sizes), len(tree_sizes)
    dp = [[0.0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = max(dp[i - 1][j], dp[i][j - 1])
            sim = _count_similarity(sent_sizes[i - 1], tree_sizes[j - 1])
            if sim >= 0.5:
                best = max(best, dp[i - 1][j - 1] + 1.0 + sim)
            dp[i][j] = best
    pairs: dict[int, int] = {}
    i, j = n, m
    while i > 0 and j > 0:
        sim = _count_similarity(sent_sizes[i - 1], tree_sizes[j - 1])
        if sim >= 0.5 and dp[i][j] == dp[i - 1][j - 1] + 1.0 + sim:
            pairs[i - 1] = j - 1
            i, j = i - 1, j - 1
        elif dp[i][j] == dp[i - 1][j]:
            i -= 1
        else:
            j -= 1
    return pairs


def _tag_tokens(sentence: Sentence, tree: DependencyTree) -> Sentence:
    nodes = tree.nodes
    toks = list(sentence.tokens)
    if len(nodes) == len(toks):
        mapping = dict(enumerate(range(len(nodes))))
    else:
        matcher = difflib.SequenceMatcher(
            a=[t.surface.lower() for t in toks], b=[n.form.lower() for n in nodes], autojunk=False
        )
        mapping = {}
        for block in matcher.get_matching_blocks():
            for k in range(block.size):
                mapping[block.a + k] = block.b + k
    for ti, ni in mapping.items():
        node = nodes[ni]
        toks[ti] = replace(
            toks[ti],
            upos=node.upos if node.upos != "_" else None,
            lemma=node.lemma if node.lemma != "_" else None,
        )
    return replace(sentence, tokens=tuple(toks), parse=tree)


def align_parses(doc: Document, trees: Sequence[DependencyTree], parser: str | None = None) -> Document:
    """Attach trees to sentences, in order when counts agree.

    With differing counts a monotone alignment on token counts is used;
    more than 10% of sentences left without a tree raises AlignmentError.
    """
    sents = doc.sentences
    if len(trees) == len(sents):
        pairs = {i: i for i in range(len(sents))}
    else:
        pairs = _monotone_alignment([len(s.tokens) for s in sents], [len(t.nodes) for t in trees])
    unaligned = tuple(i for i in range(len(sents)) if i not in pairs)
    if sents and len(unaligned) / len(sents) > MAX_UNALIGNED:
        raise AlignmentError(
            f"document {doc.id!r}: {len(unaligned)} of {len(sents)} sentences have no matching parse"
        )
    new = tuple(_tag_tokens(s, trees[pairs[i]]) if i in pairs else s for i, s in enumerate(sents))
    return replace(doc, sentences=new, unparsed=unaligned, parser=parser or doc.parser)
