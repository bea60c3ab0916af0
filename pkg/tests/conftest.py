from __future__ import annotations

import json
import random
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest

from speechshift.corpus import CorpusSample
from speechshift.text_model import DepNode, DependencyTree

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


def make_tree(edges, ref=0):
    """Tree from (head, deprel) pairs; node ids are positions from 1."""
    nodes = tuple(
        DepNode(i, f"w{i}", f"w{i}", "X", "_", "_", head, rel, "_", "_")
        for i, (head, rel) in enumerate(edges, start=1)
    )
    return DependencyTree(nodes, ref)


def random_tree(rng: random.Random, labels=("nsubj", "obj", "det", "amod", "obl", "case")):
    size = rng.randint(1, 7)
    edges = [(0, "root")]
    for i in range(2, size + 1):
        edges.append((rng.randint(1, i - 1), rng.choice(labels)))
    return make_tree(edges)


def as_triples(tree):
    return [(n.id, n.head, n.deprel) for n in tree.nodes]


def synthetic_corpus(n: int = 200, seed: int = 7) -> list[CorpusSample]:
    """Initial samples with three rater scores each, skewed towards the middle."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        centre = rng.choice([1, 2, 2, 3, 3, 3, 3, 4, 4, 4, 5, 5])
        scores = [min(5, max(1, centre + rng.choice([-1, 0, 0, 1]))) for _ in range(3)]
        out.append(CorpusSample(f"s{i:03d}", "initial", f"Texte numéro {i}.", scores, rng.random() < 0.05))
    return out


def conllu_sentence(words, heads, rels, upos=None):
    upos = upos or ["X"] * len(words)
    rows = [
        "\t".join([str(i), w, w.lower(), u, "_", "_", str(h), r, "_", "_"])
        for i, (w, h, r, u) in enumerate(zip(words, heads, rels, upos), start=1)
    ]
    return "\n".join(rows) + "\n\n"


@pytest.fixture
def rhetorical_snippets():
    return json.loads((FIXTURES / "rhetorical_snippets.json").read_text(encoding="utf-8"))


@pytest.fixture
def toy_conllu():
    return (FIXTURES / "toy.conllu").read_text(encoding="utf-8")


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    @contextmanager
    def check(number: int, title: str, limit: float | None = None):
        start = time.perf_counter()
        try:
            yield
            elapsed = time.perf_counter() - start
            if limit is not None:
                assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"
        except BaseException as exc:
            ACCEPTANCE.append(f"FAIL  criterion {number:2d}: {title} ({type(exc).__name__}: {exc})")
            raise
        ACCEPTANCE.append(f"PASS  criterion {number:2d}: {title} ({elapsed:.2f}s)")

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
