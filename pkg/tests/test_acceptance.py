"""Acceptance suite: one test per criterion, each reporting PASS/FAIL in the summary."""

import json
import random
import shutil

import pytest

from conftest import FIXTURES, as_triples, conllu_sentence, make_tree, random_tree, synthetic_corpus
from oracles import brute_force_mwu, reference_mtld, reference_wl
from speechshift.analysis import mann_whitney_u
from speechshift.cli import main
from speechshift.corpus import balance, harmonic_mean, score_bucket
from speechshift.generation import parse_and_validate
from speechshift.lexical import mtld_tokens
from speechshift.registry import FEATURE_GROUPS, FEATURE_NAMES, extract_all
from speechshift.syntactic import wl_diversity, wl_diversity_trees
from speechshift.text_model import align_parses, ingest_conllu, segment

TEXT = "Le chat dort. Le chat mange. La porte est ouverte par le vent."
GROUP_SIZES = {
    "overlap": 8, "transitions": 7, "storytelling": 2, "readability": 1, "lex_diversity": 2,
    "syn_diversity": 1, "negation": 1, "syn_structures": 10, "Aff_LIWC": 6, "Cog_LIWC": 9, "Prc_LIWC": 1,
}


def test_feature_set_cardinality(criterion, toy_conllu):
    with criterion(1, "48 features in groups 8/7/2/1/2/1/1/10/6/9/1", limit=1.0):
        doc = align_parses(segment(TEXT, "toy"), ingest_conllu(toy_conllu))
        fv = extract_all(doc)
        assert len(fv.values) == 48 and list(fv.values) == list(FEATURE_NAMES)
        assert fv.nulls == []
        assert {g: len(names) for g, names in FEATURE_GROUPS.items()} == GROUP_SIZES
        assert list(FEATURE_GROUPS) == list(GROUP_SIZES)


def test_mann_whitney_exactness(criterion):
    with criterion(2, "Mann-Whitney p matches brute force within 1e-9 on 200 tied samples", limit=30.0):
        rng = random.Random(2024)
        sizes = [(n, m) for n in range(3, 8) for m in range(3, 8)]
        worst = 0.0
        for k in range(200):
            n, m = sizes[k % len(sizes)]
            while True:
                a = [rng.randint(0, 4) for _ in range(n)]
                b = [rng.randint(0, 4) for _ in range(m)]
                if len(set(a + b)) < n + m:
                    break
            u, p = mann_whitney_u(a, b)
            ref_u, ref_p = brute_force_mwu(a, b)
            assert u == ref_u
            assert u + mann_whitney_u(b, a)[0] == n * m
            worst = max(worst, abs(p - ref_p))
        assert worst <= 1e-9, worst


def test_mtld_oracle(criterion):
    with criterion(3, "MTLD matches the reference within 1e-9 on 50 sequences", limit=5.0):
        rng = random.Random(99)
        for _ in range(50):
            vocab = [f"w{i}" for i in range(rng.randint(2, 50))]
            tokens = [rng.choice(vocab) for _ in range(rng.randint(10, 200))]
            assert mtld_tokens(tokens) == pytest.approx(reference_mtld(tokens), abs=1e-9)


def test_flesch_bands(criterion):
    with criterion(4, "Flesch fixture pair falls in [60,70] and [40,55]", limit=1.0):
        pair = json.loads((FIXTURES / "flesch_pair.json").read_text(encoding="utf-8"))
        simple = extract_all(segment(pair["simple"])).values["flesch_score"]
        complex_ = extract_all(segment(pair["complex"])).values["flesch_score"]
        assert 60 <= simple <= 70, simple
        assert 40 <= complex_ <= 55, complex_


DEVICE_FEATURE = {
    "alliteration": "alliteration", "anaphora": "anaphora", "antimetabole": "antimetabole",
    "epanalepsis": "epanalepsis", "polysyndeton": "polysyndeton_count", "asyndeton": "asyndeton_count",
    "expletives": "expletives_count", "negation": "negation_count",
}


def test_rhetorical_fixture(criterion, rhetorical_snippets):
    with criterion(5, "hand counts reproduced for 8 devices on 20 snippets", limit=1.0):
        assert len(rhetorical_snippets) == 20
        mismatches = []
        for item in rhetorical_snippets:
            values = extract_all(segment(item["text"])).values
            for device, feature in DEVICE_FEATURE.items():
                if values[feature] != item["counts"][device]:
                    mismatches.append((item["text"], device, values[feature], item["counts"][device]))
        assert not mismatches, mismatches


TOY = [
    make_tree([(2, "det"), (3, "nsubj"), (0, "root"), (3, "punct")]),
    make_tree([(2, "det"), (3, "nsubj"), (0, "root"), (5, "det"), (3, "obj"), (3, "punct")]),
    make_tree([(2, "nsubj"), (0, "root"), (2, "obl"), (3, "case"), (2, "punct")]),
]


def test_wl_properties(criterion):
    with criterion(6, "WL diversity: identical 0, disjoint 1, toy oracle, duplicate monotonicity", limit=10.0):
        block = conllu_sentence(["Le", "chat", "dort", "."], [2, 3, 0, 3], ["det", "nsubj", "root", "punct"])
        doc = align_parses(segment("Le chat dort. Le chat dort. Le chat dort."), ingest_conllu(block * 3))
        assert wl_diversity(doc) == 0.0
        a = make_tree([(0, "root"), (1, "obj")])
        b = make_tree([(0, "racine"), (1, "objet")])
        assert wl_diversity_trees([a, b]) == 1.0
        for aggregate in ("nearest", "pairwise"):
            expected = reference_wl([as_triples(t) for t in TOY], 3, aggregate)
            assert abs(wl_diversity_trees(TOY, aggregate=aggregate) - expected) <= 1e-12
        rng = random.Random(6)
        for _ in range(100):
            trees = [random_tree(rng) for _ in range(rng.randint(2, 6))]
            before = wl_diversity_trees(trees)
            assert wl_diversity_trees(trees + [rng.choice(trees)]) <= before + 1e-12


def test_balancing(criterion):
    with criterion(7, "balancing deterministic under seed 42, buckets capped, harmonic means"):
        samples = synthetic_corpus(200)
        first, second = balance(samples, 42), balance(samples, 42)
        assert first.selected_ids == second.selected_ids
        assert all(count <= first.mean_count for count in first.per_score_buckets.values())
        by_id = {s.id: s for s in samples}
        recount = {}
        for i in first.selected_ids:
            bucket = score_bucket(by_id[i].aggregated_score)
            recount[bucket] = recount.get(bucket, 0) + 1
        assert recount == first.per_score_buckets
        assert harmonic_mean([4, 4, 4]) == 4.0
        assert harmonic_mean([5, 5, 1]) == pytest.approx(2.142857, abs=1e-6)


CORPUS = str(FIXTURES / "directional_corpus.jsonl")


def _pipeline(out, *extra):
    return main(["--out", str(out), "--seed", "42", "pipeline", CORPUS, *extra])


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("accept") / "run"


def test_directional_fixture(criterion, run_dir):
    with criterion(8, "directional fixture classes and arrows", limit=10.0):
        assert _pipeline(run_dir, "--force") == 0
        out = run_dir
        report = json.loads((out / "shifts.json").read_text(encoding="utf-8"))
        classes = {c["feature_name"]: c["class"] for c in report["classified"]}
        arrows = {(s["feature_name"], s["comparison"]): s["direction"] for s in report["shifts"] if s["significant"]}
        for name in ("interrogative", "exclamatory", "positive_emotion"):
            assert classes[name] == "persuasiveness_dependent", (name, classes[name])
            assert arrows[(name, "initial_vs_upgraded")] == "up"
        for name in ("interrogative", "exclamatory"):
            assert arrows[(name, "initial_vs_downgraded")] == "down"
        assert classes["ttr"] == "style_invariant"


def test_validation_contract(criterion):
    with criterion(9, "9 invalid responses flagged by mode, zero false accepts"):
        cases = json.loads((FIXTURES / "validation_cases.json").read_text(encoding="utf-8"))
        invalid = cases["invalid"]
        assert len(invalid) == 9
        modes = sorted({c["mode"] for c in invalid})
        assert modes == ["missing-score", "missing-text", "not-french"]
        assert all(sum(c["mode"] == m for c in invalid) == 3 for m in modes)
        for case in invalid:
            parsed = parse_and_validate(case["response"])
            assert not parsed.valid, case
            assert case["mode"] in parsed.validation_failures, (case, parsed.validation_failures)
        assert all(parse_and_validate(c["response"]).valid for c in cases["valid"])


def _snapshot(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_determinism(criterion, run_dir):
    with criterion(10, "pipeline rerun gives a byte-identical output directory"):
        if not run_dir.exists():
            assert _pipeline(run_dir) == 0
        first = _snapshot(run_dir)
        assert "report.md" in first and "generation_ledger.jsonl" in first
        assert _pipeline(run_dir, "--force") == 0
        assert _snapshot(run_dir) == first
        shutil.rmtree(run_dir)
        assert _pipeline(run_dir) == 0
        assert _snapshot(run_dir) == first
