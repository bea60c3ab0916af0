import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from speechshift.errors import BadPattern, DuplicateCategory, LexiconError, UnknownCategory
from speechshift.lexicon import (
    build_lexicon, count_matches, default_lexicon, find_matches, load_lexicon, merge_lexicons, parse_entry,
)
from speechshift.text_model import Document, segment


def test_load_category_with_wildcard():
    lex = load_lexicon('{"positive_emotion": ["heureux", "joyeu*"]}')
    assert list(lex.categories) == ["positive_emotion"]
    assert len(lex.entries("positive_emotion")) == 2
    assert lex.entries("positive_emotion")[1].wildcard


def test_inner_wildcard_rejected():
    with pytest.raises(BadPattern):
        parse_entry("jo*eux")


def test_phrase_entry():
    lex = load_lexicon('{"narrative": ["il était une fois"]}')
    assert lex.entries("narrative")[0].is_phrase


def test_duplicate_category_rejected():
    with pytest.raises(DuplicateCategory):
        load_lexicon('{"a": ["x"], "a": ["y"]}')


def test_invalid_json_is_lexicon_error():
    with pytest.raises(LexiconError):
        load_lexicon("{not json")


def test_unknown_category():
    with pytest.raises(UnknownCategory):
        count_matches(segment("Bonjour."), "nope", default_lexicon())


def test_prefix_versus_exact():
    lex = build_lexicon({"c": ["heureux", "joyeu*"]})
    assert count_matches(segment("joyeuse et heureuse"), "c", lex) == 1


def test_phrase_match():
    lex = build_lexicon({"narrative": ["il était une fois"]})
    assert count_matches(segment("il était une fois un roi"), "narrative", lex) == 1


def test_phrase_does_not_cross_sentences():
    lex = build_lexicon({"c": ["bien sûr"]})
    assert count_matches(segment("Il va bien. Sûr de lui."), "c", lex) == 0


def test_empty_document_counts_zero():
    lex = build_lexicon({"c": ["x"]})
    assert count_matches(Document("e", "", ()), "c", lex) == 0


def test_punctuation_is_not_matched():
    lex = build_lexicon({"c": ["a*"]})
    assert count_matches(segment("avec, avant ! arbre ?"), "c", lex) == 3


def test_matches_do_not_overlap():
    lex = build_lexicon({"c": ["en fait", "fait"]})
    ms = find_matches(segment("en fait il fait beau"), "c", lex)
    assert [(m.start, m.end) for m in ms] == [(0, 2), (3, 4)]


def test_merge_later_overrides():
    a = build_lexicon({"x": ["un"], "y": ["deux"]}, "a")
    b = build_lexicon({"x": ["trois"]}, "b")
    merged = merge_lexicons([a, b])
    assert [e.pattern for e in merged.entries("x")] == ["trois"]
    assert [e.pattern for e in merged.entries("y")] == ["deux"]
    assert merged.name == "a+b"


def test_version_is_content_hash(tmp_path):
    data = {"x": ["un", "deux*"]}
    p = tmp_path / "lex.json"
    p.write_text(json.dumps(data), encoding="utf-8")
    assert load_lexicon(p).version == build_lexicon(data).version
    assert build_lexicon({"x": ["un"]}).version != build_lexicon(data).version


def test_default_lexicon_has_liwc_and_auxiliary():
    lex = default_lexicon()
    for cat in ("positive_emotion", "cognition", "perception", "narrative", "negation", "expletives"):
        assert cat in lex


WORDS = st.sampled_from(["joie", "joyeux", "triste", "et", "la", "maison", "heureux", "bien", "sûr"])


@settings(max_examples=80, deadline=None)
@given(st.lists(WORDS, min_size=1, max_size=15), st.lists(WORDS, min_size=1, max_size=5))
def test_adding_matching_tokens_never_decreases_count(words, extra):
    lex = build_lexicon({"c": ["joy*", "heureux", "bien sûr", "triste"]})
    base = count_matches(segment(" ".join(words) + "."), "c", lex)
    grown = count_matches(segment(" ".join(words + extra) + "."), "c", lex)
    assert grown >= base
