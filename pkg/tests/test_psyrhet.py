import pytest

from speechshift.errors import ConfigError, EmptyDocument
from speechshift.lexicon import build_lexicon, default_lexicon
from speechshift.psyrhet import CATEGORIES, liwc_profile
from speechshift.text_model import Document, segment


def _lexicon(**overrides):
    data = {c: [] for c in CATEGORIES}
    data.update(overrides)
    return build_lexicon(data)


def test_percentage_of_words():
    doc = segment("Je suis vraiment très heureux de vous voir ce soir.")
    assert len(doc.words) == 10
    assert liwc_profile(doc, _lexicon(positive_emotion=["heureux"]))["positive_emotion"] == 10.0


def test_no_hits_all_zero():
    assert set(liwc_profile(segment("Le chat dort."), _lexicon()).values()) == {0.0}


def test_cognition_verbs():
    assert liwc_profile(segment("penser savoir croire"), default_lexicon())["cognition"] == 100.0


def test_missing_category():
    with pytest.raises(ConfigError):
        liwc_profile(segment("Bonjour."), build_lexicon({"affect": ["joie"]}))


def test_empty_document():
    with pytest.raises(EmptyDocument):
        liwc_profile(Document("e", "", ()), default_lexicon())


def test_affect_covers_positive_and_negative():
    p = liwc_profile(segment("Quelle joie et quelle tristesse."), default_lexicon())
    assert p["affect"] == pytest.approx(p["positive_emotion"] + p["negative_emotion"])
