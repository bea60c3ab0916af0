import io

import pytest

from speechshift.errors import EmptyDocument, VersionMismatch
from speechshift.registry import (
    FEATURE_GROUPS, FEATURE_NAMES, PARSE_DEPENDENT, ExtractionConfig, FeatureVector, check_versions,
    extract_all, read_csv, read_jsonl, write_csv, write_jsonl,
)
from speechshift.text_model import Document, align_parses, ingest_conllu, segment

TEXT = "Le chat dort. Le chat mange. La porte est ouverte par le vent."


@pytest.fixture
def parsed(toy_conllu):
    return align_parses(segment(TEXT, "toy"), ingest_conllu(toy_conllu), "toy")


def test_names_unique_and_grouped():
    assert len(FEATURE_NAMES) == len(set(FEATURE_NAMES)) == 48
    assert sum(len(v) for v in FEATURE_GROUPS.values()) == 48


def test_parsed_document_is_fully_numeric(parsed):
    fv = extract_all(parsed)
    assert list(fv.values) == list(FEATURE_NAMES)
    assert fv.nulls == []


def test_unparsed_document_has_three_nulls():
    fv = extract_all(segment(TEXT))
    assert sorted(fv.nulls) == sorted(PARSE_DEPENDENT)
    assert set(fv.null_reasons.values()) == {"no-parse"}
    assert sum(v is not None for v in fv.values.values()) == 45


def test_extraction_deterministic(parsed):
    assert extract_all(parsed).values == extract_all(parsed).values


def test_empty_document_rejected():
    with pytest.raises(EmptyDocument):
        extract_all(Document("e", "", ()))


def test_config_changes_flesch():
    doc = segment(TEXT)
    a = extract_all(doc).values["flesch_score"]
    b = extract_all(doc, config=ExtractionConfig(flesch_variant="kandel_moles")).values["flesch_score"]
    assert a != b


def test_csv_round_trip(parsed):
    vectors = [extract_all(parsed, variant="initial"), extract_all(segment(TEXT, "raw"), variant="upgraded")]
    buf = io.StringIO()
    write_csv(vectors, buf)
    back = read_csv(buf.getvalue())
    assert [fv.values for fv in back] == [fv.values for fv in vectors]
    assert [fv.variant for fv in back] == ["initial", "upgraded"]


def test_jsonl_round_trip(parsed):
    vectors = [extract_all(parsed)]
    buf = io.StringIO()
    write_jsonl(vectors, buf)
    back = read_jsonl(buf.getvalue())
    assert back[0].values == vectors[0].values
    assert back[0].null_reasons == vectors[0].null_reasons


def test_mixed_versions_rejected():
    values = dict.fromkeys(FEATURE_NAMES, 0.0)
    with pytest.raises(VersionMismatch):
        check_versions([FeatureVector("a", values), FeatureVector("b", values, version="0.9")])
