"""The canonical 48-feature vector: names, groups, extraction, serialisation."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from . import discourse, lexical, psyrhet, syntactic
from .errors import EmptyDocument, FormatError, VersionMismatch
from .lexicon import Lexicon, default_lexicon
from .text_model import Document

FEATURE_SET_VERSION = "1.0"

FEATURE_GROUPS: dict[str, tuple[str, ...]] = {
    "overlap": (
        "local_noun_overlap", "local_content_overlap", "global_noun_overlap",
        "global_content_overlap", "alliteration", "anaphora", "antimetabole", "epanalepsis",
    ),
    "transitions": (
        "transitions_number", "trans_similarity", "transition_types_count",
        "transitions_per_sentence", "expletives_count", "polysyndeton_count", "asyndeton_count",
    ),
    "storytelling": ("narrative_words", "comparison_count"),
    "readability": ("flesch_score",),
    "lex_diversity": ("ttr", "mtld"),
    "syn_diversity": ("syntactic_diversity_mean",),
    "negation": ("negation_count",),
    "syn_structures": syntactic.STRUCTURES,
    "Aff_LIWC": psyrhet.AFFECTIVE,
    "Cog_LIWC": psyrhet.COGNITIVE,
    "Prc_LIWC": psyrhet.PERCEPTIVE,
}

SECTIONS: dict[str, tuple[str, ...]] = {
    "Discourse": ("overlap", "transitions", "storytelling", "readability"),
    "Lexical": ("lex_diversity",),
    "Syntactic": ("negation", "syn_diversity", "syn_structures"),
    "Psycholinguistic and Rhetorical": ("Aff_LIWC", "Cog_LIWC", "Prc_LIWC"),
}

FEATURE_NAMES: tuple[str, ...] = tuple(n for names in FEATURE_GROUPS.values() for n in names)
GROUP_OF: dict[str, str] = {n: g for g, names in FEATURE_GROUPS.items() for n in names}
PARSE_DEPENDENT = ("local_noun_overlap", "global_noun_overlap", "syntactic_diversity_mean")

Value = float | int | None


@dataclass(frozen=True)
class ExtractionConfig:
    flesch_variant: str = "english"
    mtld_threshold: float = lexical.MTLD_THRESHOLD
    wl_iterations: int = 3
    wl_label: str = "deprel"
    wl_aggregate: str = "nearest"


@dataclass
class FeatureVector:
    document_id: str
    values: dict[str, Value]
    null_reasons: dict[str, str] = field(default_factory=dict)
    variant: str | None = None
    notes: dict[str, str] = field(default_factory=dict)
    version: str = FEATURE_SET_VERSION

    @property
    def group(self) -> dict[str, str]:
        return {n: GROUP_OF[n] for n in self.values}

    @property
    def nulls(self) -> list[str]:
        return [n for n, v in self.values.items() if v is None]

    def to_json(self) -> dict:
        return {
            "document_id": self.document_id,
            "variant": self.variant,
            "feature_set_version": self.version,
            "values": self.values,
            "null_reasons": self.null_reasons,
            "notes": self.notes,
        }


def extract_all(doc: Document, lexicon: Lexicon | None = None,
                config: ExtractionConfig | None = None, variant: str | None = None) -> FeatureVector:
    lex = lexicon or default_lexicon()
    cfg = config or ExtractionConfig()
    if not doc.words:
        raise EmptyDocument(f"document {doc.id!r} has no words")
    values: dict[str, Value] = {}
    values.update(discourse.discourse_features(doc, lex, cfg.flesch_variant).as_dict())
    values.update(lexical.lexical_features(doc, cfg.mtld_threshold).as_dict())
    values.update(
        syntactic.syntactic_features(doc, lex, cfg.wl_iterations, cfg.wl_label, cfg.wl_aggregate).as_dict()
    )
    values.update(psyrhet.liwc_profile(doc, lex))

    reasons = {}
    for name in PARSE_DEPENDENT:
        if values[name] is None:
            reasons[name] = "no-parse" if not doc.parsed_sentences else "too-few-parses"
    notes = {}
    if len(doc.words) < lexical.MTLD_MIN_TOKENS:
        notes["mtld"] = "low-confidence"
    if doc.unparsed:
        notes["unparsed_sentences"] = ",".join(map(str, doc.unparsed))
    ordered = {name: values[name] for name in FEATURE_NAMES}
    return FeatureVector(doc.id, ordered, reasons, variant, notes)


# --------------------------------------------------------------------------
# serialisation

_META_COLUMNS = ("document_id", "variant", "feature_set_version", "parser")


def _fmt(v: Value) -> str:
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else str(v)


def write_csv(vectors: Iterable[FeatureVector], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(_META_COLUMNS + FEATURE_NAMES)
    for fv in vectors:
        writer.writerow(
            [fv.document_id, fv.variant or "", fv.version, fv.notes.get("parser", "")]
            + [_fmt(fv.values[n]) for n in FEATURE_NAMES]
        )


def _parse_value(cell: str) -> Value:
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        return float(cell)


def read_csv(stream: IO[str] | str) -> list[FeatureVector]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    missing = [n for n in ("document_id",) + FEATURE_NAMES if n not in header]
    if missing:
        raise FormatError(f"features file lacks columns: {', '.join(missing[:5])}", 1)
    out = []
    for row in reader:
        try:
            values = {n: _parse_value(row[n]) for n in FEATURE_NAMES}
        except (ValueError, TypeError) as exc:
            raise FormatError(f"bad feature value ({exc})", reader.line_num) from None
        version = row.get("feature_set_version") or FEATURE_SET_VERSION
        reasons = {n: "null" for n, v in values.items() if v is None}
        notes = {"parser": row["parser"]} if row.get("parser") else {}
        out.append(FeatureVector(row["document_id"], values, reasons, row.get("variant") or None, notes, version))
    return out


def write_jsonl(vectors: Iterable[FeatureVector], stream: IO[str]) -> None:
    for fv in vectors:
        stream.write(json.dumps(fv.to_json(), ensure_ascii=False, sort_keys=False) + "\n")


def read_jsonl(stream: IO[str] | str) -> list[FeatureVector]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            values = {n: obj["values"][n] for n in FEATURE_NAMES}
            out.append(
                FeatureVector(
                    obj["document_id"], values, obj.get("null_reasons", {}), obj.get("variant"),
                    obj.get("notes", {}), obj.get("feature_set_version", FEATURE_SET_VERSION),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"bad feature record ({exc})", lineno) from None
    return out


def check_versions(vectors: Iterable[FeatureVector]) -> str:
    versions = {fv.version for fv in vectors}
    if len(versions) > 1:
        raise VersionMismatch(f"mixed feature-set versions: {sorted(versions)}")
    return versions.pop() if versions else FEATURE_SET_VERSION


def as_mapping(vectors: Iterable[FeatureVector]) -> Mapping[str, FeatureVector]:
    out: dict[str, FeatureVector] = {}
    for fv in vectors:
        if fv.document_id in out:
            raise FormatError(f"duplicate document id {fv.document_id!r}")
        out[fv.document_id] = fv
    return out
