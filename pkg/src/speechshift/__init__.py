"""Interpretable textual features of French speech transcripts and their shifts
under persuasiveness rewrites."""

from .analysis import ShiftReport, ShiftResult, analyse, classify, mann_whitney_u, paired_shifts, render_report
from .corpus import CorpusSample, balance, harmonic_mean, load_corpus, select_balanced
from .lexicon import Lexicon, default_lexicon, load_lexicon, merge_lexicons
from .registry import FEATURE_GROUPS, FEATURE_NAMES, FeatureVector, extract_all
from .text_model import Document, align_parses, ingest_conllu, segment

__version__ = "0.1.0"

__all__ = [
    "CorpusSample", "Document", "FEATURE_GROUPS", "FEATURE_NAMES", "FeatureVector", "Lexicon",
    "ShiftReport", "ShiftResult", "align_parses", "analyse", "balance", "classify", "default_lexicon",
    "extract_all", "harmonic_mean", "ingest_conllu", "load_corpus", "load_lexicon", "mann_whitney_u",
    "merge_lexicons", "paired_shifts", "render_report", "segment", "select_balanced",
]
