"""Transcript corpus: JSON-Lines I/O, score aggregation and balanced subsets."""

from __future__ import annotations

import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

from .errors import EmptyCorpus, FormatError, ScoreError

VARIANTS = ("initial", "upgraded", "downgraded")
REQUIRED_FIELDS = ("id", "variant", "text")


def harmonic_mean(scores: Sequence[float]) -> float:
    if not scores:
        raise ScoreError("harmonic mean of no scores")
    if any(s <= 0 for s in scores):
        raise ScoreError(f"scores must be positive: {list(scores)}")
    return len(scores) / sum(1.0 / s for s in scores)


@dataclass
class CorpusSample:
    id: str
    variant: str
    text: str
    rater_scores: list[float] = field(default_factory=list)
    prize_flag: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def aggregated_score(self) -> float | None:
        return harmonic_mean(self.rater_scores) if self.rater_scores else None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "variant": self.variant,
            "text": self.text,
            "rater_scores": self.rater_scores,
            "prize_flag": self.prize_flag,
            "meta": self.meta,
        }


@dataclass
class BalancedSubset:
    selected_ids: list[str]
    mean_count: int
    seed: int
    per_score_buckets: dict[float, int]
    granularity: float = 0.5

    def to_json(self) -> dict:
        return {
            "selected_ids": self.selected_ids,
            "mean_count": self.mean_count,
            "seed": self.seed,
            "granularity": self.granularity,
            "per_score_buckets": {str(k): v for k, v in sorted(self.per_score_buckets.items())},
        }


# --------------------------------------------------------------------------
# I/O


def _sample_from(obj: object, lineno: int, path: str | None) -> CorpusSample:
    if not isinstance(obj, dict):
        raise FormatError("record is not a JSON object", lineno, path)
    for key in REQUIRED_FIELDS:
        if key not in obj:
            raise FormatError(f"missing field {key!r}", lineno, path)
    if obj["variant"] not in VARIANTS:
        raise FormatError(f"variant must be one of {VARIANTS}, got {obj['variant']!r}", lineno, path)
    if not isinstance(obj["text"], str):
        raise FormatError("text must be a string", lineno, path)
    scores = obj.get("rater_scores") or []
    if not isinstance(scores, list) or not all(isinstance(s, (int, float)) and not isinstance(s, bool) for s in scores):
        raise FormatError("rater_scores must be a list of numbers", lineno, path)
    if any(not 1 <= s <= 5 for s in scores):
        raise FormatError(f"rater scores outside the 1-5 scale: {scores}", lineno, path)
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict):
        raise FormatError("meta must be an object", lineno, path)
    return CorpusSample(
        id=str(obj["id"]),
        variant=obj["variant"],
        text=obj["text"],
        rater_scores=list(scores),
        prize_flag=bool(obj.get("prize_flag", False)),
        meta=meta,
    )


def read_corpus(stream: IO[str], path: str | None = None) -> list[CorpusSample]:
    samples = []
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", lineno, path) from None
        sample = _sample_from(obj, lineno, path)
        key = (sample.id, sample.variant)
        if key in seen:
            raise FormatError(f"duplicate {sample.variant} sample for id {sample.id!r}", lineno, path)
        seen.add(key)
        samples.append(sample)
    return samples


def load_corpus(path: str | Path) -> list[CorpusSample]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return read_corpus(fh, str(path))


def write_corpus(samples: Iterable[CorpusSample], stream: IO[str]) -> None:
    for s in samples:
        stream.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def store_corpus(samples: Iterable[CorpusSample], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        write_corpus(samples, fh)


def by_variant(samples: Iterable[CorpusSample]) -> dict[str, dict[str, CorpusSample]]:
    out: dict[str, dict[str, CorpusSample]] = {v: {} for v in VARIANTS}
    for s in samples:
        out[s.variant][s.id] = s
    return out


# --------------------------------------------------------------------------
# selection


def is_eligible(sample: CorpusSample) -> bool:
    scores = sample.rater_scores
    low = any(s <= 2 for s in scores)
    two_fives = sum(1 for s in scores if s == 5) >= 2
    return low or two_fives or sample.prize_flag


def eligibility_filter(samples: Iterable[CorpusSample]) -> list[CorpusSample]:
    """Keep samples with a score of 1-2, two scores of 5, or a prize."""
    return [s for s in samples if is_eligible(s)]


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def score_bucket(score: float, granularity: float = 0.5) -> float:
    return _round_half_up(score / granularity) * granularity


def balance(samples: Sequence[CorpusSample], seed: int, granularity: float = 0.5) -> BalancedSubset:
    """Stratified draw of at most ``mean_count`` samples per score bucket."""
    if not samples:
        raise EmptyCorpus("nothing to balance")
    buckets: dict[float, list[str]] = defaultdict(list)
    for s in samples:
        score = s.aggregated_score
        if score is None:
            raise ScoreError(f"sample {s.id!r} has no rater scores")
        buckets[score_bucket(score, granularity)].append(s.id)
    mean_count = max(1, _round_half_up(len(samples) / len(buckets)))
    rng = random.Random(seed)
    selected: list[str] = []
    counts: dict[float, int] = {}
    for key in sorted(buckets):
        ids = sorted(buckets[key])
        take = min(len(ids), mean_count)
        chosen = sorted(rng.sample(ids, take))
        selected.extend(chosen)
        counts[key] = take
    return BalancedSubset(selected, mean_count, seed, counts, granularity)


def select_balanced(samples: Iterable[CorpusSample], seed: int, granularity: float = 0.5) -> tuple[list[CorpusSample], BalancedSubset]:
    """Eligibility filter then balance, over the ``initial`` variants only."""
    initial = [s for s in samples if s.variant == "initial"]
    eligible = eligibility_filter(initial)
    subset = balance(eligible, seed, granularity)
    by_id = {s.id: s for s in initial}
    return [by_id[i] for i in subset.selected_ids], subset
