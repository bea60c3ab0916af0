"""Distribution-shift statistics between initial and rewritten variants.

Each feature is tested with a two-sided Mann-Whitney U test on the initial
values versus the rewritten values; the mean paired difference gives the
direction.  Features are then classified by comparing the upgrade and
downgrade shifts.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InsufficientData
from .registry import FEATURE_GROUPS, FEATURE_NAMES, GROUP_OF, SECTIONS, FeatureVector, check_versions

ALPHA = 0.05
MIN_OBS = 3
EXACT_BELOW = 9  # exact distribution when the smaller group has fewer observations
FLAT_EPS = 1e-12
COMPARISONS = ("initial_vs_upgraded", "initial_vs_downgraded")
VARIANT_OF = {"initial_vs_upgraded": "upgraded", "initial_vs_downgraded": "downgraded"}
METHODS = ("mann-whitney", "wilcoxon")
CLASSES = ("style_invariant", "persuasiveness_dependent", "mixed_insignificant")
ARROWS = {"up": "↑", "down": "↓", "flat": "="}


# --------------------------------------------------------------------------
# Mann-Whitney U


def midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _exact_p(doubled: Sequence[int], n: int, u2_obs: int, nm: int) -> float:
    """P(|U - nm/2| >= |U_obs - nm/2|) over all size-n subsets of the pooled ranks.

    Works on doubled ranks so that midranks stay integral;
    ``u2_obs`` is twice the observed U.
    """
    total = sum(doubled)
    dp = np.zeros((n + 1, total + 1))
    dp[0, 0] = 1.0
    for r in doubled:
        dp[1:, r:] += dp[:-1, : total + 1 - r].copy()
    counts = dp[n]
    sums = np.nonzero(counts)[0]
    u2 = sums - n * (n + 1)
    extreme = np.abs(u2 - nm) >= abs(u2_obs - nm)
    return float(min(1.0, counts[sums[extreme]].sum() / counts[sums].sum()))


def _normal_p(u: float, n: int, m: int, ties: Iterable[int]) -> float:
    big_n = n + m
    tie_term = sum(t ** 3 - t for t in ties) / (big_n * (big_n - 1))
    var = n * m / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0:
        return 1.0
    z = max(0.0, abs(u - n * m / 2.0) - 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(a: Sequence[float], b: Sequence[float], exact: bool | None = None) -> tuple[float, float]:
    """U statistic of ``a`` and its two-sided p-value.

    ``exact=None`` picks the exact distribution when either group has fewer
    than nine observations, the tie-corrected normal approximation otherwise.
    """
    n, m = len(a), len(b)
    if n < MIN_OBS or m < MIN_OBS:
        raise InsufficientData(f"need at least {MIN_OBS} observations per group, got {n} and {m}")
    pooled = list(a) + list(b)
    ranks = midranks(pooled)
    r_a = sum(ranks[:n])
    u = r_a - n * (n + 1) / 2.0
    if exact is None:
        exact = min(n, m) < EXACT_BELOW
    if exact:
        doubled = [int(round(2 * r)) for r in ranks]
        p = _exact_p(doubled, n, int(round(2 * u)), n * m)
    else:
        p = _normal_p(u, n, m, Counter(pooled).values())
    return u, p


def wilcoxon_signed_rank(diffs: Sequence[float]) -> float:
    """Two-sided signed-rank p-value (paired alternative; not the default test)."""
    from scipy.stats import wilcoxon

    if all(abs(d) < FLAT_EPS for d in diffs):
        return 1.0
    return float(wilcoxon(diffs, zero_method="wilcox").pvalue)


# --------------------------------------------------------------------------
# shifts


@dataclass
class ShiftResult:
    feature_name: str
    comparison: str
    u_statistic: float
    p_value: float
    significant: bool
    mean_paired_diff: float
    direction: str
    n_pairs: int
    method: str = "mann-whitney"
    p_raw: float | None = None  # before Holm adjustment, when applied

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Skipped:
    feature_name: str
    comparison: str
    reason: str


@dataclass(frozen=True)
class ClassifiedFeature:
    feature_name: str
    cls: str

    def to_json(self) -> dict:
        return {"feature_name": self.feature_name, "class": self.cls}


def direction_of(diff: float) -> str:
    if abs(diff) < FLAT_EPS:
        return "flat"
    return "up" if diff > 0 else "down"


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    order = sorted(range(len(pvalues)), key=lambda i: pvalues[i])
    out = [0.0] * len(pvalues)
    running = 0.0
    k = len(pvalues)
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (k - rank) * pvalues[i]))
        out[i] = running
    return out


def _aligned(initial: Mapping[str, FeatureVector], other: Mapping[str, FeatureVector]) -> list[str]:
    return sorted(set(initial) & set(other))


def paired_shifts(features_by_variant: Mapping[str, Mapping[str, FeatureVector]],
                  alpha: float = ALPHA, method: str = "mann-whitney",
                  holm: bool = False) -> tuple[list[ShiftResult], list[Skipped]]:
    """Shift statistics for every feature in both comparisons.

    ``features_by_variant`` maps variant name to {sample id: FeatureVector}.
    Features with too few non-null pairs are returned in the skipped list.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown test method {method!r}")
    check_versions(fv for vectors in features_by_variant.values() for fv in vectors.values())
    initial = features_by_variant.get("initial", {})
    results: list[ShiftResult] = []
    skipped: list[Skipped] = []
    for comparison in COMPARISONS:
        other = features_by_variant.get(VARIANT_OF[comparison], {})
        ids = _aligned(initial, other)
        if not ids:
            raise InsufficientData(f"{comparison}: no sample ids shared by both variants")
        batch: list[ShiftResult] = []
        for name in FEATURE_NAMES:
            pairs = [
                (initial[i].values[name], other[i].values[name])
                for i in ids
                if initial[i].values[name] is not None and other[i].values[name] is not None
            ]
            base = [float(x) for x, _ in pairs]
            new = [float(y) for _, y in pairs]
            try:
                u, p = mann_whitney_u(base, new)
            except InsufficientData as exc:
                skipped.append(Skipped(name, comparison, str(exc)))
                continue
            diffs = [y - x for x, y in zip(base, new)]
            if method == "wilcoxon":
                p = wilcoxon_signed_rank(diffs)
            diff = sum(diffs) / len(diffs)
            batch.append(
                ShiftResult(name, comparison, u, p, p <= alpha, diff, direction_of(diff), len(pairs), method)
            )
        if holm and batch:
            adjusted = holm_adjust([r.p_value for r in batch])
            for r, q in zip(batch, adjusted):
                r.p_raw, r.p_value, r.significant = r.p_value, q, q <= alpha
        results.extend(batch)
    return results, skipped


def classify(up_results: Iterable[ShiftResult], down_results: Iterable[ShiftResult]) -> list[ClassifiedFeature]:
    """Compare each feature's upgrade and downgrade shifts.

    Same significant direction in both: style_invariant.  A significant
    shift whose counterpart goes the other way or stays flat:
    persuasiveness_dependent.  Anything else, including features skipped in
    either comparison: mixed_insignificant.
    """
    ups = {r.feature_name: r for r in up_results}
    downs = {r.feature_name: r for r in down_results}
    out = []
    for name in FEATURE_NAMES:
        u, d = ups.get(name), downs.get(name)
        cls = "mixed_insignificant"
        if u is not None and d is not None:
            if u.significant and d.significant and u.direction == d.direction and u.direction != "flat":
                cls = "style_invariant"
            elif (u.significant and u.direction != "flat") or (d.significant and d.direction != "flat"):
                if u.direction != d.direction:
                    cls = "persuasiveness_dependent"
        out.append(ClassifiedFeature(name, cls))
    return out


# --------------------------------------------------------------------------
# persistence


@dataclass
class ShiftReport:
    shifts: list[ShiftResult]
    skipped: list[Skipped] = field(default_factory=list)
    classified: list[ClassifiedFeature] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "metadata": self.metadata,
            "shifts": [s.to_json() for s in self.shifts],
            "skipped": [asdict(s) for s in self.skipped],
            "classified": [c.to_json() for c in self.classified],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ShiftReport":
        return cls(
            [ShiftResult(**s) for s in obj["shifts"]],
            [Skipped(**s) for s in obj.get("skipped", [])],
            [ClassifiedFeature(c["feature_name"], c["class"]) for c in obj.get("classified", [])],
            dict(obj.get("metadata", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def analyse(features_by_variant: Mapping[str, Mapping[str, FeatureVector]], alpha: float = ALPHA,
            method: str = "mann-whitney", holm: bool = False, metadata: Mapping | None = None) -> ShiftReport:
    shifts, skipped = paired_shifts(features_by_variant, alpha, method, holm)
    classified = classify(
        [s for s in shifts if s.comparison == COMPARISONS[0]],
        [s for s in shifts if s.comparison == COMPARISONS[1]],
    )
    meta = dict(metadata or {})
    meta.setdefault("alpha", alpha)
    meta.setdefault("test", method)
    meta.setdefault("holm", holm)
    return ShiftReport(shifts, skipped, classified, meta)


# --------------------------------------------------------------------------
# rendering


def _num(x: float) -> str:
    return f"{x:.4g}"


def _section_of(group: str) -> str:
    return next(s for s, groups in SECTIONS.items() if group in groups)


def _cell(names: Sequence[str], shifts: Mapping[tuple[str, str], ShiftResult],
          classes: Mapping[str, str], comparison: str) -> str:
    parts = []
    for name in names:
        r = shifts.get((name, comparison))
        if r is None or not r.significant:
            continue
        label = f"{name}{ARROWS[r.direction]}"
        cls = classes.get(name)
        if cls == "style_invariant":
            label = f"*{label}*"
        elif cls == "persuasiveness_dependent":
            label = f"**{label}**"
        parts.append(label)
    return " ".join(parts) or "–"


def render_markdown(report: ShiftReport) -> str:
    shifts = {(s.feature_name, s.comparison): s for s in report.shifts}
    classes = {c.feature_name: c.cls for c in report.classified}
    lines = ["# Feature shifts between initial and rewritten transcripts", ""]
    for key in sorted(report.metadata):
        value = report.metadata[key]
        if isinstance(value, (dict, list)):
            value = json.dumps(value, ensure_ascii=False, sort_keys=True)
        lines.append(f"- {key}: {value}")
    lines += [
        "",
        "Significant shifts only. *Italic*: same direction in both rewrites; "
        "**bold**: direction depends on the rewrite.",
        "",
    ]
    for section, groups in SECTIONS.items():
        lines += [f"## {section}", "", "| Group | Upgraded | Downgraded |", "|---|---|---|"]
        for group in groups:
            names = FEATURE_GROUPS[group]
            up = _cell(names, shifts, classes, COMPARISONS[0])
            down = _cell(names, shifts, classes, COMPARISONS[1])
            lines.append(f"| {group} | {up} | {down} |")
        lines.append("")
    lines += [
        "## Details",
        "",
        "| Feature | Group | Class | Comparison | U | p | Mean diff | Direction | Pairs |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for name in FEATURE_NAMES:
        for comparison in COMPARISONS:
            r = shifts.get((name, comparison))
            if r is None:
                lines.append(f"| {name} | {GROUP_OF[name]} | {classes.get(name, '')} | {comparison} | – | – | – | skipped | 0 |")
                continue
            lines.append(
                f"| {name} | {GROUP_OF[name]} | {classes.get(name, '')} | {comparison} | {_num(r.u_statistic)} | "
                f"{_num(r.p_value)} | {_num(r.mean_paired_diff)} | {r.direction} {ARROWS[r.direction]} | {r.n_pairs} |"
            )
    if report.skipped:
        lines += ["", "## Skipped", ""]
        lines += [f"- {s.feature_name} ({s.comparison}): {s.reason}" for s in report.skipped]
    return "\n".join(lines) + "\n"


CSV_COLUMNS = (
    "section", "group", "feature", "comparison", "class", "u_statistic", "p_value",
    "significant", "mean_paired_diff", "direction", "n_pairs", "status",
)


def render_csv(report: ShiftReport) -> str:
    shifts = {(s.feature_name, s.comparison): s for s in report.shifts}
    classes = {c.feature_name: c.cls for c in report.classified}
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for name in FEATURE_NAMES:
        group = GROUP_OF[name]
        for comparison in COMPARISONS:
            r = shifts.get((name, comparison))
            head = [_section_of(group), group, name, comparison, classes.get(name, "")]
            if r is None:
                writer.writerow(head + ["", "", "", "", "", 0, "skipped"])
            else:
                writer.writerow(head + [
                    repr(r.u_statistic), repr(r.p_value), str(r.significant).lower(),
                    repr(r.mean_paired_diff), r.direction, r.n_pairs, "ok",
                ])
    return buf.getvalue()


def render_report(report: ShiftReport, fmt: str = "markdown") -> str:
    if fmt in {"markdown", "md"}:
        return render_markdown(report)
    if fmt == "csv":
        return render_csv(report)
    raise ConfigError(f"unknown report format {fmt!r}")
