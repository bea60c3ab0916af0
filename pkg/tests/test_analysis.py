import csv
import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_mwu
from speechshift.analysis import (
    COMPARISONS, ShiftReport, ShiftResult, analyse, classify, holm_adjust, mann_whitney_u, midranks,
    paired_shifts, render_csv, render_markdown, render_report,
)
from speechshift.errors import ConfigError, InsufficientData
from speechshift.registry import FEATURE_NAMES, SECTIONS, FeatureVector


def test_midranks_ties():
    assert midranks([3, 1, 3, 2]) == [3.5, 1.0, 3.5, 2.0]


def test_fully_separated_groups():
    u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert u == 0.0
    assert p == pytest.approx(0.1, abs=1e-12)


def test_identical_groups():
    a = [1.0, 2.0, 3.0, 4.0]
    u, p = mann_whitney_u(a, a)
    assert u == 8.0 and p == 1.0


def test_constant_pool_gives_one():
    assert mann_whitney_u([2.0] * 12, [2.0] * 12) == (72.0, 1.0)


def test_tie_heavy_matches_oracle():
    a, b = [1, 1, 2, 2], [1, 2, 2, 3]
    u, p = mann_whitney_u(a, b)
    ref_u, ref_p = brute_force_mwu(a, b)
    assert u == ref_u
    assert p == pytest.approx(ref_p, abs=1e-12)


def test_too_few_observations():
    with pytest.raises(InsufficientData):
        mann_whitney_u([1, 2], [3, 4, 5])


small = st.lists(st.integers(0, 5), min_size=3, max_size=6)


@settings(max_examples=60, deadline=None)
@given(small, small)
def test_u_complement(a, b):
    u_ab, p_ab = mann_whitney_u(a, b)
    u_ba, p_ba = mann_whitney_u(b, a)
    assert u_ab + u_ba == len(a) * len(b)
    assert p_ab == pytest.approx(p_ba, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(small, small)
def test_monotone_transform_invariance(a, b):
    f = lambda x: 3 * x ** 3 + 7  # noqa: E731
    assert mann_whitney_u(a, b) == mann_whitney_u([f(x) for x in a], [f(x) for x in b])


def test_normal_approximation_close_to_exact():
    rng = random.Random(5)
    for _ in range(20):
        n, m = rng.randint(9, 12), rng.randint(9, 12)
        pool = rng.sample(range(1000), n + m)
        a, b = pool[:n], [x + rng.choice([0, 150]) for x in pool[n:]]
        _, exact = mann_whitney_u(a, b, exact=True)
        _, approx = mann_whitney_u(a, b, exact=False)
        assert abs(exact - approx) < 0.02


def test_holm_adjust():
    assert holm_adjust([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.06, 0.06])


def _vectors(variant, rows):
    return {i: FeatureVector(i, dict(v), variant=variant) for i, v in rows.items()}


def _base(n=12, seed=0):
    rng = random.Random(seed)
    return {f"s{k:02d}": {name: float(rng.randint(0, 9)) for name in FEATURE_NAMES} for k in range(n)}


def test_identity_nothing_significant():
    rows = _base()
    data = {v: _vectors(v, rows) for v in ("initial", "upgraded", "downgraded")}
    results, skipped = paired_shifts(data)
    assert len(results) == 96 and not skipped
    assert not any(r.significant for r in results)
    assert {r.direction for r in results} == {"flat"}


def _shifted(rows, feature, delta):
    return {i: {**v, feature: v[feature] + delta} for i, v in rows.items()}


def test_gain_two_interrogatives():
    rows = _base()
    data = {
        "initial": _vectors("initial", rows),
        "upgraded": _vectors("upgraded", _shifted(rows, "interrogative", 20)),
        "downgraded": _vectors("downgraded", rows),
    }
    results, _ = paired_shifts(data)
    hit = next(r for r in results if r.feature_name == "interrogative" and r.comparison == COMPARISONS[0])
    assert hit.significant and hit.direction == "up" and hit.mean_paired_diff == 20
    others = [r for r in results if r is not hit]
    assert not any(r.significant for r in others)


def test_nulls_reduce_pairs():
    rows = _base(10)
    for k, i in enumerate(sorted(rows)):
        if k < 4:
            rows[i]["mtld"] = None
    data = {v: _vectors(v, rows) for v in ("initial", "upgraded", "downgraded")}
    results, _ = paired_shifts(data)
    assert {r.n_pairs for r in results if r.feature_name == "mtld"} == {6}
    assert {r.n_pairs for r in results if r.feature_name == "ttr"} == {10}


def test_sparse_feature_skipped():
    rows = _base(5)
    for k, i in enumerate(sorted(rows)):
        if k < 3:
            rows[i]["flesch_score"] = None
    data = {v: _vectors(v, rows) for v in ("initial", "upgraded", "downgraded")}
    results, skipped = paired_shifts(data)
    assert {(s.feature_name, s.comparison) for s in skipped} == {("flesch_score", c) for c in COMPARISONS}
    report = analyse(data)
    assert next(c for c in report.classified if c.feature_name == "flesch_score").cls == "mixed_insignificant"


def test_no_shared_ids():
    rows = _base(4)
    other = {k + "x": v for k, v in rows.items()}
    with pytest.raises(InsufficientData):
        paired_shifts({"initial": _vectors("initial", rows), "upgraded": _vectors("upgraded", other),
                       "downgraded": _vectors("downgraded", rows)})


def _r(name, comparison, significant, direction):
    return ShiftResult(name, comparison, 0.0, 0.01 if significant else 0.5, significant, 0.0, direction, 10)


@pytest.mark.parametrize("up,down,cls", [
    ((True, "up"), (True, "up"), "style_invariant"),
    ((True, "down"), (True, "down"), "style_invariant"),
    ((True, "up"), (True, "down"), "persuasiveness_dependent"),
    ((True, "up"), (False, "flat"), "persuasiveness_dependent"),
    ((False, "up"), (False, "down"), "mixed_insignificant"),
    ((True, "up"), (False, "up"), "mixed_insignificant"),
])
def test_classify(up, down, cls):
    out = classify([_r("ttr", COMPARISONS[0], *up)], [_r("ttr", COMPARISONS[1], *down)])
    assert next(c for c in out if c.feature_name == "ttr").cls == cls


def _report():
    rows = _base(10, seed=3)
    data = {
        "initial": _vectors("initial", rows),
        "upgraded": _vectors("upgraded", _shifted(_shifted(rows, "interrogative", 20), "ttr", 30)),
        "downgraded": _vectors("downgraded", _shifted(_shifted(rows, "interrogative", -20), "ttr", 30)),
    }
    return analyse(data, metadata={"corpus": "synthetic"})


def test_report_classes():
    classes = {c.feature_name: c.cls for c in _report().classified}
    assert classes["interrogative"] == "persuasiveness_dependent"
    assert classes["ttr"] == "style_invariant"
    assert classes["flesch_score"] == "mixed_insignificant"


def test_holm_flag_keeps_raw():
    rows = _base(10, seed=3)
    data = {
        "initial": _vectors("initial", rows),
        "upgraded": _vectors("upgraded", _shifted(rows, "interrogative", 20)),
        "downgraded": _vectors("downgraded", rows),
    }
    plain = {(r.feature_name, r.comparison): r for r in paired_shifts(data)[0]}
    holm = {(r.feature_name, r.comparison): r for r in paired_shifts(data, holm=True)[0]}
    key = ("interrogative", COMPARISONS[0])
    assert holm[key].p_raw == plain[key].p_value
    assert holm[key].p_value >= plain[key].p_value
    assert plain[key].p_raw is None


def test_wilcoxon_option():
    rows = _base(10, seed=3)
    data = {
        "initial": _vectors("initial", rows),
        "upgraded": _vectors("upgraded", _shifted(rows, "interrogative", 20)),
        "downgraded": _vectors("downgraded", rows),
    }
    results, _ = paired_shifts(data, method="wilcoxon")
    assert {r.method for r in results} == {"wilcoxon"}
    hit = next(r for r in results if r.feature_name == "interrogative" and r.comparison == COMPARISONS[0])
    assert hit.significant
    with pytest.raises(ConfigError):
        paired_shifts(data, method="t-test")


def test_markdown_sections_and_styling():
    text = render_markdown(_report())
    for section in SECTIONS:
        assert f"## {section}" in text
    assert "**interrogative↑**" in text and "**interrogative↓**" in text
    assert "| *ttr↑* |" in text
    assert "- corpus: synthetic" in text


def test_csv_has_96_rows():
    rows = list(csv.reader(io.StringIO(render_csv(_report()))))
    assert len(rows) == 97
    assert {r[3] for r in rows[1:]} == set(COMPARISONS)


def test_render_is_byte_stable():
    assert render_report(_report()) == render_report(_report())
    assert render_report(_report(), "csv") == render_report(_report(), "csv")
    with pytest.raises(ConfigError):
        render_report(_report(), "html")


def test_report_json_round_trip():
    report = _report()
    back = ShiftReport.from_json(__import__("json").loads(report.dumps()))
    assert back.dumps() == report.dumps()
    assert render_markdown(back) == render_markdown(report)
