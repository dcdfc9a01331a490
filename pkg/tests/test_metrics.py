import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _helpers import table2_summaries
from tti_audit.corpus import BLSRow, BLSTable, Corpus, ImageRecord, PromptSpec
from tti_audit.errors import ValidationError
from tti_audit.gateway import Annotation
from tti_audit.metrics import (
    assignment_entropy,
    bootstrap_ci,
    contains_profession,
    diversity_score,
    gender_marker_stats,
    profession_mention_rate,
    quintile_bins,
    quintile_report,
    select_region_group,
    select_region_groups,
)


# -- entropy ---------------------------------------------------------------


def test_entropy_extremes_and_dyadic():
    assert assignment_entropy([3] * 50, 12) == 0.0
    for k in (2, 12, 24, 48):
        uniform = list(range(k)) * 4
        assert assignment_entropy(uniform, k) == pytest.approx(math.log2(k), abs=1e-12)
    # distribution (1/2, 1/4, 1/4)
    assert assignment_entropy([0, 0, 1, 2], 3) == pytest.approx(1.5, abs=1e-12)
    assert assignment_entropy([0, 0, 1, 2], 12) == pytest.approx(1.5, abs=1e-12)


def test_entropy_validation():
    with pytest.raises(ValidationError):
        assignment_entropy([], 4)
    with pytest.raises(ValidationError):
        assignment_entropy([4], 4)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(min_value=0, max_value=7), min_size=1, max_size=200),
)
def test_entropy_bounds_property(assignments):
    h = assignment_entropy(assignments, 8)
    assert 0.0 <= h <= math.log2(8) + 1e-12


# -- bootstrap ---------------------------------------------------------------


def test_bootstrap_constant_and_determinism():
    constant = [2] * 40
    ci = bootstrap_ci(constant, lambda a: assignment_entropy(a, 5), level=0.95, B=200, seed=1)
    assert ci == (0.0, 0.0)
    data = [0, 1, 1, 2, 2, 2, 3, 0, 1, 2] * 5
    a = bootstrap_ci(data, lambda x: assignment_entropy(x, 4), level=0.95, B=250, seed=9)
    b = bootstrap_ci(data, lambda x: assignment_entropy(x, 4), level=0.95, B=250, seed=9)
    assert a == b
    c = bootstrap_ci(data, lambda x: assignment_entropy(x, 4), level=0.95, B=250, seed=10)
    assert a != c


def test_bootstrap_validation():
    with pytest.raises(ValidationError):
        bootstrap_ci([1], lambda a: 0.0, level=0.95, B=200, seed=0)
    with pytest.raises(ValidationError):
        bootstrap_ci([1, 2], lambda a: 0.0, level=0.95, B=50, seed=0)
    with pytest.raises(ValidationError):
        bootstrap_ci([1, 2], lambda a: 0.0, level=0.5, B=200, seed=0)


def test_bootstrap_endpoints_inside_resample_range():
    rng = np.random.default_rng(3)
    data = rng.integers(0, 6, size=120)
    stats = []
    for b in range(300):
        r = np.random.default_rng(np.random.SeedSequence((5, b)))
        stats.append(assignment_entropy(data[r.integers(0, 120, 120)], 6))
    low, high = bootstrap_ci(
        data, lambda a: assignment_entropy(a, 6), level=0.99, B=300, seed=5
    )
    assert min(stats) - 1e-12 <= low <= high <= max(stats) + 1e-12


def test_bootstrap_coverage_monte_carlo():
    """95% CI for entropy of multinomial(n=500, known p) covers the true
    value in [0.93, 0.99] of 200 seeded trials."""
    p = np.array([0.6, 0.25, 0.1, 0.05])
    true_h = float(-(p * np.log2(p)).sum())
    rng = np.random.default_rng(2024)
    covered = 0
    for t in range(200):
        counts = rng.multinomial(500, p)
        sample = np.repeat(np.arange(4), counts)
        sample = sample[rng.permutation(500)]
        low, high = bootstrap_ci(
            sample, lambda a: assignment_entropy(a, 4), level=0.95, B=500, seed=t
        )
        covered += int(low <= true_h <= high)
    assert 0.93 <= covered / 200 <= 0.99


def test_bootstrap_width_shrinks_with_n():
    """Average CI width decreases as the sample grows (statistical check)."""
    p = np.array([0.5, 0.3, 0.2])
    widths = []
    for n in (50, 200, 800):
        rng = np.random.default_rng(42)
        trial_widths = []
        for t in range(20):
            sample = rng.choice(3, size=n, p=p)
            low, high = bootstrap_ci(
                sample, lambda a: assignment_entropy(a, 3), level=0.95, B=200, seed=t
            )
            trial_widths.append(high - low)
        widths.append(float(np.mean(trial_widths)))
    assert widths[0] > widths[1] > widths[2]


def test_diversity_score_brackets_estimate():
    score = diversity_score([0, 1, 2, 3] * 30, 4, level=0.99, B=200, seed=3)
    assert score.ci_low <= score.entropy_bits <= score.ci_high
    assert score.entropy_bits == pytest.approx(2.0)
    assert 0.0 <= score.entropy_bits <= math.log2(4)


# -- region groups ------------------------------------------------------------


def test_region_groups_match_published_table():
    summaries = table2_summaries()
    woman = select_region_group(summaries, "woman", "gender", rank_max=2)
    black = select_region_group(summaries, "Black", "ethnicity", rank_max=4)
    assert woman == {15, 13, 1, 10}
    assert black == {22, 1, 3}
    both = select_region_groups(summaries, "woman", "Black")
    assert both == ({15, 13, 1, 10}, {22, 1, 3})


def test_region_group_unknown_and_absent_phrases():
    summaries = table2_summaries()
    with pytest.raises(ValidationError):
        select_region_group(summaries, "purple", "gender", rank_max=2)
    # known phrase that tops no cluster list
    assert select_region_group(summaries, "South Asian", "ethnicity", rank_max=4) == set()


def test_region_group_monotone_in_rank():
    summaries = table2_summaries()
    previous = set()
    for rank in range(1, 5):
        current = select_region_group(summaries, "woman", "gender", rank)
        assert previous <= current
        previous = current


# -- quintiles ----------------------------------------------------------------


def synthetic_bls(n, key="pct_women"):
    rows = []
    for i in range(n):
        rows.append(BLSRow(f"job{i:03d}", (100.0 * i) / max(n, 1) % 100, (50.0 * i) / n % 100))
    return BLSTable(rows)


def test_quintile_sizes_146():
    bls = synthetic_bls(146)
    bins = quintile_bins(bls, "pct_women")
    assert [len(b) for b in bins] == [30, 29, 29, 29, 29]


def test_quintile_singletons():
    bins = quintile_bins(synthetic_bls(5), "pct_women")
    assert [len(b) for b in bins] == [1, 1, 1, 1, 1]


def test_quintile_sorted_ascending():
    bls = BLSTable(
        [
            BLSRow("a", 90.0, 1.0),
            BLSRow("b", 10.0, 2.0),
            BLSRow("c", 50.0, 3.0),
            BLSRow("d", 20.0, 4.0),
            BLSRow("e", 70.0, 5.0),
        ]
    )
    bins = quintile_bins(bls, "pct_women")
    assert [b[0] for b in bins] == ["b", "d", "c", "e", "a"]
    with pytest.raises(ValidationError):
        quintile_bins(bls, "pct_men")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=5, max_value=400))
def test_quintile_partition_property(n):
    bls = synthetic_bls(n)
    bins = quintile_bins(bls, "pct_black")
    flat = [p for b in bins for p in b]
    assert sorted(flat) == sorted(bls.professions)
    sizes = [len(b) for b in bins]
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)


def test_quintile_report_extremes():
    bls = synthetic_bls(10)
    bins = quintile_bins(bls, "pct_women")
    assignments = {
        "sys": {p: [i % 3 for i in range(12)] for p in bls.professions}
    }
    full = quintile_report(assignments, {0, 1, 2}, bins, bls, "pct_women", B=100, seed=0)
    assert all(c.share_pct == pytest.approx(100.0) for c in full.per_system["sys"])
    empty = quintile_report(assignments, set(), bins, bls, "pct_women", B=100, seed=0)
    assert all(c.share_pct == 0.0 for c in empty.per_system["sys"])


def test_quintile_report_constructed_shares():
    """Quintile q pools images with exactly (q+1)*10% inside the group."""
    bls = synthetic_bls(10)
    bins = quintile_bins(bls, "pct_women")
    by_profession = {}
    for q, professions in enumerate(bins):
        in_group = q + 1  # of 10 images per profession
        for p in professions:
            by_profession[p] = [0] * in_group + [1] * (10 - in_group)
    report = quintile_report(
        {"sys": by_profession}, {0}, bins, bls, "pct_women", B=100, seed=1
    )
    shares = [c.share_pct for c in report.per_system["sys"]]
    assert shares == [
        pytest.approx(10.0),
        pytest.approx(20.0),
        pytest.approx(30.0),
        pytest.approx(40.0),
        pytest.approx(50.0),
    ]
    for cell in report.per_system["sys"]:
        assert cell.ci_low <= cell.share_pct <= cell.ci_high


def test_quintile_report_errata():
    bls = synthetic_bls(5)
    bins = quintile_bins(bls, "pct_women")
    assignments = {"sys": {p: [0, 1] for p in bls.professions if p != "job002"}}
    report = quintile_report(assignments, {0}, bins, bls, "pct_women", B=100, seed=0)
    assert report.errata == ["job002"]
    # the empty quintile still renders, with zero support
    cell = report.per_system["sys"][2]
    assert cell.n_images == 0


# -- markers -------------------------------------------------------------------


def annotation_corpus(entries):
    """entries: (image_id, system, caption, profession-or-None)."""
    records, annotations = [], []
    for image_id, system, caption, profession in entries:
        if profession is None:
            prompt = PromptSpec(kind="identity", gender="woman", ethnicity=None)
        else:
            prompt = PromptSpec(kind="profession", profession=profession)
        records.append(
            ImageRecord(
                id=image_id, file=f"{image_id}.png", system=system, prompt=prompt, seed_index=0
            )
        )
        annotations.append(
            Annotation(
                image_id=image_id,
                caption=caption,
                vqa={"appearance": caption.split()[-1]},
                source="file",
            )
        )
    return Corpus(records), annotations


def test_marker_trivial_example():
    corpus, annotations = annotation_corpus(
        [
            ("i0", "s", "a man", None),
            ("i1", "s", "a woman", None),
            ("i2", "s", "a person", None),
        ]
    )
    stats = gender_marker_stats(annotations, corpus, source="caption")
    overall = stats.overall
    assert overall.pct_gender_marked == pytest.approx(200.0 / 3.0)
    assert overall.pct_woman == pytest.approx(50.0)
    assert overall.pct_man == pytest.approx(50.0)
    assert overall.pct_person == pytest.approx(100.0 / 3.0)


def test_policeman_is_not_a_marker():
    corpus, annotations = annotation_corpus([("i0", "s", "a policeman", None)])
    stats = gender_marker_stats(annotations, corpus, source="caption")
    assert stats.overall.pct_gender_marked == 0.0
    assert stats.overall.pct_person == 0.0


TWENTY_CAPTIONS = [
    # (id, system, caption, profession)  -- hand-tallied below
    ("c01", "s1", "a man in a suit", None),
    ("c02", "s1", "a woman wearing scrubs", None),
    ("c03", "s1", "the lady smiled", None),
    ("c04", "s1", "a policeman on duty", "police officer"),
    ("c05", "s1", "two men at a desk", None),
    ("c06", "s1", "a person holding a pen", None),
    ("c07", "s1", "portrait of a gentleman", None),
    ("c08", "s1", "girls playing soccer", None),
    ("c09", "s1", "a male nurse", None),
    ("c10", "s1", "woman and man talking", None),
    ("c11", "s2", "an engineer person", "engineer"),
    ("c12", "s2", "guys fixing a car", None),
    ("c13", "s2", "female pilot in cockpit", "pilot"),
    ("c14", "s2", "the spokesman speaks", None),
    ("c15", "s2", "ladies in the lab", None),
    ("c16", "s2", "man", None),
    ("c17", "s2", "a gentlewoman", None),
    ("c18", "s2", "people waiting in line", None),
    ("c19", "s2", "a girl with a camera", "photographer"),
    ("c20", "s2", "gentlemen shaking hands", None),
]


def test_marker_stats_twenty_caption_hand_tally():
    corpus, annotations = annotation_corpus(TWENTY_CAPTIONS)
    stats = gender_marker_stats(annotations, corpus, source="caption")

    s1 = stats.per_system["s1"]
    # s1 marked: c01 c02 c03 c05 c07 c08 c09 c10 (8 of 10); woman 4, man 4
    assert s1.n_texts == 10
    assert s1.pct_gender_marked == pytest.approx(80.0)
    assert s1.pct_woman == pytest.approx(50.0)
    assert s1.pct_man == pytest.approx(50.0)
    assert s1.pct_person == pytest.approx(10.0)  # c06 only
    assert s1.pct_profession_mention == pytest.approx(0.0)  # c04 misses "police officer"

    s2 = stats.per_system["s2"]
    # s2 marked: c12 c13 c15 c16 c19 c20 (6 of 10); woman 3, man 3
    assert s2.pct_gender_marked == pytest.approx(60.0)
    assert s2.pct_woman == pytest.approx(50.0)
    assert s2.pct_man == pytest.approx(50.0)
    assert s2.pct_person == pytest.approx(20.0)  # c11, c18
    assert s2.pct_profession_mention == pytest.approx(200.0 / 3.0)  # c11, c13 of 3

    overall = stats.overall
    assert overall.pct_gender_marked == pytest.approx(70.0)
    assert overall.pct_woman + overall.pct_man == pytest.approx(100.0)
    assert overall.pct_person == pytest.approx(15.0)
    assert overall.pct_profession_mention == pytest.approx(50.0)


def test_first_marker_attribution():
    corpus, annotations = annotation_corpus(
        [("i0", "s", "man meets woman", None), ("i1", "s", "woman meets man", None)]
    )
    stats = gender_marker_stats(annotations, corpus, source="caption")
    assert stats.overall.pct_woman == pytest.approx(50.0)
    assert stats.overall.pct_man == pytest.approx(50.0)


def test_vqa_appearance_source():
    corpus, annotations = annotation_corpus(
        [("i0", "s", "irrelevant caption woman", None)]
    )
    annotations[0].vqa["appearance"] = "male"
    stats = gender_marker_stats(annotations, corpus, source="vqa_appearance")
    assert stats.overall.pct_man == pytest.approx(100.0)


def test_profession_mention_rate():
    corpus, annotations = annotation_corpus(
        [
            ("i0", "s", "a police officer standing", None),
            ("i1", "s", "the Police Officer waves", None),
            ("i2", "s", "a fire truck", None),
        ]
    )
    assert profession_mention_rate(annotations, "police officer") == pytest.approx(
        200.0 / 3.0
    )
    assert profession_mention_rate(annotations, "firefighter") == 0.0
    assert contains_profession("a police officer!", "police officer")
    assert not contains_profession("policeman officer", "police officer")
    mixed, anns = annotation_corpus(
        [
            ("j0", "s", "portrait of a laboratory technician at work", None),
            ("j1", "s", "a technician in a laboratory", None),
        ]
    )
    # contiguous token-run rule: reversed word order does not count
    assert profession_mention_rate(anns, "laboratory technician") == pytest.approx(50.0)
