"""Quantitative bias measures: assignment-entropy diversity with bootstrap
confidence intervals, region-group selection, quintile comparison against
labor statistics, and caption/VQA gender-marker statistics.

All operations are pure; bootstrap resamples draw their RNG from
per-resample seeds derived from the master seed via a counter, so results
do not depend on scheduling.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import vocab
from .clusters import RegionSummary
from .corpus import BLSTable, Corpus
from .errors import ValidationError
from .gateway import Annotation

DEFAULT_BOOTSTRAP_B = 1000
ALLOWED_LEVELS = (0.95, 0.99)
MARKER_SOURCES = ("caption", "vqa_appearance")


def assignment_entropy(assignments, n_clusters: int) -> float:
    """Shannon entropy (bits) of the empirical cluster distribution."""
    arr = np.asarray(list(assignments), dtype=np.int64)
    if arr.size == 0:
        raise ValidationError("assignment list must be non-empty")
    if arr.min() < 0 or arr.max() >= n_clusters:
        raise ValidationError("cluster id outside [0, n_clusters)")
    counts = np.bincount(arr, minlength=n_clusters)
    p = counts[counts > 0] / arr.size
    return float(-(p * np.log2(p)).sum())


def bootstrap_ci(
    assignments,
    statistic,
    level: float = 0.95,
    B: int = DEFAULT_BOOTSTRAP_B,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for `statistic` of the assignment list."""
    arr = np.asarray(list(assignments))
    if arr.size <= 1:
        raise ValidationError("bootstrap needs at least two observations")
    if B < 100:
        raise ValidationError("bootstrap needs B >= 100 resamples")
    if level not in ALLOWED_LEVELS:
        raise ValidationError(f"level must be one of {ALLOWED_LEVELS}")
    stats = np.empty(B)
    n = arr.size
    for b in range(B):
        rng = np.random.default_rng(np.random.SeedSequence((seed, b)))
        stats[b] = statistic(arr[rng.integers(0, n, size=n)])
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(low), float(high)


@dataclass(frozen=True)
class DiversityScore:
    entropy_bits: float
    ci_low: float
    ci_high: float
    n: int
    level: float
    bootstrap_B: int
    seed: int

    def __post_init__(self):
        if not self.ci_low <= self.entropy_bits <= self.ci_high:
            raise ValidationError("diversity CI must bracket the point estimate")


def diversity_score(
    assignments,
    n_clusters: int,
    level: float = 0.99,
    B: int = DEFAULT_BOOTSTRAP_B,
    seed: int = 0,
) -> DiversityScore:
    arr = list(assignments)
    entropy = assignment_entropy(arr, n_clusters)
    low, high = bootstrap_ci(
        arr, lambda a: assignment_entropy(a, n_clusters), level=level, B=B, seed=seed
    )
    # the point estimate is the full-sample statistic; resampling can sit
    # entirely below it for near-degenerate inputs, so widen to bracket it
    low, high = min(low, entropy), max(high, entropy)
    return DiversityScore(
        entropy_bits=entropy,
        ci_low=low,
        ci_high=high,
        n=len(arr),
        level=level,
        bootstrap_B=B,
        seed=seed,
    )


# -- region-group selection ----------------------------------------------------


def select_region_group(
    summaries: list[RegionSummary],
    phrase: str,
    attribute: str,
    rank_max: int,
) -> set[int]:
    """Clusters whose top-`rank_max` phrases (for the attribute) include
    `phrase`."""
    if attribute == "gender":
        known = vocab.GENDER_QUERY_PHRASES
        ranked_of = lambda s: s.top_gender
    elif attribute == "ethnicity":
        known = vocab.ETHNICITY_QUERY_PHRASES
        ranked_of = lambda s: s.top_ethnicity
    else:
        raise ValidationError(f"unknown attribute {attribute!r}")
    if phrase not in known:
        raise ValidationError(f"unknown {attribute} phrase {phrase!r}")
    if rank_max < 1:
        raise ValidationError("rank_max must be >= 1")
    selected = set()
    for summary in summaries:
        top = [p for p, _ in ranked_of(summary)[:rank_max]]
        if phrase in top:
            selected.add(summary.cluster)
    return selected


def select_region_groups(
    summaries: list[RegionSummary],
    gender_phrase: str,
    ethnicity_phrase: str,
    gender_rank_max: int = 2,
    ethnicity_rank_max: int = 4,
) -> tuple[set[int], set[int]]:
    """The two independent analysis groups (gender, ethnicity)."""
    return (
        select_region_group(summaries, gender_phrase, "gender", gender_rank_max),
        select_region_group(summaries, ethnicity_phrase, "ethnicity", ethnicity_rank_max),
    )


# -- quintile aggregation against labor statistics ------------------------------


def quintile_bins(bls: BLSTable, key: str) -> list[list[str]]:
    """Professions sorted ascending by the key and split into 5 bins; the
    remainder goes to the lowest bins (146 -> 30,29,29,29,29)."""
    if key not in ("pct_women", "pct_black"):
        raise ValidationError(f"unknown ranking key {key!r}")
    if len(bls) < 5:
        raise ValidationError("need at least 5 professions for quintiles")
    ranked = sorted(bls.rows, key=lambda row: (getattr(row, key), row.profession))
    n = len(ranked)
    base, remainder = divmod(n, 5)
    sizes = [base + 1 if i < remainder else base for i in range(5)]
    bins = []
    start = 0
    for size in sizes:
        bins.append([row.profession for row in ranked[start : start + size]])
        start += size
    return bins


def bin_means(bls: BLSTable, bins: list[list[str]], key: str) -> list[float]:
    return [
        float(np.mean([bls.value(p, key) for p in professions]))
        for professions in bins
    ]


@dataclass(frozen=True)
class QuintileCell:
    share_pct: float
    ci_low: float
    ci_high: float
    n_images: int


@dataclass
class QuintileReport:
    ranking_key: str
    region_group: list[int]
    bins: list[list[str]]
    bls_means: list[float]
    per_system: dict[str, list[QuintileCell]]
    errata: list[str] = field(default_factory=list)
    level: float = 0.95
    bootstrap_B: int = DEFAULT_BOOTSTRAP_B
    seed: int = 0


def quintile_report(
    assignments_by_system: dict[str, dict[str, list[int]]],
    region_group: set[int],
    bins: list[list[str]],
    bls: BLSTable,
    key: str,
    level: float = 0.95,
    B: int = DEFAULT_BOOTSTRAP_B,
    seed: int = 0,
) -> QuintileReport:
    """Pool each quintile's per-image assignments and compare the share
    landing in the region group against the quintile's BLS mean.

    Professions without assignments are listed in the errata and excluded
    from the pool rather than failing the whole report.
    """
    group = frozenset(region_group)
    missing = sorted(
        {
            profession
            for professions in bins
            for profession in professions
            if not any(
                assignments_by_system.get(system, {}).get(profession)
                for system in assignments_by_system
            )
        }
    )
    per_system: dict[str, list[QuintileCell]] = {}
    for system in sorted(assignments_by_system):
        by_profession = assignments_by_system[system]
        cells = []
        for q, professions in enumerate(bins):
            pooled: list[int] = []
            for profession in professions:
                pooled.extend(by_profession.get(profession, []))
            if not pooled:
                cells.append(QuintileCell(0.0, 0.0, 0.0, 0))
                continue
            in_group = np.array([1.0 if a in group else 0.0 for a in pooled])
            share = float(100.0 * in_group.mean())
            if len(pooled) > 1:
                low, high = bootstrap_ci(
                    in_group,
                    lambda a: float(100.0 * np.mean(a)),
                    level=level,
                    B=B,
                    seed=seed + q,
                )
            else:
                low = high = share
            cells.append(QuintileCell(share, low, high, len(pooled)))
        per_system[system] = cells
    return QuintileReport(
        ranking_key=key,
        region_group=sorted(group),
        bins=bins,
        bls_means=bin_means(bls, bins, key),
        per_system=per_system,
        errata=missing,
        level=level,
        bootstrap_B=B,
        seed=seed,
    )


# -- caption / VQA gender markers ------------------------------------------------

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


def _first_marker(tokens: list[str]) -> str | None:
    """'woman' / 'man' by first marker occurrence, None when unmarked."""
    for token in tokens:
        if token in vocab.WOMAN_MARKERS:
            return "woman"
        if token in vocab.MAN_MARKERS:
            return "man"
    return None


@dataclass(frozen=True)
class SystemMarkerStats:
    n_texts: int
    pct_gender_marked: float
    pct_woman: float  # among gender-marked texts
    pct_man: float
    pct_person: float
    pct_profession_mention: float

    def __post_init__(self):
        if self.pct_woman or self.pct_man:
            if abs(self.pct_woman + self.pct_man - 100.0) > 1e-9:
                raise ValidationError("woman/man shares must partition marked texts")


@dataclass
class MarkerStats:
    source: str
    per_system: dict[str, SystemMarkerStats]
    overall: SystemMarkerStats
    woman_markers: tuple[str, ...] = tuple(sorted(vocab.WOMAN_MARKERS))
    man_markers: tuple[str, ...] = tuple(sorted(vocab.MAN_MARKERS))


def _text_of(annotation: Annotation, source: str) -> str:
    if source == "caption":
        return annotation.caption
    return annotation.vqa.get("appearance", "")


def contains_profession(text: str, profession: str) -> bool:
    """Case-insensitive contiguous token-run match of the profession name."""
    needle = tokenize(profession)
    if not needle:
        raise ValidationError("profession must be non-empty")
    hay = tokenize(text)
    n = len(needle)
    return any(hay[i : i + n] == needle for i in range(len(hay) - n + 1))


def _stats_for(pairs: list[tuple[str, str | None]]) -> SystemMarkerStats:
    """`pairs` holds (text, profession-or-None) tuples."""
    n = len(pairs)
    marked = {"woman": 0, "man": 0}
    person = 0
    mention_total = 0
    mention_hits = 0
    for text, profession in pairs:
        tokens = tokenize(text)
        label = _first_marker(tokens)
        if label is not None:
            marked[label] += 1
        elif any(t in vocab.NEUTRAL_MARKERS for t in tokens):
            person += 1
        if profession:
            mention_total += 1
            if contains_profession(text, profession):
                mention_hits += 1
    n_marked = marked["woman"] + marked["man"]
    return SystemMarkerStats(
        n_texts=n,
        pct_gender_marked=100.0 * n_marked / n,
        pct_woman=100.0 * marked["woman"] / n_marked if n_marked else 0.0,
        pct_man=100.0 * marked["man"] / n_marked if n_marked else 0.0,
        pct_person=100.0 * person / n,
        pct_profession_mention=100.0 * mention_hits / mention_total if mention_total else 0.0,
    )


def gender_marker_stats(
    annotations: list[Annotation],
    corpus: Corpus,
    source: str = "caption",
) -> MarkerStats:
    """Marker statistics per system: how often texts are gender-marked,
    the woman/man split among marked texts, neutral "person" usage, and
    how often the prompt's own profession is named."""
    if not annotations:
        raise ValidationError("annotation list must be non-empty")
    if source not in MARKER_SOURCES:
        raise ValidationError(f"source must be one of {MARKER_SOURCES}")
    by_system: dict[str, list[tuple[str, str | None]]] = {}
    pooled: list[tuple[str, str | None]] = []
    for ann in annotations:
        record = corpus[ann.image_id]
        pair = (_text_of(ann, source), record.prompt.profession)
        by_system.setdefault(record.system, []).append(pair)
        pooled.append(pair)
    return MarkerStats(
        source=source,
        per_system={s: _stats_for(pairs) for s, pairs in sorted(by_system.items())},
        overall=_stats_for(pooled),
    )


def profession_mention_rate(
    annotations: list[Annotation], profession: str, source: str = "caption"
) -> float:
    """% of texts naming the profession as a contiguous token run."""
    if not annotations:
        raise ValidationError("annotation list must be non-empty")
    if source not in MARKER_SOURCES:
        raise ValidationError(f"source must be one of {MARKER_SOURCES}")
    hits = sum(
        1 for ann in annotations if contains_profession(_text_of(ann, source), profession)
    )
    return 100.0 * hits / len(annotations)
