"""Entropy balance scoring, quota planning, and greedy flattening.

The balance score of a class-count table is the normalized Shannon
entropy of the class proportions, scaled to 0..100: 100 means perfectly
uniform, 0 means all mass on a single class. Levels with zero count
still enter the normalization, so an absent class depresses the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .corpus import AGE_GROUPS, Corpus, EmbeddingSet, ETHNICITIES, GENDERS
from .errors import EmptyCounts, NotEnoughCandidates, NotNormalized, SingleLevel
from .poseclass import N_CLASSES, corpus_pose_classes, fit_corpus_pose


@dataclass(frozen=True)
class BalanceScore:
    attribute: str
    class_counts: dict[str, int]
    score: float  # 0..100


@dataclass(frozen=True)
class QuotaPlan:
    cells: dict[tuple[str, str], int]  # (ethnicity, gender) -> identity count
    total: int


@dataclass(frozen=True)
class SelectionPlan:
    picks: tuple[int, ...]
    trace: tuple[dict, ...]  # per-class selected counts after each pick


def balance_score(counts: dict, attribute: str = "") -> BalanceScore:
    """Normalized-entropy balance of a level -> count table, in percent."""
    if not counts:
        raise EmptyCounts("no levels given")
    total = sum(counts.values())
    if total <= 0:
        raise EmptyCounts("all counts are zero")
    k = len(counts)
    if k < 2:
        raise SingleLevel("balance needs at least 2 levels")
    values = list(counts.values())
    if min(values) == max(values):
        score = 100.0  # exactly uniform, avoid log round-off
    elif sum(1 for c in values if c > 0) == 1:
        score = 0.0  # all mass on one level, avoid -0.0
    else:
        entropy = -sum((c / total) * math.log(c / total) for c in values if c > 0)
        score = 100.0 * entropy / math.log(k)
    return BalanceScore(attribute=attribute, class_counts=dict(counts), score=score)


def plan_quotas(total: int) -> QuotaPlan:
    """Spread an identity budget over the 8 (ethnicity, gender) cells.

    Every cell gets floor(total/8); the remainder goes one each to the
    first cells in lexicographic (ethnicity, gender) order.
    """
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    cells_order = [(e, g) for e in ETHNICITIES for g in GENDERS]
    base, remainder = divmod(total, len(cells_order))
    cells = {cell: base + (1 if i < remainder else 0) for i, cell in enumerate(cells_order)}
    return QuotaPlan(cells=cells, total=total)


def _class_sort_key(label):
    """Fixed ordering: age follows Young < Adult < Senior; joint labels
    order age-major then pose index; anything else falls back to its repr."""
    if isinstance(label, tuple) and len(label) == 2 and label[0] in AGE_GROUPS:
        return (0, AGE_GROUPS.index(label[0]), label[1], "")
    if label in AGE_GROUPS:
        return (0, AGE_GROUPS.index(label), -1, "")
    return (1, 0, 0, repr(label))


def greedy_flatten(candidates, n_pick: int, initial_counts: dict | None = None) -> SelectionPlan:
    """Pick n_pick candidates, always from the currently least-selected class.

    Ties between classes resolve by the fixed class order; inside a class
    the lowest image_id goes first. The trace records the running class
    counts after every pick.
    """
    if n_pick > len(candidates):
        raise NotEnoughCandidates(f"n_pick {n_pick} > {len(candidates)} candidates")
    pools: dict = {}
    for image_id, label in candidates:
        pools.setdefault(label, []).append(int(image_id))
    class_order = sorted(pools, key=_class_sort_key)
    for label in class_order:
        pools[label].sort(reverse=True)  # pop() then yields the lowest id

    counts = {label: 0 for label in class_order}
    if initial_counts:
        for label, c in initial_counts.items():
            counts[label] = counts.get(label, 0) + int(c)

    picks: list[int] = []
    trace: list[dict] = []
    for _ in range(n_pick):
        available = [label for label in class_order if pools[label]]
        chosen = min(available, key=lambda lb: (counts[lb], class_order.index(lb)))
        picks.append(pools[chosen].pop())
        counts[chosen] += 1
        trace.append(dict(counts))
    return SelectionPlan(picks=tuple(picks), trace=tuple(trace))


def dedup_filter(embeddings: EmbeddingSet, threshold: float = 0.6):
    """Greedy near-duplicate filter by cosine similarity, scanning ids ascending.

    An id is dropped when its similarity with any already-kept id exceeds
    the threshold. Returns (kept_ids, removed_ids).
    """
    if not embeddings.is_normalized():
        raise NotNormalized("dedup_filter requires normalized embeddings")
    kept_rows: list[int] = []
    kept: list[int] = []
    removed: list[int] = []
    matrix = embeddings.matrix
    for row, image_id in enumerate(embeddings.ids):  # ids are stored ascending
        if kept_rows:
            sims = matrix[kept_rows] @ matrix[row]
            if float(sims.max()) > threshold:
                removed.append(int(image_id))
                continue
        kept_rows.append(row)
        kept.append(int(image_id))
    return kept, removed


def corpus_balance_scores(corpus: Corpus) -> dict[str, BalanceScore | None]:
    """Table-style balance scores: gender/ethnicity per identity, age per
    image, pose over the 27 joint classes (None when no image has pose)."""
    genders = {g: 0 for g in GENDERS}
    ethnicities = {e: 0 for e in ETHNICITIES}
    for identity in corpus.identities.values():
        genders[identity.gender] += 1
        ethnicities[identity.ethnicity] += 1
    ages = {a: 0 for a in AGE_GROUPS}
    for rec in corpus.images.values():
        ages[rec.age_group] += 1

    scores: dict[str, BalanceScore | None] = {
        "gender": balance_score(genders, "gender"),
        "ethnicity": balance_score(ethnicities, "ethnicity"),
        "age": balance_score(ages, "age"),
    }
    posed = [rec for rec in corpus.images.values() if rec.pose is not None]
    if len(posed) >= 10:
        thresholds = fit_corpus_pose(corpus)
        classes = corpus_pose_classes(corpus, thresholds)
        pose_counts = {str(i): 0 for i in range(N_CLASSES)}
        for pose_class in classes.values():
            pose_counts[str(pose_class.index)] += 1
        scores["pose"] = balance_score(pose_counts, "pose")
    else:
        scores["pose"] = None
    return scores
