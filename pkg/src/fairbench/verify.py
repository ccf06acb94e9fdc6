"""Threshold selection and subgroup-conditioned verification metrics.

The decision rule is: predict "same identity" when dist <= threshold.
Candidate thresholds are the midpoints of consecutive sorted unique
distances plus one sentinel below the minimum and one above the maximum,
so the scan is exhaustive over all decision boundaries. Accuracy ties
resolve to the smallest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import EmptyGroup, NotNormalized, SingleClassInput, TooFewSubgroups, UnlabeledSet
from .pairs import _COMBO_FIELD, HARD, NEGATIVE, POSITIVE, SOFT, PairSet


@dataclass(frozen=True)
class FoldResult:
    threshold: float
    accuracy: float


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    mode: str  # "global" or "kfold"
    accuracy: float
    per_fold: tuple[FoldResult, ...] | None = None


@dataclass(frozen=True)
class SubgroupMetrics:
    key: str
    n: int
    n_pos: int
    n_neg: int
    accuracy: float | None
    tpr: float | None
    fpr: float | None
    tnr: float | None


@dataclass(frozen=True)
class GapMatrix:
    metric: str
    levels: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]  # values[i][j] = metric(i) - metric(j)
    excluded: tuple[str, ...] = ()


def _dists_labels(pair_set: PairSet) -> tuple[np.ndarray, np.ndarray]:
    if not pair_set.has_distances:
        raise UnlabeledSet("pair set has no distances attached")
    dists = np.array([p.dist for p in pair_set.pairs], dtype=np.float64)
    labels = np.array([p.label for p in pair_set.pairs], dtype=np.int64)
    return dists, labels


def _best_threshold(dists: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Exhaustive scan over candidate thresholds; ties go to the smallest."""
    unique = np.unique(dists)
    candidates = np.empty(len(unique) + 1)
    candidates[0] = unique[0] - 1.0
    candidates[1:-1] = (unique[:-1] + unique[1:]) / 2.0
    candidates[-1] = unique[-1] + 1.0

    # correct(t) = (#positives with d <= t) + (#negatives with d > t)
    order = np.argsort(dists, kind="stable")
    sorted_d = dists[order]
    pos_cum = np.concatenate([[0], np.cumsum(labels[order] == POSITIVE)])
    neg_cum = np.concatenate([[0], np.cumsum(labels[order] == NEGATIVE)])
    n_neg = int(neg_cum[-1])
    counts_below = np.searchsorted(sorted_d, candidates, side="right")
    correct = pos_cum[counts_below] + n_neg - neg_cum[counts_below]
    best = int(np.argmax(correct))
    return float(candidates[best]), float(correct[best] / len(dists))


def select_threshold(pair_set: PairSet, mode: str = "global", k: int = 10) -> ThresholdResult:
    """Pick the accuracy-maximizing distance threshold.

    kfold mode splits the pairs into k contiguous folds in input order
    (pre-shuffle with a seed for a randomized protocol), fits the
    threshold on k-1 folds, and reports the mean held-out accuracy.
    """
    dists, labels = _dists_labels(pair_set)
    if len(set(labels.tolist())) < 2:
        raise SingleClassInput("both positive and negative pairs are required")
    if mode == "global":
        threshold, accuracy = _best_threshold(dists, labels)
        return ThresholdResult(threshold=threshold, mode="global", accuracy=accuracy)
    if mode != "kfold":
        raise ValueError(f"unknown mode {mode!r}")
    if not 2 <= k <= len(dists):
        raise ValueError(f"k={k} must be in [2, n_pairs]")
    folds = np.array_split(np.arange(len(dists)), k)
    per_fold = []
    for held_out in folds:
        train = np.setdiff1d(np.arange(len(dists)), held_out)
        if len(set(labels[train].tolist())) < 2:
            raise SingleClassInput("a training split has a single class; shuffle the pairs")
        t, _ = _best_threshold(dists[train], labels[train])
        predicted = dists[held_out] <= t
        actual = labels[held_out] == POSITIVE
        per_fold.append(FoldResult(threshold=t, accuracy=float((predicted == actual).mean())))
    threshold, _ = _best_threshold(dists, labels)
    return ThresholdResult(
        threshold=threshold,
        mode="kfold",
        accuracy=float(np.mean([f.accuracy for f in per_fold])),
        per_fold=tuple(per_fold),
    )


def _restrict(pair_set: PairSet, restrict: str) -> list:
    if restrict == "all":
        return list(pair_set.pairs)
    if restrict not in (HARD, SOFT):
        raise ValueError(f"restrict must be all/hard/soft, got {restrict!r}")
    if not pair_set.labeled:
        raise UnlabeledSet("hardness restriction requires labeled pairs")
    return [p for p in pair_set.pairs if p.hardness == restrict]


def subgroup_metrics(
    pair_set: PairSet,
    threshold: float,
    conditioning: str,
    restrict: str = "all",
) -> list[SubgroupMetrics]:
    """Per-combination accuracy/TPR/FPR/TNR slices under a fixed threshold.

    Slices with no positives (or no negatives) carry None for the rates
    that condition on them; counts are always reported so consumers can
    judge the reliability of each estimate.
    """
    field = _COMBO_FIELD[conditioning]
    selected = _restrict(pair_set, restrict)
    groups: dict[str, list] = {}
    for p in selected:
        key = getattr(p, field)
        if key is None:
            raise UnlabeledSet(f"pair ({p.image_a}, {p.image_b}) lacks {conditioning} combo")
        if p.dist is None:
            raise UnlabeledSet(f"pair ({p.image_a}, {p.image_b}) lacks a distance")
        groups.setdefault(key, []).append(p)

    out = []
    for key in sorted(groups):
        members = groups[key]
        predicted_pos = [p.dist <= threshold for p in members]
        actual_pos = [p.label == POSITIVE for p in members]
        n = len(members)
        n_pos = sum(actual_pos)
        n_neg = n - n_pos
        correct = sum(1 for pr, ac in zip(predicted_pos, actual_pos) if pr == ac)
        tp = sum(1 for pr, ac in zip(predicted_pos, actual_pos) if pr and ac)
        fp = sum(1 for pr, ac in zip(predicted_pos, actual_pos) if pr and not ac)
        out.append(
            SubgroupMetrics(
                key=key,
                n=n,
                n_pos=n_pos,
                n_neg=n_neg,
                accuracy=correct / n if n else None,
                tpr=tp / n_pos if n_pos else None,
                fpr=fp / n_neg if n_neg else None,
                tnr=(n_neg - fp) / n_neg if n_neg else None,
            )
        )
    return out


def global_accuracy(pair_set: PairSet, threshold: float) -> float:
    dists, labels = _dists_labels(pair_set)
    return float(((dists <= threshold) == (labels == POSITIVE)).mean())


def gap_matrix(metrics: list[SubgroupMetrics], metric_name: str) -> GapMatrix:
    """Antisymmetric matrix of pairwise metric differences between subgroups."""
    if metric_name not in ("accuracy", "tpr", "fpr", "tnr"):
        raise ValueError(f"unknown metric {metric_name!r}")
    defined = [m for m in metrics if getattr(m, metric_name) is not None]
    excluded = tuple(m.key for m in metrics if getattr(m, metric_name) is None)
    if len(defined) < 2:
        raise TooFewSubgroups(f"{len(defined)} subgroups have a defined {metric_name}")
    values = [getattr(m, metric_name) for m in defined]
    matrix = tuple(
        tuple(vi - vj for vj in values) for vi in values
    )
    return GapMatrix(
        metric=metric_name,
        levels=tuple(m.key for m in defined),
        values=matrix,
        excluded=excluded,
    )


@dataclass(frozen=True)
class DispersionSummary:
    group: str
    n: int
    mean: float
    median: float
    q10: float
    q90: float


def centroid_dispersion(
    corpus: Corpus, grouping: str, seed: int
) -> tuple[list[DispersionSummary], dict[str, np.ndarray]]:
    """Distances to the group centroid, one sampled image per identity.

    The centroid is the arithmetic mean of the sampled unit vectors (not
    re-normalized). Returns summaries plus the raw per-group distances.
    """
    if grouping not in ("gender", "ethnicity", "age"):
        raise ValueError(f"grouping must be gender/ethnicity/age, got {grouping!r}")
    if not corpus.embeddings.is_normalized():
        raise NotNormalized("centroid_dispersion requires normalized embeddings")
    if not corpus.identities:
        raise EmptyGroup("corpus has no identities")
    rng = np.random.default_rng(seed)
    groups: dict[str, list[int]] = {}
    for identity_id in sorted(corpus.identities):
        identity = corpus.identities[identity_id]
        image_id = identity.image_ids[rng.integers(len(identity.image_ids))]
        if grouping == "age":
            level = corpus.images[image_id].age_group
        else:
            level = getattr(identity, grouping)
        groups.setdefault(level, []).append(image_id)

    summaries = []
    distances: dict[str, np.ndarray] = {}
    for level in sorted(groups):
        rows = np.array([corpus.embeddings.row(i) for i in groups[level]])
        vectors = corpus.embeddings.matrix[rows]
        centroid = vectors.mean(axis=0)
        d = np.sqrt(((vectors - centroid) ** 2).sum(axis=1))
        distances[level] = d
        summaries.append(
            DispersionSummary(
                group=level,
                n=len(d),
                mean=float(d.mean()),
                median=float(np.quantile(d, 0.5)),
                q10=float(np.quantile(d, 0.1)),
                q90=float(np.quantile(d, 0.9)),
            )
        )
    return summaries, distances
