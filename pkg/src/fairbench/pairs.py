"""Verification pair construction: protocol pairs, hardened pairs, labels.

Pairs are unordered; they are stored with image_a < image_b and attribute
combinations are canonicalized by sorting the two levels, so
Male x Female and Female x Male are the same combination. A pair is
"hard" when gender, age group, and ethnicity all coincide across it,
"soft" otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .corpus import Corpus
from .errors import MalformedFile, NotEnoughPairs, NotNormalized, UnknownId, UnlabeledSet
from .geometry import rotation_angles

POSITIVE = 1
NEGATIVE = 0

HARD = "hard"
SOFT = "soft"

_COMBO_FIELD = {"gender": "g_combo", "age": "a_combo", "ethnicity": "e_combo"}


@dataclass(frozen=True)
class VerificationPair:
    image_a: int
    image_b: int
    label: int  # 1 = same identity, 0 = different
    g_combo: str | None = None
    a_combo: str | None = None
    e_combo: str | None = None
    hardness: str | None = None
    pose_angle_deg: float | None = None
    dist: float | None = None


def make_pair(image_a: int, image_b: int, label: int, **kw) -> VerificationPair:
    a, b = (int(image_a), int(image_b)) if image_a <= image_b else (int(image_b), int(image_a))
    return VerificationPair(image_a=a, image_b=b, label=int(label), **kw)


def combo(level_a: str, level_b: str) -> str:
    lo, hi = sorted((level_a, level_b))
    return f"{lo}×{hi}"


@dataclass(frozen=True)
class PairSet:
    pairs: tuple[VerificationPair, ...]

    def __post_init__(self):
        seen = set()
        for p in self.pairs:
            key = (p.image_a, p.image_b)
            if key in seen:
                raise MalformedFile(f"duplicate pair {key}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def n_pos(self) -> int:
        return sum(1 for p in self.pairs if p.label == POSITIVE)

    @property
    def n_neg(self) -> int:
        return sum(1 for p in self.pairs if p.label == NEGATIVE)

    @property
    def labeled(self) -> bool:
        return all(p.g_combo is not None for p in self.pairs)

    @property
    def has_distances(self) -> bool:
        return all(p.dist is not None for p in self.pairs)


def _within_identity_pairs(corpus: Corpus, image_ids=None):
    """All unordered same-identity pairs, optionally restricted to image_ids."""
    allowed = None if image_ids is None else set(int(i) for i in image_ids)
    out = []
    for identity in corpus.identities.values():
        members = [i for i in identity.image_ids if allowed is None or i in allowed]
        out.extend(combinations(sorted(members), 2))
    return out


def build_random_pairs(corpus: Corpus, n_pos: int, n_neg: int, seed: int) -> PairSet:
    """Uniform without-replacement sample of positive and negative pairs.

    Deterministic for a given seed: positives are drawn first, then
    negatives, each from numpy's seeded PCG64 stream.
    """
    if len(corpus.identities) < 2:
        raise NotEnoughPairs("need at least 2 identities for negative pairs")
    rng = np.random.default_rng(seed)

    pos_candidates = sorted(_within_identity_pairs(corpus))
    if n_pos > len(pos_candidates):
        raise NotEnoughPairs(f"{n_pos} positives requested, {len(pos_candidates)} possible")
    pos_idx = rng.choice(len(pos_candidates), size=n_pos, replace=False)
    positives = [pos_candidates[i] for i in pos_idx]

    ids = sorted(corpus.images)
    n_images = len(ids)
    total_pairs = n_images * (n_images - 1) // 2
    total_cross = total_pairs - len(pos_candidates)
    if n_neg > total_cross:
        raise NotEnoughPairs(f"{n_neg} negatives requested, {total_cross} possible")

    if 3 * n_neg >= total_cross or n_images <= 2000:
        # dense enough that rejection sampling would thrash: enumerate
        neg_candidates = [
            (a, b)
            for a, b in combinations(ids, 2)
            if corpus.identity_of(a) != corpus.identity_of(b)
        ]
        neg_idx = rng.choice(len(neg_candidates), size=n_neg, replace=False)
        negatives = [neg_candidates[i] for i in neg_idx]
    else:
        identity_of = np.array([corpus.identity_of(i) for i in ids])
        chosen: set[tuple[int, int]] = set()
        negatives = []
        while len(negatives) < n_neg:
            batch = max(1024, (n_neg - len(negatives)) * 3 // 2)
            draws = rng.integers(0, n_images, size=(batch, 2))
            keep = (draws[:, 0] != draws[:, 1]) & (
                identity_of[draws[:, 0]] != identity_of[draws[:, 1]]
            )
            for i, j in draws[keep].tolist():
                a, b = (ids[i], ids[j]) if ids[i] < ids[j] else (ids[j], ids[i])
                if (a, b) in chosen:
                    continue
                chosen.add((a, b))
                negatives.append((a, b))
                if len(negatives) == n_neg:
                    break

    pairs = [make_pair(a, b, POSITIVE) for a, b in positives]
    pairs += [make_pair(a, b, NEGATIVE) for a, b in negatives]
    return PairSet(tuple(pairs))


def _extreme_cross_pairs(corpus: Corpus, rows, ids, identity, n: int, largest: bool):
    """Exact n most extreme different-identity pairs among the given rows.

    Blocked scan keeps only a candidate pool of size n between blocks, so
    memory stays O(block * m + n) while the selection remains exact.
    Ties break by ascending (image_a, image_b).
    """
    matrix = corpus.embeddings.matrix[rows]
    m = len(rows)
    pool_d = np.zeros(0)
    pool_a = np.zeros(0, dtype=np.int64)
    pool_b = np.zeros(0, dtype=np.int64)
    block = max(1, min(m, 512))
    for start in range(0, m, block):
        stop = min(start + block, m)
        for i in range(start, stop):
            js = np.arange(i + 1, m)
            if len(js) == 0:
                continue
            js = js[identity[js] != identity[i]]
            if len(js) == 0:
                continue
            diff = matrix[js] - matrix[i]
            d = np.sqrt((diff**2).sum(axis=1))
            pool_d = np.concatenate([pool_d, -d if largest else d])
            pool_a = np.concatenate([pool_a, np.full(len(js), ids[i])])
            pool_b = np.concatenate([pool_b, ids[js]])
        if len(pool_d) > 4 * n:
            order = np.lexsort((pool_b, pool_a, pool_d))[:n]
            pool_d, pool_a, pool_b = pool_d[order], pool_a[order], pool_b[order]
    if len(pool_d) < n:
        raise NotEnoughPairs(f"{n} cross-identity pairs requested, {len(pool_d)} exist")
    order = np.lexsort((pool_b, pool_a, pool_d))[:n]
    dists = -pool_d[order] if largest else pool_d[order]
    return [
        (int(a), int(b), float(d))
        for a, b, d in zip(pool_a[order], pool_b[order], dists)
    ]


def harden_pairs(corpus: Corpus, base: PairSet) -> PairSet:
    """Replace a pair set by its extreme-distance counterpart.

    Keeps the base counts: the negatives become the globally closest
    different-identity pairs over the images the base mentions, and the
    positives the most distant same-identity pairs. Every selected
    negative is therefore no farther than any unselected cross-identity
    pair, and dually for positives.
    """
    if not corpus.embeddings.is_normalized():
        raise NotNormalized("harden_pairs requires normalized embeddings")
    eligible = sorted({i for p in base.pairs for i in (p.image_a, p.image_b)})
    n_pos, n_neg = base.n_pos, base.n_neg

    rows = np.array([corpus.embeddings.row(i) for i in eligible])
    ids = np.array(eligible, dtype=np.int64)
    identity = np.array([corpus.identity_of(i) for i in eligible])

    negatives = _extreme_cross_pairs(corpus, rows, ids, identity, n_neg, largest=False)

    pos_candidates = _within_identity_pairs(corpus, eligible)
    if n_pos > len(pos_candidates):
        raise NotEnoughPairs(f"{n_pos} positives requested, {len(pos_candidates)} exist")
    if pos_candidates:
        pa = np.array([a for a, _ in pos_candidates], dtype=np.int64)
        pb = np.array([b for _, b in pos_candidates], dtype=np.int64)
        rows_a = np.array([corpus.embeddings.row(a) for a in pa])
        rows_b = np.array([corpus.embeddings.row(b) for b in pb])
        diff = corpus.embeddings.matrix[rows_a] - corpus.embeddings.matrix[rows_b]
        d = np.sqrt((diff**2).sum(axis=1))
        order = np.lexsort((pb, pa, -d))[:n_pos]
        positives = [(int(pa[i]), int(pb[i]), float(d[i])) for i in order]
    else:
        positives = []

    pairs = [make_pair(a, b, POSITIVE, dist=d) for a, b, d in positives]
    pairs += [make_pair(a, b, NEGATIVE, dist=d) for a, b, d in negatives]
    return PairSet(tuple(pairs))


def label_pairs(corpus: Corpus, pair_set: PairSet) -> PairSet:
    """Fill attribute combinations, hardness, and pose angles for every pair."""
    records = []
    for p in pair_set.pairs:
        for image_id in (p.image_a, p.image_b):
            if image_id not in corpus.images:
                raise UnknownId(f"image_id {image_id} not in corpus")
        records.append((corpus.images[p.image_a], corpus.images[p.image_b]))

    # pose angles in one vectorized pass over the pairs that have both poses
    posed = [i for i, (ra, rb) in enumerate(records)
             if ra.pose is not None and rb.pose is not None]
    angles: dict[int, float] = {}
    if posed:
        batch = rotation_angles(
            [records[i][0].pose for i in posed], [records[i][1].pose for i in posed]
        )
        angles = {i: float(a) for i, a in zip(posed, batch)}

    labeled = []
    for i, (p, (ra, rb)) in enumerate(zip(pair_set.pairs, records)):
        same = (ra.gender == rb.gender and ra.age_group == rb.age_group
                and ra.ethnicity == rb.ethnicity)
        labeled.append(
            replace(
                p,
                g_combo=combo(ra.gender, rb.gender),
                a_combo=combo(ra.age_group, rb.age_group),
                e_combo=combo(ra.ethnicity, rb.ethnicity),
                hardness=HARD if same else SOFT,
                pose_angle_deg=angles.get(i),
            )
        )
    return PairSet(tuple(labeled))


def attach_distances(corpus: Corpus, pair_set: PairSet) -> PairSet:
    """Fill each pair's embedding distance from the corpus."""
    if not corpus.embeddings.is_normalized():
        raise NotNormalized("attach_distances requires normalized embeddings")
    for p in pair_set.pairs:
        for image_id in (p.image_a, p.image_b):
            if image_id not in corpus.embeddings:
                raise UnknownId(f"image_id {image_id} not in embedding set")
    rows_a = np.array([corpus.embeddings.row(p.image_a) for p in pair_set.pairs])
    rows_b = np.array([corpus.embeddings.row(p.image_b) for p in pair_set.pairs])
    diff = corpus.embeddings.matrix[rows_a] - corpus.embeddings.matrix[rows_b]
    dists = np.sqrt((diff**2).sum(axis=1))
    return PairSet(
        tuple(replace(p, dist=float(d)) for p, d in zip(pair_set.pairs, dists))
    )


def combo_histogram(pair_set: PairSet, attribute: str) -> dict[str, int]:
    """Counts of canonical attribute combinations; partitions the set."""
    field = _COMBO_FIELD[attribute]
    counts: dict[str, int] = {}
    for p in pair_set.pairs:
        value = getattr(p, field)
        if value is None:
            raise UnlabeledSet(f"pair ({p.image_a}, {p.image_b}) lacks {attribute} combo")
        counts[value] = counts.get(value, 0) + 1
    return counts


# -- pair CSV ------------------------------------------------------------

PAIR_COLUMNS = ("image_a", "image_b", "label")


def write_pairs(pair_set: PairSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(PAIR_COLUMNS)
        for p in pair_set.pairs:
            writer.writerow([p.image_a, p.image_b, p.label])


def read_pairs(path, corpus: Corpus | None = None) -> PairSet:
    """Read a pair CSV; with a corpus, verify labels against identities."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedFile(f"{path}: empty file") from None
        if tuple(header) != PAIR_COLUMNS:
            raise MalformedFile(f"{path}: header {header} != {list(PAIR_COLUMNS)}")
        pairs = []
        for line, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise MalformedFile(f"{path} line {line}: {len(row)} fields")
            try:
                a, b, label = int(row[0]), int(row[1]), int(row[2])
            except ValueError:
                raise MalformedFile(f"{path} line {line}: non-integer field") from None
            if label not in (0, 1):
                raise MalformedFile(f"{path} line {line}: label {label} not in {{0,1}}")
            pairs.append(make_pair(a, b, label))
    pair_set = PairSet(tuple(pairs))
    if corpus is not None:
        for p in pair_set.pairs:
            for image_id in (p.image_a, p.image_b):
                if image_id not in corpus.images:
                    raise UnknownId(f"image_id {image_id} not in corpus")
            same = corpus.identity_of(p.image_a) == corpus.identity_of(p.image_b)
            if same != (p.label == POSITIVE):
                raise MalformedFile(
                    f"pair ({p.image_a}, {p.image_b}) label {p.label} contradicts identities"
                )
    return pair_set
