"""Distance kernels, exact neighbor search, and head-pose rotation angles.

All operations are pure over immutable inputs. Distances are Euclidean
between unit vectors (range [0, 2]); the equivalent chord angle is
2*arcsin(dist/2). Neighbor search is an exact scan, never approximate,
so selections are reproducible bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, EmbeddingSet
from .errors import KTooLarge, NonFiniteInput, NotNormalized, UnknownId

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class PairDistance:
    image_a: int
    image_b: int
    dist: float
    angle_deg: float


@dataclass(frozen=True)
class NeighborList:
    query: int
    neighbors: tuple[tuple[int, float], ...]  # (image_id, dist), ascending dist


def chord_angle_deg(dist) -> float | np.ndarray:
    """Angle in degrees subtended by a chord of length ``dist`` on the unit sphere."""
    return np.degrees(2.0 * np.arcsin(np.clip(np.asarray(dist) / 2.0, -1.0, 1.0)))


def _require_normalized(embeddings: EmbeddingSet) -> None:
    if not embeddings.is_normalized(UNIT_NORM_TOL):
        raise NotNormalized(f"vector norms outside 1 +/- {UNIT_NORM_TOL}")


def pair_distance(embeddings: EmbeddingSet, a: int, b: int) -> PairDistance:
    """Euclidean distance between two unit embeddings, with its chord angle."""
    for image_id in (a, b):
        if image_id not in embeddings:
            raise UnknownId(f"image_id {image_id} not in embedding set")
    _require_normalized(embeddings)
    va = embeddings.vector(a)
    vb = embeddings.vector(b)
    dist = float(np.sqrt(((va - vb) ** 2).sum()))
    return PairDistance(int(a), int(b), dist, float(chord_angle_deg(dist)))


def pair_distances(embeddings: EmbeddingSet, ids_a, ids_b) -> np.ndarray:
    """Vectorized pair_distance over parallel id sequences (returns dists)."""
    _require_normalized(embeddings)
    rows_a = np.array([embeddings.row(i) for i in ids_a])
    rows_b = np.array([embeddings.row(i) for i in ids_b])
    diff = embeddings.matrix[rows_a] - embeddings.matrix[rows_b]
    return np.sqrt((diff**2).sum(axis=1))


def top_k(
    embeddings: EmbeddingSet,
    queries,
    k: int,
    exclude_same_identity: bool = False,
    corpus: Corpus | None = None,
) -> list[NeighborList]:
    """Exact k nearest neighbors per query, ties broken by ascending image_id.

    The query itself is never a candidate. With exclude_same_identity, all
    images sharing the query's identity are dropped (requires the corpus).
    """
    _require_normalized(embeddings)
    if exclude_same_identity and corpus is None:
        raise ValueError("exclude_same_identity requires a corpus")
    for q in queries:
        if q not in embeddings:
            raise UnknownId(f"query image_id {q} not in embedding set")

    ids = embeddings.ids
    matrix = embeddings.matrix
    if exclude_same_identity:
        identity_per_row = np.array([corpus.identity_of(int(i)) for i in ids])

    out = []
    for q in queries:
        qrow = embeddings.row(q)
        keep = np.ones(len(ids), dtype=bool)
        keep[qrow] = False
        if exclude_same_identity:
            keep &= identity_per_row != corpus.identity_of(int(q))
        eligible = np.where(keep)[0]
        if k > len(eligible):
            raise KTooLarge(f"k={k} but only {len(eligible)} eligible candidates for {q}")
        diff = matrix[eligible] - matrix[qrow]
        dists = np.sqrt((diff**2).sum(axis=1))
        order = np.lexsort((ids[eligible], dists))[:k]
        chosen = eligible[order]
        out.append(
            NeighborList(
                query=int(q),
                neighbors=tuple(
                    (int(ids[r]), float(d)) for r, d in zip(chosen, dists[order])
                ),
            )
        )
    return out


def rotation_matrices(poses) -> np.ndarray:
    """(n, 3) Euler triples in degrees -> (n, 3, 3) rotation matrices,
    composed intrinsically as pitch(x) -> yaw(y) -> roll(z)."""
    rad = np.radians(np.asarray(poses, dtype=np.float64).reshape(-1, 3))
    cp, sp = np.cos(rad[:, 0]), np.sin(rad[:, 0])
    cy, sy = np.cos(rad[:, 1]), np.sin(rad[:, 1])
    cr, sr = np.cos(rad[:, 2]), np.sin(rad[:, 2])
    n = rad.shape[0]
    zeros = np.zeros(n)
    ones = np.ones(n)
    rx = np.stack([ones, zeros, zeros, zeros, cp, -sp, zeros, sp, cp], -1).reshape(n, 3, 3)
    ry = np.stack([cy, zeros, sy, zeros, ones, zeros, -sy, zeros, cy], -1).reshape(n, 3, 3)
    rz = np.stack([cr, -sr, zeros, sr, cr, zeros, zeros, zeros, ones], -1).reshape(n, 3, 3)
    return rx @ ry @ rz


def rotation_angles(poses_a, poses_b) -> np.ndarray:
    """Vectorized geodesic angles in degrees between paired Euler poses."""
    a = np.asarray(poses_a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(poses_b, dtype=np.float64).reshape(-1, 3)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise NonFiniteInput("non-finite pose angle")
    ra = rotation_matrices(a)
    rb = rotation_matrices(b)
    # trace(Ra^T Rb) as an elementwise sum keeps the computation symmetric
    trace = (ra * rb).sum(axis=(1, 2))
    return np.degrees(np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0)))


def rotation_angle(pose_a, pose_b) -> float:
    """Geodesic angle in degrees between two head poses given as Euler triples."""
    return float(rotation_angles([pose_a], [pose_b])[0])
