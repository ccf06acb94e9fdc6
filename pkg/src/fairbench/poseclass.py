"""Per-axis pose classification and the 27-class joint taxonomy.

Each rotation axis splits into 3 classes via dynamic thresholds at the
0.16 and 0.84 linear-interpolation quantiles: a neutral middle band
holding ~68% of the samples with equal-sized tails, which tracks the
observed distributions whatever their shape. The joint class of a pose
is the cartesian product over pitch, yaw, roll, indexed 0..26.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import MissingPose, NonFiniteInput, NotEnoughCandidates, TooFewSamples

AXES = ("pitch", "yaw", "roll")
N_CLASSES = 27

QUANTILE_LO = 0.16
QUANTILE_HI = 0.84
MIN_SAMPLES = 10


@dataclass(frozen=True)
class AxisThresholds:
    axis: str
    t_lo: float
    t_hi: float
    fractions: tuple[float, float, float]  # (low, neutral, high)


@dataclass(frozen=True)
class PoseClass:
    i: int  # pitch class, 1..3
    j: int  # yaw class, 1..3
    k: int  # roll class, 1..3

    @property
    def index(self) -> int:
        return (self.i - 1) * 9 + (self.j - 1) * 3 + (self.k - 1)

    @classmethod
    def from_index(cls, index: int) -> "PoseClass":
        if not 0 <= index < N_CLASSES:
            raise ValueError(f"index {index} outside [0, {N_CLASSES})")
        return cls(i=index // 9 + 1, j=index % 9 // 3 + 1, k=index % 3 + 1)


def fit_axis_thresholds(samples, axis: str = "") -> AxisThresholds:
    """Fit the 3-class boundaries of one rotation axis from angle samples."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size < MIN_SAMPLES:
        raise TooFewSamples(f"{x.size} samples, need at least {MIN_SAMPLES}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("non-finite angle in samples")
    t_lo = float(np.quantile(x, QUANTILE_LO))
    t_hi = float(np.quantile(x, QUANTILE_HI))
    low = float((x < t_lo).mean())
    high = float((x > t_hi).mean())
    return AxisThresholds(
        axis=axis, t_lo=t_lo, t_hi=t_hi, fractions=(low, 1.0 - low - high, high)
    )


def _axis_class(angle: float, thresholds: AxisThresholds) -> int:
    if angle < thresholds.t_lo:
        return 1
    if angle <= thresholds.t_hi:
        return 2
    return 3


def assign_pose_class(pose, thresholds) -> PoseClass:
    """Classify a (pitch, yaw, roll) triple with per-axis fitted thresholds."""
    if pose is None:
        raise MissingPose("record has no pose angles")
    pitch, yaw, roll = pose
    t_pitch, t_yaw, t_roll = thresholds
    return PoseClass(
        i=_axis_class(pitch, t_pitch),
        j=_axis_class(yaw, t_yaw),
        k=_axis_class(roll, t_roll),
    )


def fit_corpus_pose(corpus: Corpus) -> tuple[AxisThresholds, AxisThresholds, AxisThresholds]:
    """Fit all three axis thresholds from the corpus images that carry pose."""
    poses = [rec.pose for rec in corpus.images.values() if rec.pose is not None]
    if len(poses) < MIN_SAMPLES:
        raise TooFewSamples(f"{len(poses)} posed images, need at least {MIN_SAMPLES}")
    arr = np.array(poses, dtype=np.float64)
    return tuple(fit_axis_thresholds(arr[:, i], axis=AXES[i]) for i in range(3))


def corpus_pose_classes(corpus: Corpus, thresholds) -> dict[int, PoseClass]:
    """Joint pose class per image, skipping images without pose."""
    out = {}
    for image_id in sorted(corpus.images):
        rec = corpus.images[image_id]
        if rec.pose is not None:
            out[image_id] = assign_pose_class(rec.pose, thresholds)
    return out


def even_sample(candidates, total: int, seed: int) -> list[int]:
    """Draw ``total`` image ids spread evenly over the 27 joint classes.

    Round-robin over classes in index order, drawing uniformly without
    replacement inside a class; exhausted classes are skipped, so classes
    that still hold candidates end within one pick of each other.
    """
    if total > len(candidates):
        raise NotEnoughCandidates(f"total {total} > {len(candidates)} candidates")
    rng = np.random.default_rng(seed)
    buckets: dict[int, list[int]] = {i: [] for i in range(N_CLASSES)}
    for image_id, pose_class in candidates:
        buckets[pose_class.index].append(int(image_id))
    for bucket in buckets.values():
        bucket.sort()

    picked: list[int] = []
    while len(picked) < total:
        progressed = False
        for index in range(N_CLASSES):
            if len(picked) == total:
                break
            bucket = buckets[index]
            if not bucket:
                continue
            picked.append(bucket.pop(int(rng.integers(len(bucket)))))
            progressed = True
        if not progressed:
            raise NotEnoughCandidates("all classes exhausted")
    return picked
