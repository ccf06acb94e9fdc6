"""Seeded synthetic corpus generator with planted subgroup effects.

Identity centers sit on k mutually orthogonal unit axes ("clusters");
images are unit-normalized noisy copies of their identity's axis. Two
images from the same cluster are close, images from different clusters
are near sqrt(2) apart, so any verification threshold inside the wide
gap yields the same confusion counts. That makes the planted effects
exact and threshold-free:

- false-positive lift: tilting one ethnicity's cluster-assignment
  distribution raises the chance that two of its identities share a
  cluster; the subgroup's negative-pair FPR becomes 1/k + delta in
  closed form while combinations with untilted groups stay at 1/k.
- true-positive misses: with a per-subgroup probability an image lands
  on a random wrong axis, pushing its positive pairs beyond the
  threshold.
- dispersion: per-subgroup noise scale controls how far a subgroup's
  images sit from their centroid.

Everything derives from per-identity substreams seeded by
(seed, identity_id), so output is independent of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import AGE_GROUPS, Corpus, EmbeddingSet, ETHNICITIES, GENDERS, ImageRecord
from .errors import InvalidScenario
from .pairs import combo

_POSE_FAMILIES = ("normal", "laplace")

DEFAULT_POSE = {
    "pitch": {"family": "normal", "loc": 0.0, "scale": 12.0},
    "yaw": {"family": "laplace", "loc": 0.0, "scale": 18.0},
    "roll": {"family": "normal", "loc": 0.0, "scale": 8.0},
}


def _uniform(levels) -> dict[str, float]:
    return {level: 1.0 / len(levels) for level in levels}


@dataclass
class Scenario:
    n_identities: int
    images_per_identity: int
    dim: int
    seed: int
    n_clusters: int = 10
    noise_sigma: float = 0.1
    gender: dict[str, float] = field(default_factory=lambda: _uniform(GENDERS))
    ethnicity: dict[str, float] = field(default_factory=lambda: _uniform(ETHNICITIES))
    age: dict[str, float] = field(default_factory=lambda: _uniform(AGE_GROUPS))
    spread: dict[str, float] = field(default_factory=dict)  # ethnicity -> sigma
    fpr_lift: dict[str, float] = field(default_factory=dict)  # ethnicity -> delta
    tpr_miss: dict[str, float] = field(default_factory=dict)  # ethnicity -> miss prob
    pose: dict | None = field(default_factory=lambda: dict(DEFAULT_POSE))
    pose_spread: dict[str, float] = field(default_factory=dict)  # ethnicity -> multiplier

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_identities < 1 or self.images_per_identity < 1:
            raise InvalidScenario("need at least one identity and one image each")
        if self.dim < 2:
            raise InvalidScenario(f"dim {self.dim} < 2")
        if not 2 <= self.n_clusters <= self.dim:
            raise InvalidScenario(
                f"n_clusters {self.n_clusters} must be in [2, dim={self.dim}]"
            )
        if not 0 < self.noise_sigma < 0.5:
            raise InvalidScenario(f"noise_sigma {self.noise_sigma} outside (0, 0.5)")
        for name, probs, levels in (
            ("gender", self.gender, GENDERS),
            ("ethnicity", self.ethnicity, ETHNICITIES),
            ("age", self.age, AGE_GROUPS),
        ):
            unknown = set(probs) - set(levels)
            if unknown:
                raise InvalidScenario(f"{name} proportions name unknown levels {sorted(unknown)}")
            if any(p < 0 for p in probs.values()):
                raise InvalidScenario(f"negative {name} proportion")
            if abs(sum(probs.values()) - 1.0) > 1e-9:
                raise InvalidScenario(f"{name} proportions sum to {sum(probs.values())}")
        for name, table in (("spread", self.spread), ("fpr_lift", self.fpr_lift),
                            ("tpr_miss", self.tpr_miss), ("pose_spread", self.pose_spread)):
            unknown = set(table) - set(ETHNICITIES)
            if unknown:
                raise InvalidScenario(f"{name} names unknown ethnicities {sorted(unknown)}")
        for level, sigma in self.spread.items():
            if not 0 < sigma < 0.5:
                raise InvalidScenario(f"spread[{level}] = {sigma} outside (0, 0.5)")
        k = self.n_clusters
        for level, delta in self.fpr_lift.items():
            if not 0 <= delta <= (k - 1) / k:
                raise InvalidScenario(f"fpr_lift[{level}] = {delta} outside [0, {(k-1)/k}]")
        for level, miss in self.tpr_miss.items():
            if not 0 <= miss < 1:
                raise InvalidScenario(f"tpr_miss[{level}] = {miss} outside [0, 1)")
        if self.pose is not None:
            if set(self.pose) != {"pitch", "yaw", "roll"}:
                raise InvalidScenario(f"pose must give pitch/yaw/roll, got {sorted(self.pose)}")
            for axis, spec in self.pose.items():
                unknown = set(spec) - {"family", "loc", "scale"}
                if unknown:
                    raise InvalidScenario(f"pose[{axis}] has unknown keys {sorted(unknown)}")
                if spec.get("family", "normal") not in _POSE_FAMILIES:
                    raise InvalidScenario(f"pose[{axis}] family must be in {_POSE_FAMILIES}")
                if spec.get("scale", 1.0) <= 0:
                    raise InvalidScenario(f"pose[{axis}] scale must be positive")

    _FIELDS = (
        "n_identities", "images_per_identity", "dim", "seed", "n_clusters",
        "noise_sigma", "gender", "ethnicity", "age", "spread", "fpr_lift",
        "tpr_miss", "pose", "pose_spread",
    )

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        unknown = set(raw) - set(cls._FIELDS)
        if unknown:
            raise InvalidScenario(f"unknown scenario keys {sorted(unknown)}")
        for required in ("n_identities", "images_per_identity", "dim", "seed"):
            if required not in raw:
                raise InvalidScenario(f"scenario is missing {required!r}")
        return cls(**raw)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self._FIELDS}

    def cluster_weights(self, ethnicity: str) -> np.ndarray:
        """Cluster-assignment distribution for one ethnicity.

        A lift delta raises the same-level collision probability (= the
        subgroup's would-be FPR) to 1/k + delta. When that target equals
        1/m for an integer m, the level simply uses m of the k clusters
        uniformly; the conditional collision probability is then constant
        across identities, so pair outcomes stay independent Bernoullis
        and downstream estimators see pure binomial noise. Otherwise one
        cluster takes extra mass (same expectation, noisier estimators).
        """
        k = self.n_clusters
        delta = self.fpr_lift.get(ethnicity, 0.0)
        if delta <= 0:
            return np.full(k, 1.0 / k)
        target = 1.0 / k + delta
        start = ETHNICITIES.index(ethnicity) % k
        m = round(1.0 / target)
        if m >= 1 and abs(1.0 / m - target) < 1e-9:
            weights = np.zeros(k)
            weights[[(start + j) % k for j in range(m)]] = 1.0 / m
            return weights
        weights = np.full(k, 1.0 / k - math.sqrt(delta / (k * (k - 1))))
        weights[start] = 1.0 / k + math.sqrt(delta * (k - 1) / k)
        return weights


@dataclass
class GroundTruth:
    cluster_weights: dict[str, list[float]]
    expected_fpr: dict[str, float]  # ethnicity combo -> P(negative pair is close)
    expected_tpr: dict[str, float]  # ethnicity level -> P(positive pair is close)
    sigma: dict[str, float]
    base_fpr: float

    def to_dict(self) -> dict:
        return {
            "cluster_weights": self.cluster_weights,
            "expected_fpr": self.expected_fpr,
            "expected_tpr": self.expected_tpr,
            "sigma": self.sigma,
            "base_fpr": self.base_fpr,
        }


def _ground_truth(scenario: Scenario) -> GroundTruth:
    k = scenario.n_clusters
    weights = {level: scenario.cluster_weights(level) for level in ETHNICITIES}
    expected_fpr = {}
    for i, a in enumerate(ETHNICITIES):
        for b in ETHNICITIES[i:]:
            expected_fpr[combo(a, b)] = float(weights[a] @ weights[b])
    expected_tpr = {}
    for level in ETHNICITIES:
        miss = scenario.tpr_miss.get(level, 0.0)
        # both images stay on the identity axis, or both miss to the same axis
        expected_tpr[level] = (1.0 - miss) ** 2 + miss**2 / (k - 1)
    sigma = {
        level: scenario.spread.get(level, scenario.noise_sigma) for level in ETHNICITIES
    }
    return GroundTruth(
        cluster_weights={lv: w.tolist() for lv, w in weights.items()},
        expected_fpr=expected_fpr,
        expected_tpr=expected_tpr,
        sigma=sigma,
        base_fpr=1.0 / k,
    )


def _sample_poses(rng, scenario: Scenario, multiplier: float, count: int) -> np.ndarray:
    columns = []
    for axis in ("pitch", "yaw", "roll"):
        spec = scenario.pose[axis]
        family = spec.get("family", "normal")
        loc = float(spec.get("loc", 0.0))
        scale = float(spec.get("scale", 1.0)) * multiplier
        draw = rng.normal if family == "normal" else rng.laplace
        columns.append(np.clip(draw(loc, scale, size=count), -180.0, 180.0))
    return np.column_stack(columns)


def generate(scenario: Scenario) -> tuple[Corpus, GroundTruth]:
    """Generate a corpus realizing the scenario, plus its ground truth."""
    scenario.validate()
    truth = _ground_truth(scenario)
    levels_g = list(GENDERS)
    levels_e = list(ETHNICITIES)
    levels_a = list(AGE_GROUPS)
    probs_g = np.array([scenario.gender.get(g, 0.0) for g in levels_g])
    probs_e = np.array([scenario.ethnicity.get(e, 0.0) for e in levels_e])
    probs_a = np.array([scenario.age.get(a, 0.0) for a in levels_a])

    ids = []
    blocks = []
    images: dict[int, ImageRecord] = {}
    ipp = scenario.images_per_identity
    cluster_weights = {e: scenario.cluster_weights(e) for e in levels_e}
    for identity_index in range(scenario.n_identities):
        identity_id = identity_index + 1
        rng = np.random.default_rng([scenario.seed, identity_id])
        gender = levels_g[rng.choice(len(levels_g), p=probs_g)]
        ethnicity = levels_e[rng.choice(len(levels_e), p=probs_e)]
        axis = int(rng.choice(scenario.n_clusters, p=cluster_weights[ethnicity]))
        sigma = scenario.spread.get(ethnicity, scenario.noise_sigma)
        miss = scenario.tpr_miss.get(ethnicity, 0.0)
        pose_mult = scenario.pose_spread.get(ethnicity, 1.0)

        # one batch of draws per identity keeps output order-independent
        axes = np.full(ipp, axis)
        missed = rng.random(ipp) < miss
        offsets = 1 + rng.integers(0, scenario.n_clusters - 1, size=ipp)
        axes[missed] = (axes[missed] + offsets[missed]) % scenario.n_clusters
        block = sigma * rng.standard_normal((ipp, scenario.dim))
        block[np.arange(ipp), axes] += 1.0
        block /= np.sqrt((block**2).sum(axis=1))[:, None]
        blocks.append(block)
        ages = rng.choice(len(levels_a), size=ipp, p=probs_a)
        poses = None if scenario.pose is None else _sample_poses(rng, scenario, pose_mult, ipp)

        for j in range(ipp):
            image_id = identity_index * ipp + j + 1
            ids.append(image_id)
            images[image_id] = ImageRecord(
                image_id=image_id,
                identity_id=identity_id,
                gender=gender,
                ethnicity=ethnicity,
                age_group=levels_a[ages[j]],
                pose=None if poses is None else tuple(float(a) for a in poses[j]),
            )

    embeddings = EmbeddingSet(np.array(ids, dtype=np.uint64), np.vstack(blocks))
    return Corpus(embeddings=embeddings, images=images), truth
