import math
from itertools import combinations

import numpy as np
import pytest

from fairbench.errors import InvalidScenario
from fairbench.pairs import combo
from fairbench.synth import Scenario, generate


def test_same_seed_bitwise_identical():
    scn = Scenario(n_identities=40, images_per_identity=3, dim=16, seed=123)
    corpus_a, truth_a = generate(scn)
    corpus_b, truth_b = generate(scn)
    assert np.array_equal(corpus_a.embeddings.matrix, corpus_b.embeddings.matrix)
    assert corpus_a.images == corpus_b.images
    assert truth_a.to_dict() == truth_b.to_dict()
    corpus_c, _ = generate(Scenario(n_identities=40, images_per_identity=3,
                                    dim=16, seed=124))
    assert not np.array_equal(corpus_a.embeddings.matrix, corpus_c.embeddings.matrix)


def test_generated_corpus_is_valid_and_unit_norm():
    scn = Scenario(n_identities=25, images_per_identity=4, dim=12, seed=5)
    corpus, _ = generate(scn)
    assert len(corpus.images) == 100
    assert len(corpus.identities) == 25
    assert corpus.embeddings.is_normalized()
    for rec in corpus.images.values():
        assert rec.pose is not None
        assert all(-180.0 <= a <= 180.0 for a in rec.pose)


def test_scenario_validation():
    base = dict(n_identities=10, images_per_identity=2, dim=16, seed=0)
    with pytest.raises(InvalidScenario):
        Scenario(**base, gender={"Male": 0.7, "Female": 0.2})  # sums to 0.9
    with pytest.raises(InvalidScenario):
        Scenario(**base, ethnicity={"Klingon": 1.0})
    with pytest.raises(InvalidScenario):
        Scenario(**base, n_clusters=17)  # exceeds dim
    with pytest.raises(InvalidScenario):
        Scenario(**base, fpr_lift={"Black": 0.95})
    with pytest.raises(InvalidScenario):
        Scenario(**base, pose={"pitch": {"family": "cauchy"}})
    with pytest.raises(InvalidScenario):
        Scenario.from_dict({**base, "bogus_key": 1})
    with pytest.raises(InvalidScenario):
        Scenario.from_dict({"n_identities": 10})


def test_scenario_dict_roundtrip():
    scn = Scenario(n_identities=10, images_per_identity=2, dim=16, seed=0,
                   fpr_lift={"Black": 0.1})
    again = Scenario.from_dict(scn.to_dict())
    assert again.to_dict() == scn.to_dict()


def test_attribute_marginals_within_3_sigma():
    proportions = {"White": 0.46, "Black": 0.38, "Asian": 0.08, "Indian": 0.08}
    scn = Scenario(n_identities=600, images_per_identity=2, dim=16, seed=77,
                   ethnicity=proportions)
    corpus, _ = generate(scn)
    counts = {level: 0 for level in proportions}
    for identity in corpus.identities.values():
        counts[identity.ethnicity] += 1
    n = len(corpus.identities)
    for level, p in proportions.items():
        bound = 3.0 * math.sqrt(p * (1 - p) / n)
        assert abs(counts[level] / n - p) <= bound, level


def test_ground_truth_fpr_closed_form():
    scn = Scenario(n_identities=10, images_per_identity=2, dim=16, seed=1,
                   fpr_lift={"Black": 0.1})
    _, truth = generate(scn)
    assert truth.base_fpr == pytest.approx(0.1)
    assert truth.expected_fpr[combo("Black", "Black")] == pytest.approx(0.2, abs=1e-12)
    for a, b in combinations(["White", "Asian", "Indian"], 2):
        assert truth.expected_fpr[combo(a, b)] == pytest.approx(0.1, abs=1e-12)
    assert truth.expected_fpr[combo("Black", "White")] == pytest.approx(0.1, abs=1e-12)
    weights = np.array(truth.cluster_weights["Black"])
    assert weights.sum() == pytest.approx(1.0)
    assert (weights >= 0).all()


def test_planted_fpr_realized_geometrically():
    scn = Scenario(n_identities=400, images_per_identity=2, dim=32, seed=9,
                   ethnicity={"White": 0.5, "Black": 0.5, "Asian": 0.0, "Indian": 0.0},
                   fpr_lift={"Black": 0.1})
    corpus, truth = generate(scn)
    # one image per identity; a "close" cross-identity pair is a would-be FP
    first_image = {i: corpus.identities[i].image_ids[0] for i in corpus.identities}
    by_eth = {"White": [], "Black": []}
    for identity in corpus.identities.values():
        by_eth[identity.ethnicity].append(first_image[identity.identity_id])
    for eth_a, eth_b in [("Black", "Black"), ("White", "White"), ("Black", "White")]:
        if eth_a == eth_b:
            pairs = list(combinations(by_eth[eth_a], 2))
        else:
            pairs = [(a, b) for a in by_eth[eth_a] for b in by_eth[eth_b]]
        rows_a = [corpus.embeddings.row(a) for a, _ in pairs]
        rows_b = [corpus.embeddings.row(b) for _, b in pairs]
        d = np.sqrt(((corpus.embeddings.matrix[rows_a]
                      - corpus.embeddings.matrix[rows_b]) ** 2).sum(axis=1))
        close = float((d <= 1.0).mean())
        want = truth.expected_fpr[combo(eth_a, eth_b)]
        bound = 4.0 * math.sqrt(want * (1 - want) / len(pairs))
        assert abs(close - want) <= bound, (eth_a, eth_b, close, want)


def test_planted_tpr_miss_realized():
    scn = Scenario(n_identities=500, images_per_identity=2, dim=32, seed=21,
                   ethnicity={"White": 1.0, "Black": 0.0, "Asian": 0.0, "Indian": 0.0},
                   tpr_miss={"White": 0.2})
    corpus, truth = generate(scn)
    close = []
    for identity in corpus.identities.values():
        a, b = identity.image_ids[:2]
        d = float(np.sqrt(((corpus.embeddings.vector(a)
                            - corpus.embeddings.vector(b)) ** 2).sum()))
        close.append(d <= 1.0)
    want = truth.expected_tpr["White"]
    assert want == pytest.approx((1 - 0.2) ** 2 + 0.2**2 / 9, abs=1e-12)
    bound = 4.0 * math.sqrt(want * (1 - want) / len(close))
    assert abs(np.mean(close) - want) <= bound


def test_subgroup_spread_orders_dispersion():
    from fairbench.verify import centroid_dispersion

    scn = Scenario(n_identities=200, images_per_identity=1, dim=16, seed=3,
                   ethnicity={"White": 0.5, "Black": 0.5, "Asian": 0.0, "Indian": 0.0},
                   spread={"White": 0.1, "Black": 0.3})
    corpus, _ = generate(scn)
    summaries, _ = centroid_dispersion(corpus, "ethnicity", seed=0)
    by_group = {s.group: s for s in summaries}
    assert by_group["Black"].mean > by_group["White"].mean


def test_pose_disabled():
    scn = Scenario(n_identities=10, images_per_identity=2, dim=16, seed=0, pose=None)
    corpus, _ = generate(scn)
    assert all(rec.pose is None for rec in corpus.images.values())
