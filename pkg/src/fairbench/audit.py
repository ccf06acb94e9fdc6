"""Declarative audit configuration and the in-process audit pipeline.

The same pipeline backs the CLI ``audit`` subcommand and programmatic
callers, so a given config always produces the same report dict (and,
serialized, the same bytes).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .balance import corpus_balance_scores
from .corpus import Corpus, load_corpus, normalize
from .errors import InvalidConfig
from .pairs import (
    NEGATIVE,
    POSITIVE,
    PairSet,
    attach_distances,
    build_random_pairs,
    harden_pairs,
    label_pairs,
    read_pairs,
)
from .poseclass import fit_corpus_pose
from .report import (
    REPORT_FORMAT,
    balance_to_dict,
    dispersion_to_dict,
    gap_to_dict,
    logit_to_dict,
    ols_to_dict,
    pose_to_dict,
    subgroup_to_dict,
    threshold_to_dict,
)
from .stats import build_design, logit_fit, marginal_effects, ols_anova
from .verify import centroid_dispersion, gap_matrix, select_threshold, subgroup_metrics

ANALYSES = ("subgroups", "gaps", "anova", "logit", "balance", "pose", "dispersion")
ATTRIBUTES = ("gender", "age", "ethnicity")
GAP_METRICS = ("accuracy", "tpr", "fpr", "tnr")
SIDES = ("positive", "negative")


def _require_keys(raw: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise InvalidConfig(f"unknown key {unknown[0]!r} in {where}")


def _check_pair_source(raw: dict, where: str = "pairs") -> dict:
    if not isinstance(raw, dict) or "source" not in raw:
        raise InvalidConfig(f"{where} must be an object with a 'source'")
    source = raw["source"]
    if source == "random":
        _require_keys(raw, {"source", "n_pos", "n_neg", "seed"}, where)
        for k in ("n_pos", "n_neg"):
            if not isinstance(raw.get(k), int) or raw[k] < 0:
                raise InvalidConfig(f"{where}.{k} must be a non-negative integer")
    elif source == "file":
        _require_keys(raw, {"source", "path"}, where)
        if not isinstance(raw.get("path"), str):
            raise InvalidConfig(f"{where}.path must be a string")
    elif source == "harden":
        _require_keys(raw, {"source", "base"}, where)
        _check_pair_source(raw.get("base"), f"{where}.base")
    else:
        raise InvalidConfig(f"{where}.source must be random/file/harden, got {source!r}")
    return dict(raw)


@dataclass
class AuditConfig:
    corpus: dict
    pairs: dict
    threshold: dict = field(default_factory=lambda: {"mode": "global"})
    restrict: str = "all"
    analyses: list[str] = field(default_factory=lambda: ["subgroups", "gaps"])
    attributes: list[str] = field(default_factory=lambda: list(ATTRIBUTES))
    gap_metrics: list[str] = field(default_factory=lambda: list(GAP_METRICS))
    anova: dict = field(default_factory=lambda: {"terms": ["gender", "age", "ethnicity", "pose"],
                                                 "sides": ["positive", "negative"]})
    logit: dict = field(default_factory=lambda: {"terms": ["gender", "age", "ethnicity", "pose"],
                                                 "sides": ["positive", "negative"]})
    dispersion: dict = field(default_factory=lambda: {"grouping": "ethnicity"})
    seed: int = 0
    threads: int = 1

    _KEYS = ("corpus", "pairs", "threshold", "restrict", "analyses", "attributes",
             "gap_metrics", "anova", "logit", "dispersion", "seed", "threads")

    @classmethod
    def from_dict(cls, raw: dict) -> "AuditConfig":
        if not isinstance(raw, dict):
            raise InvalidConfig("config must be a JSON object")
        _require_keys(raw, set(cls._KEYS), "config")
        for required in ("corpus", "pairs"):
            if required not in raw:
                raise InvalidConfig(f"config is missing {required!r}")
        cfg = cls(**{k: raw[k] for k in raw})
        cfg.validate()
        return cfg

    def validate(self) -> None:
        _require_keys(self.corpus, {"embeddings", "metadata"}, "corpus")
        for k in ("embeddings", "metadata"):
            if not isinstance(self.corpus.get(k), str):
                raise InvalidConfig(f"corpus.{k} must be a path string")
            if not os.path.exists(self.corpus[k]):
                raise InvalidConfig(f"corpus.{k} does not exist: {self.corpus[k]}")
        _check_pair_source(self.pairs)
        if self.pairs["source"] == "file" and not os.path.exists(self.pairs["path"]):
            raise InvalidConfig(f"pairs.path does not exist: {self.pairs['path']}")
        _require_keys(self.threshold, {"mode", "k", "shuffle_seed"}, "threshold")
        if self.threshold.get("mode") not in ("global", "kfold"):
            raise InvalidConfig("threshold.mode must be global or kfold")
        if self.restrict not in ("all", "hard", "soft"):
            raise InvalidConfig(f"restrict must be all/hard/soft, got {self.restrict!r}")
        if not self.analyses:
            raise InvalidConfig("analyses must be a nonempty list")
        for a in self.analyses:
            if a not in ANALYSES:
                raise InvalidConfig(f"unknown analysis {a!r}")
        for a in self.attributes:
            if a not in ATTRIBUTES:
                raise InvalidConfig(f"unknown attribute {a!r}")
        for m in self.gap_metrics:
            if m not in GAP_METRICS:
                raise InvalidConfig(f"unknown gap metric {m!r}")
        for name, spec in (("anova", self.anova), ("logit", self.logit)):
            _require_keys(spec, {"terms", "sides"}, name)
            for side in spec.get("sides", []):
                if side not in SIDES:
                    raise InvalidConfig(f"{name}.sides entries must be in {SIDES}")
        _require_keys(self.dispersion, {"grouping", "seed"}, "dispersion")

    def to_dict(self) -> dict:
        # threads is a pure execution bound: it never changes results, so it
        # stays out of the echoed config to keep report.json byte-stable
        return {
            "corpus": dict(self.corpus),
            "pairs": dict(self.pairs),
            "threshold": dict(self.threshold),
            "restrict": self.restrict,
            "analyses": list(self.analyses),
            "attributes": list(self.attributes),
            "gap_metrics": list(self.gap_metrics),
            "anova": dict(self.anova),
            "logit": dict(self.logit),
            "dispersion": dict(self.dispersion),
            "seed": self.seed,
        }


def build_pairs_from_config(corpus: Corpus, spec: dict, seed: int) -> PairSet:
    source = spec["source"]
    if source == "random":
        return build_random_pairs(
            corpus, spec["n_pos"], spec["n_neg"], spec.get("seed", seed)
        )
    if source == "file":
        return read_pairs(spec["path"], corpus)
    if source == "harden":
        base = build_pairs_from_config(corpus, spec["base"], seed)
        return harden_pairs(corpus, base)
    raise InvalidConfig(f"unknown pair source {source!r}")


def _side_subset(pair_set: PairSet, side: str, restrict: str) -> PairSet:
    label = POSITIVE if side == "positive" else NEGATIVE
    selected = [
        p
        for p in pair_set.pairs
        if p.label == label and (restrict == "all" or p.hardness == restrict)
    ]
    return PairSet(tuple(selected))


def run_audit(config: AuditConfig | dict) -> dict:
    """Execute the audit pipeline and return the (deterministic) report dict."""
    if isinstance(config, dict):
        config = AuditConfig.from_dict(config)
    else:
        config.validate()

    corpus = load_corpus(config.corpus["embeddings"], config.corpus["metadata"])
    corpus = Corpus(
        embeddings=normalize(corpus.embeddings),
        images=corpus.images,
        identities=corpus.identities,
    )

    pair_set = build_pairs_from_config(corpus, config.pairs, config.seed)
    pair_set = label_pairs(corpus, pair_set)
    pair_set = attach_distances(corpus, pair_set)

    threshold_spec = config.threshold
    if threshold_spec["mode"] == "kfold":
        shuffled = pair_set
        if "shuffle_seed" in threshold_spec:
            rng = np.random.default_rng(threshold_spec["shuffle_seed"])
            order = rng.permutation(len(pair_set.pairs))
            shuffled = PairSet(tuple(pair_set.pairs[i] for i in order))
        threshold_result = select_threshold(shuffled, "kfold", threshold_spec.get("k", 10))
    else:
        threshold_result = select_threshold(pair_set, "global")
    t = threshold_result.threshold

    report: dict = {
        "config": config.to_dict(),
        "versions": {"fairbench": __version__, "report_format": REPORT_FORMAT},
        "n_pairs": {
            "total": len(pair_set),
            "positive": pair_set.n_pos,
            "negative": pair_set.n_neg,
        },
        "threshold": threshold_to_dict(threshold_result),
    }

    if "subgroups" in config.analyses or "gaps" in config.analyses:
        subgroup_tables = {}
        for attr in config.attributes:
            metrics = subgroup_metrics(pair_set, t, attr, config.restrict)
            subgroup_tables[attr] = metrics
        if "subgroups" in config.analyses:
            report["subgroups"] = {
                attr: [subgroup_to_dict(m) for m in metrics]
                for attr, metrics in subgroup_tables.items()
            }
        if "gaps" in config.analyses:
            gaps: dict = {}
            for attr, metrics in subgroup_tables.items():
                gaps[attr] = {
                    metric: gap_to_dict(gap_matrix(metrics, metric))
                    for metric in config.gap_metrics
                }
            report["gaps"] = gaps

    if "anova" in config.analyses:
        out = {}
        for side in config.anova.get("sides", list(SIDES)):
            subset = _side_subset(pair_set, side, config.restrict)
            design, y = build_design(subset, "angle", config.anova.get("terms"))
            fit = ols_anova(design, y)
            out[side] = ols_to_dict(fit, design.n_rows, design.n_dropped)
        report["anova"] = out

    if "logit" in config.analyses:
        out = {}
        for side in config.logit.get("sides", list(SIDES)):
            subset = _side_subset(pair_set, side, config.restrict)
            design, y = build_design(
                subset, "correct_indicator", config.logit.get("terms"), threshold=t
            )
            fit = logit_fit(design, y)
            effects = marginal_effects(fit, design)
            out[side] = logit_to_dict(
                fit, effects, design.columns, design.references,
                design.n_rows, design.n_dropped,
            )
        report["logit"] = out

    if "balance" in config.analyses:
        report["balance"] = balance_to_dict(corpus_balance_scores(corpus))

    if "pose" in config.analyses:
        report["pose_thresholds"] = pose_to_dict(fit_corpus_pose(corpus))

    if "dispersion" in config.analyses:
        summaries, _ = centroid_dispersion(
            corpus,
            config.dispersion.get("grouping", "ethnicity"),
            config.dispersion.get("seed", config.seed),
        )
        report["dispersion"] = dispersion_to_dict(summaries)

    return report
