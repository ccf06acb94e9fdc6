"""Fairness auditing for face verification over embedding corpora."""

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    AGE_GROUPS,
    Corpus,
    EmbeddingSet,
    ETHNICITIES,
    GENDERS,
    IdentityRecord,
    ImageRecord,
    load_corpus,
    normalize,
    save_corpus,
)
from .errors import FairbenchError  # noqa: E402
from .geometry import pair_distance, rotation_angle, top_k  # noqa: E402
from .pairs import (  # noqa: E402
    PairSet,
    VerificationPair,
    attach_distances,
    build_random_pairs,
    combo_histogram,
    harden_pairs,
    label_pairs,
    read_pairs,
    write_pairs,
)
from .verify import (  # noqa: E402
    centroid_dispersion,
    gap_matrix,
    select_threshold,
    subgroup_metrics,
)
from .poseclass import assign_pose_class, even_sample, fit_axis_thresholds  # noqa: E402
from .balance import balance_score, dedup_filter, greedy_flatten, plan_quotas  # noqa: E402
from .stats import (  # noqa: E402
    build_design,
    logit_fit,
    marginal_effects,
    ols_anova,
    wald_p,
)
from .synth import GroundTruth, Scenario, generate  # noqa: E402
from .audit import AuditConfig, run_audit  # noqa: E402
from .report import canonical_json  # noqa: E402

__all__ = [
    "AGE_GROUPS",
    "AuditConfig",
    "Corpus",
    "EmbeddingSet",
    "ETHNICITIES",
    "FairbenchError",
    "GENDERS",
    "GroundTruth",
    "IdentityRecord",
    "ImageRecord",
    "PairSet",
    "Scenario",
    "VerificationPair",
    "assign_pose_class",
    "attach_distances",
    "balance_score",
    "build_design",
    "build_random_pairs",
    "canonical_json",
    "centroid_dispersion",
    "combo_histogram",
    "dedup_filter",
    "even_sample",
    "fit_axis_thresholds",
    "gap_matrix",
    "generate",
    "greedy_flatten",
    "harden_pairs",
    "label_pairs",
    "load_corpus",
    "logit_fit",
    "marginal_effects",
    "normalize",
    "ols_anova",
    "pair_distance",
    "plan_quotas",
    "read_pairs",
    "rotation_angle",
    "run_audit",
    "save_corpus",
    "select_threshold",
    "subgroup_metrics",
    "top_k",
    "wald_p",
    "write_pairs",
]
