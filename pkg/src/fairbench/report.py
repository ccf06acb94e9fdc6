"""Audit report assembly and canonical serialization.

report.json must be byte-identical across runs on the same inputs, so
serialization is fully canonical: keys sorted, floats rendered with 17
significant digits, ASCII-only escapes. CSV exports reuse the same
float rendering.
"""

from __future__ import annotations

import csv
import json
import math

from .balance import BalanceScore
from .poseclass import AxisThresholds
from .stats import LogitFit, MarginalEffect, OlsFit
from .verify import DispersionSummary, GapMatrix, SubgroupMetrics, ThresholdResult

REPORT_FORMAT = 1


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite value {x} cannot enter a report")
    return format(x, ".17g")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, fixed float formatting, ASCII escapes."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        for key in obj:
            if not isinstance(key, str):
                raise TypeError(f"report keys must be strings, got {key!r}")
        parts = (f"{json.dumps(k)}:{canonical_json(obj[k])}" for k in sorted(obj))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def write_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(canonical_json(report))
        f.write("\n")


# -- converters to plain dicts --------------------------------------------

def threshold_to_dict(result: ThresholdResult) -> dict:
    return {
        "threshold": result.threshold,
        "mode": result.mode,
        "accuracy": result.accuracy,
        "per_fold": None
        if result.per_fold is None
        else [{"threshold": f.threshold, "accuracy": f.accuracy} for f in result.per_fold],
    }


def subgroup_to_dict(m: SubgroupMetrics) -> dict:
    return {
        "key": m.key,
        "n": m.n,
        "n_pos": m.n_pos,
        "n_neg": m.n_neg,
        "accuracy": m.accuracy,
        "tpr": m.tpr,
        "fpr": m.fpr,
        "tnr": m.tnr,
    }


def gap_to_dict(g: GapMatrix) -> dict:
    return {
        "metric": g.metric,
        "levels": list(g.levels),
        "values": [list(row) for row in g.values],
        "excluded": list(g.excluded),
    }


def ols_to_dict(fit: OlsFit, n_rows: int, n_dropped: int) -> dict:
    return {
        "coefficients": dict(fit.coefficients),
        "r_squared": fit.r_squared,
        "anova": [
            {"term": t.term, "sum_sq": t.sum_sq, "eta_sq": t.eta_sq} for t in fit.anova
        ],
        "diagnostics": {
            "normality_stat": fit.diagnostics.normality_stat,
            "normality_p": fit.diagnostics.normality_p,
            "homosked_stat": fit.diagnostics.homosked_stat,
            "homosked_p": fit.diagnostics.homosked_p,
        },
        "n_rows": n_rows,
        "n_dropped_missing_pose": n_dropped,
    }


def logit_to_dict(
    fit: LogitFit, effects: list[MarginalEffect], columns: list[str],
    references: dict[str, str], n_rows: int, n_dropped: int,
) -> dict:
    table = []
    for i, name in enumerate(columns):
        table.append(
            {
                "term": name,
                "estimate": float(fit.beta[i]),
                "std_error": float(fit.std_errors[i]),
                "z": float(fit.z_scores[i]),
                "p": float(fit.p_values[i]),
            }
        )
    return {
        "coefficients": table,
        "log_likelihood": fit.log_likelihood,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "references": dict(references),
        "marginal_effects": [
            {
                "term": e.term,
                "level": e.level,
                "reference": e.reference,
                "effect": e.effect,
                "p_value": e.p_value,
                "significant": e.significant,
            }
            for e in effects
        ],
        "n_rows": n_rows,
        "n_dropped_missing_pose": n_dropped,
    }


def balance_to_dict(scores: dict[str, BalanceScore | None]) -> dict:
    out = {}
    for attr, score in scores.items():
        out[attr] = (
            None
            if score is None
            else {"score": score.score, "class_counts": dict(score.class_counts)}
        )
    return out


def pose_to_dict(thresholds: tuple[AxisThresholds, ...]) -> dict:
    return {
        t.axis: {
            "t_lo": t.t_lo,
            "t_hi": t.t_hi,
            "fractions": {
                "low": t.fractions[0],
                "neutral": t.fractions[1],
                "high": t.fractions[2],
            },
        }
        for t in thresholds
    }


def dispersion_to_dict(summaries: list[DispersionSummary]) -> dict:
    return {
        s.group: {
            "n": s.n,
            "mean": s.mean,
            "median": s.median,
            "q10": s.q10,
            "q90": s.q90,
        }
        for s in summaries
    }


# -- CSV tables ------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _fmt_float(value)
    return str(value)


def write_subgroups_csv(subgroups: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["key", "n", "n_pos", "n_neg", "accuracy", "tpr", "fpr", "tnr"])
        for m in subgroups:
            writer.writerow([_cell(m[c]) for c in
                             ("key", "n", "n_pos", "n_neg", "accuracy", "tpr", "fpr", "tnr")])


def write_regression_csv(logit: dict | None, anova: dict | None, path) -> None:
    """Combined regression table: term, estimate, std_error, z, p, eta_squared."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["term", "estimate", "std_error", "z", "p", "eta_squared"])
        if logit is not None:
            for row in logit["coefficients"]:
                writer.writerow(
                    [row["term"], _cell(row["estimate"]), _cell(row["std_error"]),
                     _cell(row["z"]), _cell(row["p"]), ""]
                )
        if anova is not None:
            for row in anova["anova"]:
                writer.writerow([row["term"], "", "", "", "", _cell(row["eta_sq"])])


def write_balance_csv(columns: dict[str, dict], path) -> None:
    """Table-1-style layout: one row per attribute, one column per dataset."""
    datasets = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["attribute", *datasets])
        for attr in ("gender", "ethnicity", "age", "pose"):
            row = [attr]
            for name in datasets:
                entry = columns[name].get(attr)
                row.append("" if entry is None else _cell(entry["score"]))
            writer.writerow(row)
