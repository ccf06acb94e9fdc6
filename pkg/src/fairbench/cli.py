"""Command-line entry point.

    fairbench <validate|pairs|audit|balance|pose|synth|render>
              --config <path> [--threads N] [--out DIR] [--seed S]

Every subcommand reads one JSON config file; flags override config
values. On any module error the process exits nonzero after printing a
single machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .audit import AuditConfig, build_pairs_from_config, run_audit
from .balance import corpus_balance_scores
from .corpus import Corpus, load_corpus, normalize, save_corpus
from .errors import FairbenchError, InvalidConfig
from .pairs import label_pairs, write_pairs
from .poseclass import corpus_pose_classes, fit_corpus_pose
from .render import render_anova_svg, render_gap_svg
from .report import (
    balance_to_dict,
    canonical_json,
    pose_to_dict,
    write_balance_csv,
    write_regression_csv,
    write_report,
    write_subgroups_csv,
)
from .synth import Scenario, generate

SUBCOMMANDS = ("validate", "pairs", "audit", "balance", "pose", "synth", "render")


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise InvalidConfig(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None


def _loaded_corpus(raw: dict) -> Corpus:
    spec = raw.get("corpus")
    if not isinstance(spec, dict) or "embeddings" not in spec or "metadata" not in spec:
        raise InvalidConfig("config needs corpus.embeddings and corpus.metadata paths")
    return load_corpus(spec["embeddings"], spec["metadata"])


def _normalized(corpus: Corpus) -> Corpus:
    return Corpus(
        embeddings=normalize(corpus.embeddings),
        images=corpus.images,
        identities=corpus.identities,
    )


def cmd_validate(raw: dict, out: str, args) -> None:
    corpus = _loaded_corpus(raw)
    summary = {
        "images": len(corpus.images),
        "identities": len(corpus.identities),
        "dim": corpus.embeddings.dim,
        "with_pose": sum(1 for r in corpus.images.values() if r.pose is not None),
    }
    print(canonical_json(summary))


def cmd_pairs(raw: dict, out: str, args) -> None:
    corpus = _normalized(_loaded_corpus(raw))
    if "pairs" not in raw:
        raise InvalidConfig("config is missing 'pairs'")
    seed = raw.get("seed", 0)
    pair_set = build_pairs_from_config(corpus, raw["pairs"], seed)
    pair_set = label_pairs(corpus, pair_set)
    write_pairs(pair_set, os.path.join(out, "pairs.csv"))


def cmd_audit(raw: dict, out: str, args) -> None:
    started = time.monotonic()
    config = AuditConfig.from_dict(raw)
    report = run_audit(config)
    write_report(report, os.path.join(out, "report.json"))
    for attr, table in report.get("subgroups", {}).items():
        write_subgroups_csv(table, os.path.join(out, f"subgroups_{attr}.csv"))
    logit = report.get("logit", {})
    anova = report.get("anova", {})
    for side in sorted(set(logit) | set(anova)):
        write_regression_csv(
            logit.get(side), anova.get(side), os.path.join(out, f"regression_{side}.csv")
        )
    if "balance" in report:
        write_balance_csv({"corpus": report["balance"]}, os.path.join(out, "balance.csv"))
    # timing is wall-clock and the thread bound never affects results, so
    # both live outside the byte-stable report
    with open(os.path.join(out, "timing.json"), "w", encoding="utf-8") as f:
        json.dump({"audit_seconds": time.monotonic() - started, "threads": config.threads}, f)
        f.write("\n")


def cmd_balance(raw: dict, out: str, args) -> None:
    datasets = raw.get("datasets")
    if not isinstance(datasets, list) or not datasets:
        raise InvalidConfig("balance config needs a nonempty 'datasets' list")
    columns = {}
    for entry in datasets:
        for key in ("name", "embeddings", "metadata"):
            if key not in entry:
                raise InvalidConfig(f"balance dataset entry is missing {key!r}")
        corpus = load_corpus(entry["embeddings"], entry["metadata"])
        columns[entry["name"]] = balance_to_dict(corpus_balance_scores(corpus))
    write_balance_csv(columns, os.path.join(out, "balance.csv"))


def cmd_pose(raw: dict, out: str, args) -> None:
    corpus = _loaded_corpus(raw)
    thresholds = fit_corpus_pose(corpus)
    with open(os.path.join(out, "pose_thresholds.json"), "w", encoding="utf-8") as f:
        f.write(canonical_json(pose_to_dict(thresholds)))
        f.write("\n")
    classes = corpus_pose_classes(corpus, thresholds)
    with open(os.path.join(out, "pose_classes.csv"), "w", encoding="utf-8", newline="") as f:
        f.write("image_id,pose_class\n")
        for image_id in sorted(classes):
            f.write(f"{image_id},{classes[image_id].index}\n")


def cmd_synth(raw: dict, out: str, args) -> None:
    scenario_dict = raw.get("scenario", raw)
    if args.seed is not None:
        scenario_dict = dict(scenario_dict, seed=args.seed)
    scenario = Scenario.from_dict(scenario_dict)
    corpus, truth = generate(scenario)
    save_corpus(
        corpus,
        os.path.join(out, "embeddings.femb"),
        os.path.join(out, "metadata.csv"),
    )
    with open(os.path.join(out, "ground_truth.json"), "w", encoding="utf-8") as f:
        f.write(canonical_json(truth.to_dict()))
        f.write("\n")
    with open(os.path.join(out, "scenario.json"), "w", encoding="utf-8") as f:
        f.write(canonical_json(scenario.to_dict()))
        f.write("\n")


def cmd_render(raw: dict, out: str, args) -> None:
    report_path = raw.get("report")
    if not isinstance(report_path, str):
        raise InvalidConfig("render config needs a 'report' path")
    if not os.path.exists(report_path):
        raise InvalidConfig(f"report does not exist: {report_path}")
    with open(report_path, "r", encoding="utf-8") as f:
        report = json.load(f)
    metric = raw.get("metric", "accuracy")
    for attr, by_metric in report.get("gaps", {}).items():
        chosen = by_metric.get(metric) or by_metric[sorted(by_metric)[0]]
        svg = render_gap_svg(chosen, f"{attr} gaps")
        with open(os.path.join(out, f"gaps_{attr}.svg"), "w", encoding="utf-8") as f:
            f.write(svg)
            f.write("\n")
    if "anova" in report:
        with open(os.path.join(out, "anova.svg"), "w", encoding="utf-8") as f:
            f.write(render_anova_svg(report["anova"]))
            f.write("\n")


_HANDLERS = {
    "validate": cmd_validate,
    "pairs": cmd_pairs,
    "audit": cmd_audit,
    "balance": cmd_balance,
    "pose": cmd_pose,
    "synth": cmd_synth,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="fairbench", description=__doc__)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides the config's 'out')")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("FAIRBENCH_THREADS", "1")),
        help="worker bound (never affects outputs)",
    )
    args = parser.parse_args(argv)

    try:
        raw = _load_config(args.config)
        if not isinstance(raw, dict):
            raise InvalidConfig("config must be a JSON object")
        # 'out' is a location, not a semantic input: the CLI layer consumes it
        # so reports stay byte-identical wherever they are written
        out = raw.pop("out", ".")
        if args.out is not None:
            out = args.out
        if not isinstance(out, str):
            raise InvalidConfig("'out' must be a directory path string")
        if args.seed is not None and args.subcommand != "synth":
            raw["seed"] = args.seed
        if args.subcommand == "audit":
            raw.setdefault("threads", args.threads)
        os.makedirs(out, exist_ok=True)
        _HANDLERS[args.subcommand](raw, out, args)
    except FairbenchError as exc:
        sys.stderr.write(
            json.dumps({"error": exc.code, "message": exc.message or str(exc)}) + "\n"
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
