#!/usr/bin/env python3
"""End-to-end demo: synthesize a corpus, audit it, render the figures.

Writes everything under --out (default ./demo_out): the corpus files,
pairs.csv, report.json with subgroup/gap/regression tables, and the SVG
heatmaps and stacked variance bars.
"""

import argparse
import json
import os

from fairbench.cli import main as fairbench


def run(argv):
    code = fairbench(argv)
    if code != 0:
        raise SystemExit(code)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_out")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    scenario = {
        "n_identities": 800, "images_per_identity": 5, "dim": 32,
        "seed": args.seed,
        "ethnicity": {"White": 0.4, "Black": 0.3, "Asian": 0.15, "Indian": 0.15},
        "fpr_lift": {"Black": 0.1},
        "spread": {"Asian": 0.2},
    }
    scenario_path = os.path.join(args.out, "scenario.json")
    with open(scenario_path, "w") as f:
        json.dump(scenario, f, indent=2)
    run(["synth", "--config", scenario_path, "--out", args.out])

    audit = {
        "corpus": {"embeddings": os.path.join(args.out, "embeddings.femb"),
                   "metadata": os.path.join(args.out, "metadata.csv")},
        "pairs": {"source": "random", "n_pos": 6000, "n_neg": 6000,
                  "seed": args.seed},
        "analyses": ["subgroups", "gaps", "anova", "logit", "balance", "pose",
                     "dispersion"],
        "gap_metrics": ["accuracy", "tpr", "fpr", "tnr"],
        "logit": {"terms": ["gender", "age", "ethnicity", "pose"],
                  "sides": ["negative"]},
        "anova": {"terms": ["gender", "age", "ethnicity", "pose"],
                  "sides": ["positive", "negative"]},
        "seed": args.seed,
    }
    audit_path = os.path.join(args.out, "audit.json")
    with open(audit_path, "w") as f:
        json.dump(audit, f, indent=2)
    run(["audit", "--config", audit_path, "--out", args.out])

    render_path = os.path.join(args.out, "render.json")
    with open(render_path, "w") as f:
        json.dump({"report": os.path.join(args.out, "report.json"),
                   "metric": "fpr"}, f)
    run(["render", "--config", render_path, "--out", args.out])

    with open(os.path.join(args.out, "report.json")) as f:
        report = json.load(f)
    print(f"threshold: {report['threshold']['threshold']:.4f} "
          f"(accuracy {report['threshold']['accuracy']:.4f})")
    print(f"artifacts in {args.out}/: report.json, balance.csv, "
          f"gaps_*.svg, anova.svg")


if __name__ == "__main__":
    main()
