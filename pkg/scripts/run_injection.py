#!/usr/bin/env python3
"""Run both knowledge-injection experiments.

Head pretraining fits binary token-relation targets with the body frozen;
the needle experiment trains the bracket-grammar tagger with late and
early layer placements and reports them side by side.
"""

import argparse
import json
from pathlib import Path

from statutelab.experiments import hydra_experiment, tre_position_comparison


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", default="runs/injection")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    head_report, head_blob = hydra_experiment(args.seed)
    (out / "heads.slrk").write_bytes(head_blob)
    comparison = tre_position_comparison(args.seed)
    report = {"head_pretraining": head_report, "needle_positions": comparison}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report["head_pretraining"], indent=2, sort_keys=True))
    print(
        f"needle positions: late F1 {comparison['late_f1']:.3f} vs "
        f"early F1 {comparison['early_f1']:.3f} "
        f"(late >= early: {comparison['late_ge_early']})"
    )


if __name__ == "__main__":
    main()
