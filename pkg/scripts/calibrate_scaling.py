"""Freeze the per-rule constants K in ``steps <= K n log^2 n`` from one sweep.

Usage: python scripts/calibrate_scaling.py [--jobs J]

Writes tests/data/scaling_calibration.json. The acceptance suite re-runs the
same sweep (same seeds) and checks the frozen constants against it.
"""

from __future__ import annotations

import argparse
import json
import math
from collections import defaultdict
from pathlib import Path

from fliplab.dynamics import RULES
from fliplab.experiments import default_jobs, run_sweep
from fliplab.weights import WeightModel

NS = (32, 64, 128, 256, 512)
TRIALS = 50
SEED = 0
PHI = 0.5


def _round_up(x: float, digits: int = 3) -> float:
    e = math.floor(math.log10(x)) - digits + 1
    return math.ceil(x / 10**e) * 10**e


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=default_jobs())
    args = ap.parse_args()
    recs = run_sweep(WeightModel(phi=PHI, master_seed=SEED), NS, TRIALS, RULES, jobs=args.jobs)
    ratio = defaultdict(list)
    for r in recs:
        ratio[r.rule].append(r.steps / (r.n * math.log(r.n) ** 2))
    out = {
        "ns": list(NS), "trials": TRIALS, "seed": SEED, "phi": PHI,
        "form": "steps <= K * n * ln(n)**2",
        "K": {rule: round(_round_up(max(v)), 10) for rule, v in ratio.items()},
        "max_ratio": {rule: max(v) for rule, v in ratio.items()},
    }
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "scaling_calibration.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
