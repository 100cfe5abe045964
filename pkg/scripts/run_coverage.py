"""CI coverage and normality of the standardised alpha estimates.

Sigma_n is the replicate covariance of e_n at the truth; each replicate's
interval uses H_n at its own estimate.
"""

import argparse
import json

from dppest.harness.config import StudyConfig, default_jobs
from dppest.harness.study import coverage_study, run_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/coverage.json")
    ap.add_argument("--out", default="results/coverage")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()
    config = StudyConfig.load(args.config)
    report = run_study(config, jobs=args.jobs or default_jobs())
    report.write(args.out, config.name)
    for ci in range(len(config.cells)):
        for m in config.methods:
            res = coverage_study(config, report, ci, m.label)
            print(config.cells[ci].label, m.label, json.dumps(res))


if __name__ == "__main__":
    main()
