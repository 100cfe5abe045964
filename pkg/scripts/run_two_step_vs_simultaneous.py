"""RMSE of N/|W| against the simultaneous intensity estimate with alpha fixed at the truth."""

import argparse

from dppest.harness.config import StudyConfig, default_jobs
from dppest.harness.study import run_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/two_step_vs_simultaneous.json")
    ap.add_argument("--out", default="results/two_step_vs_simultaneous")
    ap.add_argument("--jobs", type=int, default=None)
    args = ap.parse_args()
    config = StudyConfig.load(args.config)
    report = run_study(config, jobs=args.jobs or default_jobs())
    report.write(args.out, config.name)
    for row in report.rows:
        if row["parameter"] == "rho":
            print(f"{row['cell']:<22}{row['method']:<26}rmse {row['rmse']:.3f} (se {row['rmse_se']:.3f}) "
                  f"bias {row['bias']:+.3f}")


if __name__ == "__main__":
    main()
