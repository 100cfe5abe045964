"""Desk-scale RMSE table for truncated and adaptive weights.

    python scripts/run_table1.py --config configs/table1_desk.json --out results/table1
"""

import argparse
import time

from dppest.harness.config import StudyConfig, default_jobs
from dppest.harness.study import run_study


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default="configs/table1_desk.json")
    ap.add_argument("--out", default="results/table1")
    ap.add_argument("--jobs", type=int, default=None)
    ap.add_argument("--replicates", type=int, default=None, help="override the config's replicate count")
    args = ap.parse_args()
    config = StudyConfig.load(args.config)
    if args.replicates:
        config = StudyConfig.from_dict({**config.to_dict(), "replicates": args.replicates})
    t0 = time.perf_counter()
    report = run_study(config, jobs=args.jobs or default_jobs(),
                       progress=lambda i, n: print(f"\r{i}/{n}", end="", flush=True))
    print(f"\n{time.perf_counter() - t0:.0f} s")
    report.write(args.out, config.name)
    print(report.to_text(), end="")


if __name__ == "__main__":
    main()
