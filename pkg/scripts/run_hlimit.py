"""H_n on growing squares against its large-window limit."""

import argparse

from dppest.harness.hlimit import format_table, h_limit_check
from dppest.inference.testfunctions import parse_method


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rho", type=float, default=100.0)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--method", default="adaptive:eps=0.01")
    ap.add_argument("--layout", choices=["two-step", "simultaneous"], default="two-step")
    ap.add_argument("--ladder", type=float, nargs="+", default=[1.0, 2.0, 3.0, 4.0])
    args = ap.parse_args()
    limit, rows = h_limit_check(args.rho, args.alpha, ladder=tuple(args.ladder), layout=args.layout,
                                tf=parse_method(args.method))
    print(format_table(limit, rows), end="")


if __name__ == "__main__":
    main()
