"""Regenerate the golden patterns and FitResult records in tests/fixtures.

Run only when an intentional numerical change moves the estimates; the diff
of the JSON files is the review artefact.
"""

import argparse
import math
from pathlib import Path

from dppest.inference.fitting import FitConfig, fit
from dppest.io import write_fit_result, write_pattern
from dppest.kernels import BesselType, Homogeneous, KernelModel, LogLinear
from dppest.numerics import SeedSpec
from dppest.sampler import sample_dpp

CASES = {
    "homogeneous": (KernelModel(Homogeneous(100.0), BesselType(0.05)), SeedSpec(42, 0), "homogeneous",
                    ["truncated:R=0.1", "adaptive:eps=0.01"], ["two-step", "simultaneous"]),
    "loglinear": (KernelModel(LogLinear((math.log(20.0), 4.0)), BesselType(0.01)), SeedSpec(42, 1), "loglinear",
                  ["adaptive:eps=0.01"], ["two-step"]),
}


def fit_name(case: str, method: str, layout: str) -> str:
    return f"{case}_{method.split(':')[0]}_{layout}.fit.json"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    for case, (model, seed, kind, methods, layouts) in CASES.items():
        pattern = sample_dpp(model, seed)
        write_pattern(pattern, out / f"{case}.csv", model=model.to_dict(),
                      seed={"master": seed.master, "replicate": seed.replicate})
        for method in methods:
            for layout in layouts:
                res = fit(pattern, method, FitConfig(layout=layout, intensity=kind))
                write_fit_result(res, out / fit_name(case, method, layout))
                print(case, res.summary())


if __name__ == "__main__":
    main()
