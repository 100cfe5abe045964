"""Command line: ``dppest simulate | fit | study | check``.

Exit codes: 0 success, 1 validation error, 2 numerical failure. Errors are
also written to stderr as one JSON object.
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from ..inference.fitting import FitConfig, fit
from ..inference.testfunctions import parse_method
from ..io import read_pattern, write_fit_result, write_pattern
from ..kernels import FAMILIES
from ..numerics import NumericalError
from ..sampler import SamplerStall, sample_dpp
from .checks import CHECKS, run_checks
from .config import ConfigError, StudyConfig, default_jobs
from .study import run_study

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class NumericalFailure(Exception):
    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}


def _fail(code: int, kind: str, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}) + "\n")
    return code


def parse_model(spec: str) -> tuple[str, str, tuple[str, ...]]:
    """``family[:homogeneous|:loglinear[(1,x,y)]]`` -> (family, intensity kind, covariates)."""
    m = re.fullmatch(r"\s*(\w+)\s*(?::\s*(homogeneous|loglinear)\s*(?:\(([^)]*)\))?)?\s*", spec)
    if not m or m.group(1) not in FAMILIES:
        raise click.BadParameter(f"cannot parse model {spec!r}; expected e.g. bessel or bessel:loglinear(1,x)")
    covs = tuple(c.strip() for c in m.group(3).split(",")) if m.group(3) else ("1", "x")
    return m.group(1), m.group(2) or "homogeneous", covs


@click.group()
def cli():
    """Simulate and fit determinantal point processes."""


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
def simulate(config_path, out):
    """Write one pattern CSV (+ JSON sidecar) per cell and replicate."""
    config = StudyConfig.load(config_path)
    out = Path(out)
    for ci, cell in enumerate(config.cells):
        model = cell.model(config.family, config.window_obj)
        for r in range(config.replicates):
            seed = config.seed(ci, r)
            pattern = sample_dpp(model, seed)
            write_pattern(pattern, out / f"cell{ci:02d}_rep{r:04d}.csv", model=model.to_dict(),
                          seed={"master": seed.master, "replicate": seed.replicate})
    click.echo(f"wrote {len(config.cells) * config.replicates} patterns to {out}")


@cli.command("fit")
@click.option("--pattern", "pattern_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_spec", default="bessel", show_default=True)
@click.option("--method", default="adaptive:eps=0.01", show_default=True)
@click.option("--layout", type=click.Choice(["two-step", "simultaneous"]), default="two-step", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="FitResult JSON path")
def fit_cmd(pattern_path, model_spec, method, layout, out):
    """Fit one pattern and print a summary line."""
    family, kind, covs = parse_model(model_spec)
    try:
        tf = parse_method(method)
    except (KeyError, ValueError) as exc:
        raise click.BadParameter(str(exc), param_hint="--method") from exc
    pattern, _ = read_pattern(pattern_path)
    config = FitConfig(layout=layout, family=family, intensity=kind, covariates=covs)
    res = fit(pattern, tf, config)
    out = Path(out) if out else Path(pattern_path).with_suffix(".fit.json")
    write_fit_result(res, out)
    click.echo(res.summary())
    if not res.converged:
        raise NumericalFailure(f"fit did not converge: {res.status}", {"status": res.status, "result": str(out)})


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", type=int, default=None, help="worker processes (default: $DPPEST_JOBS or 1)")
def study(config_path, out, jobs):
    """Run every replicate of every cell and write the report."""
    config = StudyConfig.load(config_path)
    jobs = jobs if jobs is not None else default_jobs()
    if jobs < 1:
        raise click.BadParameter("--jobs must be >= 1")
    report = run_study(config, jobs=jobs)
    report.write(out, config.name)
    click.echo(report.to_text(), nl=False)


@cli.command()
@click.option("--only", multiple=True, type=click.Choice(sorted(CHECKS)))
def check(only):
    """Run the oracle and invariant checks."""
    results = run_checks(list(only) or None)
    for r in results:
        click.echo(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise NumericalFailure(f"{len(failed)} check(s) failed", {"failed": failed})


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="dppest", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return _fail(EXIT_VALIDATION, "Abort", "aborted")
    except click.ClickException as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, exc.format_message())
    except NumericalFailure as exc:
        return _fail(EXIT_NUMERICAL, "NumericalFailure", str(exc), **exc.payload)
    except (NumericalError, SamplerStall, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, type(exc).__name__, str(exc))
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
