"""Convergence of H_n to its large-window limit for stationary models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..inference.equations import h_limit, sensitivity_H
from ..inference.testfunctions import AdaptiveCL, TestFunction
from ..kernels import BesselType, Homogeneous, KernelModel
from ..numerics import Window


@dataclass
class HLimitRow:
    side: float
    H: np.ndarray
    deviation: float  # max relative deviation over the non-zero limit entries


def h_limit_check(rho: float = 100.0, alpha: float = 0.05, epsilon: float = 0.01,
                  ladder=(1.0, 2.0, 3.0), layout: str = "two-step",
                  tf: TestFunction | None = None, family=BesselType) -> tuple[np.ndarray, list[HLimitRow]]:
    """H_n on the squares [0, s]^2 for s in ``ladder`` against the radial limit."""
    tf = tf or AdaptiveCL(epsilon)
    base = KernelModel(Homogeneous(rho), family(alpha))
    limit = h_limit(base, tf, layout)
    nz = np.abs(limit) > 0
    rows = []
    for s in ladder:
        m = KernelModel(base.intensity, base.correlation, Window.unit(s))
        H = sensitivity_H(m, layout, tf)
        dev = float(np.max(np.abs(H[nz] - limit[nz]) / np.abs(limit[nz])))
        rows.append(HLimitRow(s, H, dev))
    return limit, rows


def format_table(limit: np.ndarray, rows: list[HLimitRow]) -> str:
    lines = [f"limit H = {np.array2string(limit, precision=6)}",
             f"{'side':>6}{'H21':>14}{'H22':>14}{'max rel dev':>14}"]
    for r in rows:
        lines.append(f"{r.side:>6g}{r.H[1, 0]:>14.6g}{r.H[1, 1]:>14.6g}{r.deviation:>14.4%}")
    return "\n".join(lines) + "\n"
