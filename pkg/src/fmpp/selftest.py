"""Monte Carlo unbiasedness checks for the K-estimators.

Each check simulates a Poisson ground process with known rate and
independent marks, estimates K with the true intensity and compares the
replicate mean with the closed-form target. A check passes when the
z-score of the mean is below ``z_max``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import rect
from .intensity import homogeneous
from .pattern import LabelIn, MarkSet, Pattern
from .simulate import Poisson, simulate_ground
from .summaries import KQuery, estimate_k
from .testfuncs import TestFunction

__all__ = ["CheckResult", "run_selftest"]

RATE = 100.0
R = (0.05, 0.1)


@dataclass
class CheckResult:
    name: str
    r: float
    mean: float
    target: float
    z: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name} r={self.r:g}: mean={self.mean:.6g} "
                f"target={self.target:.6g} z={self.z:+.2f}")


def _pattern(window, rng) -> Pattern:
    xy = simulate_ground(Poisson(RATE), window, rng)
    n = len(xy)
    return Pattern(
        window,
        xy,
        np.array([0.0, 1.0]),
        np.zeros((n, 2)),
        labels=rng.integers(1, 3, n),
        scalars=rng.uniform(size=n),
        n_labels=2,
    )


def _checks(window):
    model = homogeneous(RATE, window)
    disc = np.pi * np.asarray(R) ** 2
    for corr in ("minus-sampling", "translational", "isotropic"):
        yield f"ground n=2 {corr}", KQuery(R, correction=corr, intensity=model, normalization="raw"), disc
    yield (
        "labels 1->2 aux-product translational",
        KQuery(R, test=TestFunction.aux_product(), cond=MarkSet((LabelIn([1]),)),
               neighbors=(MarkSet((LabelIn([2]),)),), intensity=model, normalization="raw"),
        disc / 16.0,
    )
    for corr in ("minus-sampling", "translational"):
        yield (
            f"ground n=3 {corr}",
            KQuery(R, neighbors=(MarkSet(), MarkSet()), correction=corr, intensity=model, normalization="raw"),
            disc**2,
        )


def run_selftest(replicates: int = 100, seed: int = 0, z_max: float = 4.0, verbose=None):
    """Run all checks and return a list of :class:`CheckResult`."""
    window = rect(0.0, 1.0, 0.0, 1.0)
    checks = list(_checks(window))
    values = [[] for _ in checks]
    for i in range(replicates):
        rng = np.random.default_rng([seed, i])
        p = _pattern(window, rng)
        for k, (_, q, _) in enumerate(checks):
            values[k].append(estimate_k(p, q).values)
    out = []
    for (name, _, target), vals in zip(checks, values):
        vals = np.asarray(vals)
        mean = vals.mean(axis=0)
        se = vals.std(axis=0, ddof=1) / np.sqrt(len(vals))
        for j, r in enumerate(R):
            z = (mean[j] - target[j]) / se[j] if se[j] > 0 else np.inf
            res = CheckResult(name, r, float(mean[j]), float(target[j]), float(z), bool(abs(z) < z_max))
            if verbose:
                verbose(res.line())
            out.append(res)
    return out
