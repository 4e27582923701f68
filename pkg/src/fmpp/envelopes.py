"""Monte Carlo null models and pointwise envelopes."""
from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .intensity import IntensityModel
from .pattern import Pattern
from .simulate import uniform_points
from .summaries import KQuery, estimate_k

__all__ = ["NullModel", "EnvelopeResult", "simulate_null", "relabel", "envelope", "TRANSFORMS"]

TRANSFORMS = {"identity": lambda v: v, "cube-root": np.cbrt}
_TRANSFORM_ALIASES = {"cbrt": "cube-root", "none": "identity"}


@dataclass(frozen=True)
class NullModel:
    """Null hypothesis for envelope construction.

    ``poisson-relocate`` keeps the list of marks and redraws the same number
    of locations, uniformly or from ``intensity`` by rejection.
    ``random-label`` permutes the (aux, curve) marks over the fixed locations.
    Replicate ``i`` draws from ``default_rng([seed, i])``.
    """

    kind: str = "random-label"
    nsim: int = 39
    seed: int = 0
    intensity: Optional[IntensityModel] = None

    def __post_init__(self):
        aliases = {"poisson": "poisson-relocate", "relabel": "random-label"}
        object.__setattr__(self, "kind", aliases.get(self.kind, self.kind))
        if self.kind not in ("poisson-relocate", "random-label"):
            raise InvalidArgument(f"unknown null model {self.kind!r}")
        if self.nsim < 1:
            raise InvalidArgument("nsim must be >= 1")

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), int(index)])


def relabel(p: Pattern, perm) -> Pattern:
    """Move the marks of point ``perm[i]`` onto location ``i``."""
    perm = np.asarray(perm)
    return p.replace(
        curves=p.curves[perm],
        labels=None if p.labels is None else p.labels[perm],
        scalars=None if p.scalars is None else p.scalars[perm],
    )


def _relocate(p: Pattern, nm: NullModel, rng) -> np.ndarray:
    n = len(p)
    if nm.intensity is None:
        return uniform_points(p.window, n, rng)
    # rejection against the largest intensity seen on a probe lattice
    probe = uniform_points(p.window, 4096, rng)
    top = 1.5 * float(np.max(nm.intensity(probe)))
    out = np.empty((0, 2))
    while len(out) < n:
        cand = uniform_points(p.window, 2 * (n - len(out)) + 16, rng)
        keep = rng.uniform(size=len(cand)) * top < nm.intensity(cand)
        out = np.vstack([out, cand[keep]])
    return out[:n]


def simulate_null(p: Pattern, nm: NullModel, index: int) -> Pattern:
    """Replicate ``index`` of the null model, deterministic given ``nm.seed``."""
    rng = nm.rng(index)
    if nm.kind == "random-label":
        return relabel(p, rng.permutation(len(p)))
    return p.replace(xy=_relocate(p, nm, rng))


@dataclass
class EnvelopeResult:
    r: np.ndarray
    stat: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    mean: np.ndarray
    transform: str
    nsim: int
    rank: int
    replicates: Optional[np.ndarray] = None

    @property
    def level(self) -> float:
        """Nominal pointwise two-sided level ``2k/(s+1)``."""
        return 2.0 * self.rank / (self.nsim + 1)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "stat", "lo", "hi", "mean"])
        for row in zip(self.r, self.stat, self.lo, self.hi, self.mean):
            w.writerow([repr(float(row[0]))] + [repr(float(v)) if np.isfinite(v) else "" for v in row[1:]])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text


def _kth(a: np.ndarray, k: int, largest: bool) -> np.ndarray:
    s = np.sort(a, axis=0)  # NaN sorts last
    valid = np.sum(np.isfinite(a), axis=0)
    out = np.full(a.shape[1], np.nan)
    for j in range(a.shape[1]):
        if valid[j] >= k:
            out[j] = s[valid[j] - k, j] if largest else s[k - 1, j]
    return out


def envelope(
    p: Pattern,
    q: KQuery,
    nm: NullModel,
    transform: str = "identity",
    rank: int = 1,
    threads: int = 1,
    keep_replicates: bool = False,
) -> EnvelopeResult:
    """Pointwise envelope of ``transform(K)`` over ``nm.nsim`` null replicates.

    ``lo``/``hi`` are the ``rank``-th smallest/largest replicate values; with
    ``rank=1`` and 39 replicates the nominal pointwise level is 5%.
    """
    transform = _TRANSFORM_ALIASES.get(transform, transform)
    if transform not in TRANSFORMS:
        raise InvalidArgument(f"unknown transform {transform!r}")
    if not 1 <= rank <= nm.nsim:
        raise InvalidArgument("rank must lie in 1..nsim")
    f = TRANSFORMS[transform]
    stat = f(estimate_k(p, q).values)

    def one(i):
        return f(estimate_k(simulate_null(p, nm, i), q).values)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(one, range(nm.nsim)))
    else:
        reps = [one(i) for i in range(nm.nsim)]
    reps = np.array(reps)
    lo = _kth(reps, rank, largest=False)
    hi = _kth(reps, rank, largest=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN columns
        mean = np.nanmean(reps, axis=0)
    # summation rounding can push the mean of near-identical replicates out of the band
    mean = np.where(np.isfinite(lo) & np.isfinite(hi), np.clip(mean, lo, hi), mean)
    return EnvelopeResult(
        np.asarray(q.r), stat, lo, hi, mean, transform, nm.nsim, rank, reps if keep_replicates else None
    )
