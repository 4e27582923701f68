"""t-weighted marked reduced moment measures and K-functions.

For a pattern in ``W`` the estimator sums, over a conditioning point with
marks in ``D x E`` and distinct neighbours ``x_i`` with ``x_i - x`` in
``C_i(r)`` and marks in ``D_i x E_i``::

    w(x, x_1, ...) * t(marks) / (rho(x) * prod rho(x_i))

and divides by the mark-set reference masses. With the Hamilton
normalisation those masses (and the window area) are replaced by their
ratio-unbiased plug-ins built from ``sum 1/rho``.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from .errors import EmptyErosion, EmptyPattern, EmptyRWindow, InvalidArgument, NonFiniteContrast, Unsupported
from .geometry import (
    Ball,
    Sector,
    StructElem,
    arc_fractions,
    erode_all,
    normalize_correction,
    translational_volumes,
)
from .intensity import IntensityModel, IntensitySpec, resolve_intensity
from .pattern import MarkSet, Pattern
from .testfuncs import TestFunction, tuple_values

__all__ = [
    "KQuery",
    "KEstimate",
    "estimate_k",
    "hamilton_nu",
    "ground_k",
    "directional_k",
    "minimum_contrast_fit",
    "NORMALIZATIONS",
]

NORMALIZATIONS = ("raw", "hamilton", "ground-normalized")


def _elem_text(c: StructElem) -> str:
    if isinstance(c, Ball):
        return f"ball:{c.r!r}"
    if isinstance(c, Sector):
        return f"sector:{c.r!r}:{c.phi!r}:{c.psi!r}"
    return f"box:{c.hx!r}:{c.hy!r}"


@dataclass(frozen=True)
class KQuery:
    """What to estimate.

    ``elems`` are unit templates: at scale ``r`` the i-th neighbour set is
    ``elems[i].scaled(r)``, so ``Ball(1)`` gives the usual K-function and
    ``Box(a, b)`` gives boxes with half-widths ``(a r, b r)``. The order ``n``
    is ``1 + len(neighbors)``.
    """

    r: tuple
    test: TestFunction = TestFunction.one()
    cond: MarkSet = MarkSet()
    neighbors: tuple = (MarkSet(),)
    elems: tuple = (Ball(1.0),)
    correction: str = "translational"
    intensity: Union[IntensityModel, IntensitySpec, str] = "homogeneous"
    normalization: str = "hamilton"

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.r, dtype=float))
        if r.ndim != 1 or len(r) == 0 or np.any(r < 0) or np.any(np.diff(r) <= 0) or not np.all(np.isfinite(r)):
            raise InvalidArgument("r-grid must be finite, nonnegative and strictly increasing")
        object.__setattr__(self, "r", tuple(r.tolist()))
        neighbors = tuple(self.neighbors)
        elems = tuple(self.elems)
        if len(elems) == 1 and len(neighbors) > 1:
            elems = elems * len(neighbors)
        if len(elems) != len(neighbors):
            raise InvalidArgument("need one structuring element per neighbour mark set")
        object.__setattr__(self, "neighbors", neighbors)
        object.__setattr__(self, "elems", elems)
        n = self.order
        if n not in (2, 3):
            raise Unsupported("only orders n = 2 and n = 3 are supported")
        corr = normalize_correction(self.correction)
        object.__setattr__(self, "correction", corr)
        if corr == "isotropic":
            if n != 2:
                raise Unsupported("isotropic correction requires n = 2")
            if not isinstance(elems[0], Ball):
                raise Unsupported("isotropic correction requires ball-shaped neighbourhoods")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidArgument(f"unknown normalization {self.normalization!r}")
        if not self.test.supports_arity(n):
            from .errors import ArityMismatch

            raise ArityMismatch(f"test function {self.test.kind!r} does not accept {n}-tuples")

    @property
    def order(self) -> int:
        return 1 + len(self.neighbors)

    @property
    def r_grid(self) -> np.ndarray:
        return np.asarray(self.r)

    def replace(self, **kw) -> "KQuery":
        args = {f: getattr(self, f) for f in self.__dataclass_fields__}
        args.update(kw)
        return KQuery(**args)

    def describe(self) -> dict:
        if isinstance(self.intensity, IntensityModel):
            inten = self.intensity.describe()
        elif isinstance(self.intensity, str):
            inten = {"kind": self.intensity}
        else:
            inten = self.intensity.describe()
        return {
            "order": self.order,
            "r": list(self.r),
            "test": self.test.to_text(),
            "cond": repr(self.cond),
            "neighbors": [repr(m) for m in self.neighbors],
            "elems": [_elem_text(c) for c in self.elems],
            "correction": self.correction,
            "intensity": inten,
            "normalization": self.normalization,
        }


@dataclass
class KEstimate:
    r: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    normalizer: np.ndarray
    nu_cond: float = 1.0
    nu_neighbors: tuple = ()
    window_mass: Optional[np.ndarray] = None
    query: dict = field(default_factory=dict)
    empty_conditioning: bool = False
    floored_tuples: int = 0

    @property
    def available(self) -> np.ndarray:
        return np.isfinite(self.values)

    def to_csv(self, path=None, envelope=None) -> str:
        """CSV ``r,k_hat,count,normalizer[,lo,hi,mean_null]``; nulls are empty cells."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["r", "k_hat", "count", "normalizer"]
        if envelope is not None:
            head += ["lo", "hi", "mean_null"]
        w.writerow(head)
        for i, r in enumerate(self.r):
            row = [repr(float(r)), _num(self.values[i]), str(int(self.counts[i])), _num(self.normalizer[i])]
            if envelope is not None:
                row += [_num(envelope.lo[i]), _num(envelope.hi[i]), _num(envelope.mean[i])]
            w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "r": [float(v) for v in self.r],
            "k_hat": [None if not np.isfinite(v) else float(v) for v in self.values],
            "count": [int(c) for c in self.counts],
            "nu_cond": self.nu_cond,
            "nu_neighbors": list(self.nu_neighbors),
            "empty_conditioning": self.empty_conditioning,
            "floored_tuples": self.floored_tuples,
            "query": self.query,
        }


def _num(v) -> str:
    return repr(float(v)) if np.isfinite(v) else ""


# ---------------------------------------------------------------------------
# tuple construction
# ---------------------------------------------------------------------------


def _slot_pairs(p: Pattern, cond: np.ndarray, nb: np.ndarray, elem: StructElem, rmax: float):
    """Ordered pairs (a, b), a in cond, b in nb, a != b, with critical scale <= rmax."""
    reach = elem.reach * rmax
    if reach <= 0 or not cond.any() or not nb.any():
        return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)
    tree = cKDTree(p.xy)
    pairs = tree.query_pairs(reach * (1 + 1e-12), output_type="ndarray")
    if len(pairs) == 0:
        return np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0)
    a = np.concatenate([pairs[:, 0], pairs[:, 1]])
    b = np.concatenate([pairs[:, 1], pairs[:, 0]])
    keep = cond[a] & nb[b]
    a, b = a[keep], b[keep]
    s = elem.critical_scale(p.xy[b] - p.xy[a])
    keep = s <= rmax
    a, b, s = a[keep], b[keep], s[keep]
    order = np.lexsort((b, a))
    return a[order], b[order], s[order]


def _tuples(p: Pattern, q: KQuery, cond: np.ndarray, nbs: Sequence[np.ndarray]):
    """Index tuples (T, n) and their critical scales (T,)."""
    rmax = q.r[-1]
    a0, b0, s0 = _slot_pairs(p, cond, nbs[0], q.elems[0], rmax)
    if q.order == 2:
        return np.column_stack([a0, b0]), s0
    a1, b1, s1 = _slot_pairs(p, cond, nbs[1], q.elems[1], rmax)
    rows, scales = [], []
    starts1 = np.searchsorted(a1, np.arange(len(p) + 1))
    starts0 = np.searchsorted(a0, np.arange(len(p) + 1))
    for i in range(len(p)):
        lo0, hi0 = starts0[i], starts0[i + 1]
        lo1, hi1 = starts1[i], starts1[i + 1]
        if hi0 == lo0 or hi1 == lo1:
            continue
        j = np.repeat(b0[lo0:hi0], hi1 - lo1)
        k = np.tile(b1[lo1:hi1], hi0 - lo0)
        sj = np.repeat(s0[lo0:hi0], hi1 - lo1)
        sk = np.tile(s1[lo1:hi1], hi0 - lo0)
        keep = j != k
        rows.append(np.column_stack([np.full(keep.sum(), i), j[keep], k[keep]]))
        scales.append(np.maximum(sj, sk)[keep])
    if not rows:
        return np.empty((0, 3), np.intp), np.empty(0)
    return np.concatenate(rows), np.concatenate(scales)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def _xi(model: IntensityModel, p: Pattern, mask: np.ndarray, with_labels: bool) -> float:
    if not mask.any():
        return 0.0
    xy = p.xy[mask]
    if with_labels and p.labels is not None:
        rho = model(xy, p.labels[mask])
    else:
        rho = model(xy)
    return float(np.sum(1.0 / rho))


def hamilton_nu(p: Pattern, ms: MarkSet, model: IntensityModel) -> float:
    """Ratio estimate of the reference mass of a mark set.

    ``sum_{marks in ms} 1/rho(x, l) / sum_all 1/rho_G(x)``; for a
    homogeneous model without labels this is the fraction of points in
    ``ms``.
    """
    if len(p) == 0:
        raise EmptyPattern("reference mass of an empty pattern")
    num = _xi(model, p, ms.mask(p), with_labels=True)
    den = _xi(model, p, np.ones(len(p), dtype=bool), with_labels=False)
    return num / den


def _raw_sums(p: Pattern, q: KQuery, model: IntensityModel, tf: TestFunction):
    """Unnormalised sums per r, tuple counts, and floored-tuple count."""
    r = q.r_grid
    cond = q.cond.mask(p)
    nbs = [m.mask(p) for m in q.neighbors]
    idx, scale = _tuples(p, q, cond, nbs)
    if p.labels is not None:
        rho, floored = model.evaluate(p.xy, p.labels)
    else:
        rho, floored = model.evaluate(p.xy)
    sums = np.zeros(len(r))
    counts = np.zeros(len(r), dtype=np.int64)
    unavailable = np.zeros(len(r), dtype=bool)
    eroded_windows = [None] * len(r)
    if len(idx) == 0:
        if q.correction == "minus-sampling":
            for k, rk in enumerate(r):
                try:
                    eroded_windows[k] = erode_all(p.window, [c.scaled(rk) for c in q.elems])
                except EmptyErosion:
                    unavailable[k] = True
        return sums, counts, unavailable, eroded_windows, 0
    t = tuple_values(tf, p, idx)
    contrib = t / np.prod(rho[idx], axis=1)
    n_floored = int(np.any(floored[idx], axis=1).sum())
    w = p.window
    x = p.xy[idx[:, 0]]
    if q.correction == "translational":
        disp = p.xy[idx[:, 1:]] - x[:, None, :]
        vol = translational_volumes(w, disp)
        with np.errstate(divide="ignore"):
            weight = np.where(vol > 0, 1.0 / vol, 0.0)
    elif q.correction == "isotropic":
        d = np.hypot(*(p.xy[idx[:, 1]] - x).T)
        frac = arc_fractions(w, x, d)
        with np.errstate(divide="ignore"):
            weight = np.where(frac > 0, 1.0 / (w.area * frac), 0.0)
    elif q.correction == "none":
        weight = np.full(len(idx), 1.0 / w.area)
    else:
        weight = None
    for k, rk in enumerate(r):
        inc = scale <= rk
        if weight is not None:
            c = np.where(inc, contrib * weight, 0.0)
            counts[k] = int(np.count_nonzero(inc & (weight > 0)))
        else:
            try:
                ew = erode_all(w, [e.scaled(rk) for e in q.elems])
            except EmptyErosion:
                unavailable[k] = True
                continue
            eroded_windows[k] = ew
            inc = inc & ew.contains(x)
            c = np.where(inc, contrib / ew.area, 0.0)
            counts[k] = int(np.count_nonzero(inc))
        sums[k] = c.sum()
    return sums, counts, unavailable, eroded_windows, n_floored


def estimate_k(p: Pattern, q: KQuery) -> KEstimate:
    """Estimate the t-weighted marked K-function of ``p`` on ``q.r``.

    Minus-sampling values at scales where the eroded window is empty are
    reported as NaN. An empty conditioning mark set yields an all-zero
    estimate with ``empty_conditioning`` set (and a warning).
    """
    if len(p) == 0:
        raise EmptyPattern("cannot estimate K on an empty pattern")
    model = resolve_intensity(q.intensity, p)
    tf = q.test.bind(p)
    r = q.r_grid
    sums, counts, unavailable, eroded, n_floored = _raw_sums(p, q, model, tf)
    echo = q.describe()
    echo["intensity_fitted"] = model.describe()

    if not q.cond.mask(p).any():
        warnings.warn("no points in the conditioning mark set; returning zeros", stacklevel=2)
        vals = np.where(unavailable, np.nan, 0.0)
        return KEstimate(r, vals, counts, np.ones(len(r)), 0.0, (), None, echo, True, n_floored)

    if q.normalization == "raw":
        norm = np.ones(len(r))
        vals = np.where(unavailable, np.nan, sums)
        return KEstimate(r, vals, counts, norm, 1.0, tuple(1.0 for _ in q.neighbors), None, echo, False, n_floored)

    nu_c = hamilton_nu(p, q.cond, model)
    nu_n = tuple(hamilton_nu(p, m, model) for m in q.neighbors)
    mass = np.full(len(r), np.nan)
    for k in range(len(r)):
        if unavailable[k]:
            continue
        region = p.window if q.correction != "minus-sampling" else eroded[k]
        inside = region.contains(p.xy) if region is not p.window else np.ones(len(p), dtype=bool)
        xi_g = _xi(model, p, inside, with_labels=False)
        # |W|/Xi_G(W): replaces the true area hidden inside the edge weights
        mass[k] = region.area / xi_g if xi_g > 0 else np.nan
    nu_prod = nu_c * float(np.prod(nu_n))
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = nu_prod / mass
        vals = np.where(sums == 0, 0.0, sums / norm)
    vals = np.where(unavailable | ~np.isfinite(mass), np.nan, vals)
    est = KEstimate(r, vals, counts, norm, nu_c, nu_n, mass, echo, False, n_floored)
    if q.normalization == "hamilton":
        return est

    ground = estimate_k(
        p,
        q.replace(
            test=TestFunction.one(),
            cond=MarkSet(),
            neighbors=tuple(MarkSet() for _ in q.neighbors),
            normalization="hamilton",
            intensity=model,
        ),
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(ground.values > 0, est.values / ground.values, np.nan)
    est.values = ratio
    est.normalizer = norm * np.where(ground.values > 0, ground.values, np.nan)
    return est


def ground_k(p: Pattern, r, correction: str = "translational", intensity="homogeneous") -> KEstimate:
    """Second-order inhomogeneous K-function of the ground process."""
    if len(p) == 0:
        raise EmptyPattern("cannot estimate K on an empty pattern")
    q = KQuery(tuple(np.atleast_1d(r)), correction=correction, intensity=intensity)
    return estimate_k(p, q)


def directional_k(
    p: Pattern,
    r,
    phi: float,
    psi: float,
    correction: str = "translational",
    intensity="homogeneous",
    test: TestFunction = TestFunction.one(),
    cond: MarkSet = MarkSet(),
    neighbor: MarkSet = MarkSet(),
    normalization: str = "hamilton",
) -> KEstimate:
    """K-function restricted to displacement directions in [phi, psi] (mod pi)."""
    q = KQuery(
        tuple(np.atleast_1d(r)),
        test=test,
        cond=cond,
        neighbors=(neighbor,),
        elems=(Sector(1.0, phi, psi),),
        correction=correction,
        intensity=intensity,
        normalization=normalization,
    )
    return estimate_k(p, q)


# ---------------------------------------------------------------------------
# minimum contrast
# ---------------------------------------------------------------------------


@dataclass
class ContrastFit:
    theta: np.ndarray
    contrast: float
    success: bool


def _contrast(model_k, theta, r, khat, dr, p, q):
    with np.errstate(invalid="ignore"):
        model = np.asarray(model_k(r, theta), dtype=float)
        val = float(np.sum(np.abs(model**q - khat**q) ** p * dr))
    return val


def minimum_contrast_fit(
    observed: KEstimate,
    model_k: Callable,
    theta0=None,
    bounds=None,
    p: float = 2.0,
    q: float = 0.25,
    r_min: Optional[float] = None,
    r_max: Optional[float] = None,
    xatol: float = 1e-10,
) -> ContrastFit:
    """Fit ``theta`` by minimising ``sum |K(r; theta)**q - Khat(r)**q|**p * dr``.

    One-dimensional problems with ``bounds=(lo, hi)`` use bounded scalar
    minimisation; otherwise Nelder-Mead starts from ``theta0``.
    """
    r = np.asarray(observed.r, dtype=float)
    khat = np.asarray(observed.values, dtype=float)
    lo = r[0] if r_min is None else r_min
    hi = r[-1] if r_max is None else r_max
    sel = (r >= lo) & (r <= hi) & np.isfinite(khat)
    if not sel.any():
        raise EmptyRWindow("no usable r values in [r_min, r_max]")
    r_s, k_s = r[sel], khat[sel]
    dr = np.gradient(r_s) if len(r_s) > 1 else np.ones(1)
    if np.any(k_s < 0):
        raise NonFiniteContrast("negative K estimates cannot be raised to a fractional power")

    def f(theta):
        val = _contrast(model_k, theta, r_s, k_s, dr, p, q)
        return val if np.isfinite(val) else np.inf

    if bounds is not None and np.ndim(bounds) == 1:
        res = optimize.minimize_scalar(f, bounds=tuple(bounds), method="bounded", options={"xatol": xatol})
        theta = np.array([res.x])
        fun = float(res.fun)
        ok = bool(res.success)
    else:
        if theta0 is None:
            raise InvalidArgument("multi-parameter fits need theta0")
        res = optimize.minimize(
            lambda th: f(th), np.atleast_1d(np.asarray(theta0, dtype=float)), method="Nelder-Mead",
            options={"xatol": xatol, "fatol": 1e-14, "maxiter": 10000},
        )
        theta, fun, ok = np.asarray(res.x), float(res.fun), bool(res.success)
    if not np.isfinite(fun):
        raise NonFiniteContrast("contrast is not finite at the optimum")
    return ContrastFit(theta, fun, ok)
