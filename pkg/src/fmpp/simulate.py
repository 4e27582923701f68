"""Simulators for ground processes and functional marks.

Ground models: Poisson (constant or spatially varying rate), binomial and a
lattice log-Gaussian Cox process. Mark models: independent Brownian curves,
separable space-time Gaussian ("geostatistical") marks, intensity-dependent
marks and the growth-interaction process. Also LISA local-K curves and the
coverage fraction of a union of disks.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .errors import CholeskyFailure, InvalidArgument, NonpositiveDt, ProblemTooLarge, RateOverflow
from .geometry import Window

__all__ = [
    "Poisson",
    "Binomial",
    "LGCP",
    "simulate_ground",
    "BrownianMarks",
    "GeostatMarks",
    "IntensityMarks",
    "GrowthInteraction",
    "GrowthResult",
    "simulate_marks",
    "growth_interaction",
    "lisa_marks",
    "coverage_fraction",
    "uniform_points",
]

MAX_EXPECTED_POINTS = 1e6
MAX_GAUSSIAN_SIZE = 2000
MAX_LGCP_NODES = 64 * 64


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def uniform_points(window: Window, n: int, rng) -> np.ndarray:
    """Exactly ``n`` independent uniform points in ``window`` (rejection from the bbox)."""
    rng = _rng(rng)
    x0, x1, y0, y1 = window.bbox
    out = np.empty((0, 2))
    while len(out) < n:
        need = n - len(out)
        cand = np.column_stack([rng.uniform(x0, x1, 2 * need + 8), rng.uniform(y0, y1, 2 * need + 8)])
        out = np.vstack([out, cand[window.contains(cand)]])
    return out[:n]


# ---------------------------------------------------------------------------
# ground processes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Poisson:
    """Poisson process with constant ``rate`` or a callable ``rate(xy)``.

    A callable rate needs ``rate_max``, an upper bound used for thinning.
    """

    rate: Union[float, Callable]
    rate_max: Optional[float] = None


@dataclass(frozen=True)
class Binomial:
    n: int


@dataclass(frozen=True)
class LGCP:
    """Log-Gaussian Cox process with exponential covariance.

    The log-intensity field has mean ``mu``, variance ``var`` and correlation
    ``exp(-d/scale)``; it is simulated on a ``res x res`` lattice over the
    window's bounding box and read at the nearest node.
    """

    mu: float
    var: float
    scale: float
    res: int = 32


def simulate_ground(model, window: Window, seed=None) -> np.ndarray:
    """Simulate ground locations, returned as an ``(n, 2)`` array."""
    rng = _rng(seed)
    x0, x1, y0, y1 = window.bbox
    box_area = (x1 - x0) * (y1 - y0)
    if isinstance(model, Binomial):
        if model.n < 0:
            raise InvalidArgument("binomial n must be >= 0")
        return uniform_points(window, model.n, rng)
    if isinstance(model, Poisson):
        if callable(model.rate):
            if model.rate_max is None or not model.rate_max >= 0:
                raise InvalidArgument("a spatially varying rate needs rate_max")
            lam = model.rate_max
        else:
            lam = float(model.rate)
            if lam < 0:
                raise InvalidArgument("rate must be >= 0")
        if lam * box_area > MAX_EXPECTED_POINTS:
            raise RateOverflow("expected number of points exceeds 1e6")
        if not callable(model.rate):
            return uniform_points(window, rng.poisson(lam * window.area), rng)
        n = rng.poisson(lam * box_area)
        pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
        pts = pts[window.contains(pts)]
        rate = np.asarray(model.rate(pts), dtype=float)
        if np.any(rate > lam * (1 + 1e-9)):
            raise InvalidArgument("rate exceeds rate_max")
        return pts[rng.uniform(size=len(pts)) * lam < rate]
    if isinstance(model, LGCP):
        return _lgcp(model, window, rng)
    raise InvalidArgument(f"unknown ground model {model!r}")


@lru_cache(maxsize=8)
def _lattice_factor(res: int, scale: float, bbox: tuple):
    x0, x1, y0, y1 = bbox
    xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
    ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    d = np.hypot(nodes[:, None, 0] - nodes[None, :, 0], nodes[:, None, 1] - nodes[None, :, 1])
    return xs, ys, _cholesky(np.exp(-d / scale))


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + 1e-10 * np.eye(len(cov)))
    except np.linalg.LinAlgError:
        raise CholeskyFailure("covariance matrix is not positive definite") from None


def _lgcp(model: LGCP, window: Window, rng) -> np.ndarray:
    if model.res < 32:
        raise InvalidArgument("LGCP lattice must be at least 32 x 32")
    if model.res**2 > MAX_LGCP_NODES:
        raise ProblemTooLarge("LGCP lattice larger than 64 x 64")
    if model.var < 0 or model.scale <= 0:
        raise InvalidArgument("LGCP needs var >= 0 and scale > 0")
    x0, x1, y0, y1 = bbox = tuple(float(v) for v in window.bbox)
    res = model.res
    if model.var == 0:
        field = np.full(res * res, model.mu)
    else:
        _, _, chol = _lattice_factor(res, float(model.scale), bbox)
        field = model.mu + np.sqrt(model.var) * (chol @ rng.standard_normal(res * res))
    lam = np.exp(field)
    lam_max = lam.max()
    box_area = (x1 - x0) * (y1 - y0)
    if lam_max * box_area > MAX_EXPECTED_POINTS:
        raise RateOverflow("expected number of points exceeds 1e6")
    n = rng.poisson(lam_max * box_area)
    pts = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)])
    ix = np.clip(((pts[:, 0] - x0) / (x1 - x0) * res).astype(int), 0, res - 1)
    iy = np.clip(((pts[:, 1] - y0) / (y1 - y0) * res).astype(int), 0, res - 1)
    local = lam[ix * res + iy]
    keep = window.contains(pts) & (rng.uniform(size=n) * lam_max < local)
    return pts[keep]


# ---------------------------------------------------------------------------
# mark models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BrownianMarks:
    sigma: float = 1.0
    start: float = 0.0


@dataclass(frozen=True)
class GeostatMarks:
    """Separable Gaussian field ``sigma2 * exp(-|dx|/scale_space) * exp(-|dt|/scale_time)``."""

    scale_space: float
    scale_time: float
    sigma2: float = 1.0
    mean: float = 0.0


@dataclass(frozen=True)
class IntensityMarks:
    """``F_i(t) = a + b * rho(X_i) + noise``; ``intensity`` is a callable on (n, 2) arrays."""

    a: float
    b: float
    noise: float = 0.0
    intensity: Optional[Callable] = None


@dataclass(frozen=True)
class GrowthInteraction:
    """Parameters of the growth-interaction process.

    Individual growth is logistic, ``lam * F * (1 - F/K)``; individual ``j``
    suppresses ``i`` at rate ``c * F_i * F_j * exp(-d_ij**2 / sigma_int**2)``.
    ``lam``, ``K`` may be per-label sequences and ``c`` a per-label-pair
    matrix (labels 1..k). Births are uniform on the horizon, lifetimes
    exponential with rate ``mu``. ``noise > 0`` adds ``noise * dW`` and
    switches from RK4 to Euler-Maruyama.
    """

    lam: Union[float, tuple] = 1.0
    K: Union[float, tuple] = 10.0
    c: Union[float, tuple] = 0.0
    sigma_int: float = 0.1
    mu: float = 0.2
    noise: float = 0.0
    dt: float = 1e-3
    f0: Optional[float] = None


@dataclass
class GrowthResult:
    curves: np.ndarray
    births: np.ndarray
    deaths: np.ndarray


def _shared_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidArgument("grid must be strictly increasing with at least two points")
    return grid


def simulate_marks(model, points, grid, seed=None, labels=None, horizon=None):
    """Simulate one curve per point on ``grid``.

    Returns an ``(n, m)`` array, or a :class:`GrowthResult` for the
    growth-interaction model.
    """
    rng = _rng(seed)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    grid = _shared_grid(grid)
    n, m = len(pts), len(grid)
    if isinstance(model, BrownianMarks):
        steps = rng.standard_normal((n, m - 1)) * np.sqrt(np.diff(grid)) * model.sigma
        return model.start + np.concatenate([np.zeros((n, 1)), np.cumsum(steps, axis=1)], axis=1)
    if isinstance(model, GeostatMarks):
        return _geostat(model, pts, grid, rng)
    if isinstance(model, IntensityMarks):
        if model.b != 0 and model.intensity is None:
            raise InvalidArgument("intensity-dependent marks need an intensity function")
        rho = np.zeros(n) if model.b == 0 else np.asarray(model.intensity(pts), dtype=float)
        noise = model.noise * rng.standard_normal((n, m)) if model.noise > 0 else 0.0
        return model.a + model.b * rho[:, None] + noise
    if isinstance(model, GrowthInteraction):
        return growth_interaction(pts, model, grid, seed=rng, labels=labels, horizon=horizon)
    raise InvalidArgument(f"unknown mark model {model!r}")


def _geostat(model: GeostatMarks, pts, grid, rng) -> np.ndarray:
    if model.scale_space <= 0 or model.scale_time <= 0:
        raise InvalidArgument("geostatistical scales must be positive")
    n, m = len(pts), len(grid)
    if n > MAX_GAUSSIAN_SIZE or m > MAX_GAUSSIAN_SIZE:
        raise ProblemTooLarge("Gaussian factor larger than 2000 x 2000")
    if n == 0:
        return np.empty((0, m))
    ds = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    dt = np.abs(grid[:, None] - grid[None, :])
    # separable covariance: chol(A kron B) = chol(A) kron chol(B)
    ls = _cholesky(np.exp(-ds / model.scale_space))
    lt = _cholesky(np.exp(-dt / model.scale_time))
    z = rng.standard_normal((n, m))
    return model.mean + np.sqrt(model.sigma2) * (ls @ z @ lt.T)


def _per_label(value, labels, k, what):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(len(labels), float(arr[0]))
    if len(arr) != k:
        raise InvalidArgument(f"{what} needs one value per label")
    return arr[labels - 1]


def growth_interaction(points, params: GrowthInteraction, grid, seed=None, labels=None, horizon=None) -> GrowthResult:
    """Simulate growth-interaction curves sampled on ``grid``.

    Each point is born at ``T_i ~ U(horizon)`` with size ``f0`` (default
    ``0.01 K``) and dies at ``D_i = T_i + Exp(mu)``; curves are zero outside
    ``[T_i, D_i)``. Integration restarts at every birth, death and output
    time so supports are honoured exactly; between events it takes steps of
    at most ``dt``.
    """
    if not params.dt > 0:
        raise NonpositiveDt("dt must be positive")
    rng = _rng(seed)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    grid = _shared_grid(grid)
    n = len(pts)
    t0, t1 = (grid[0], grid[-1]) if horizon is None else map(float, horizon)
    if not t1 > t0:
        raise InvalidArgument("horizon must have positive length")
    labels = np.ones(n, dtype=int) if labels is None else np.asarray(labels, dtype=int)
    k = int(labels.max()) if n else 1
    lam = _per_label(params.lam, labels, k, "lam")
    cap = _per_label(params.K, labels, k, "K")
    cmat = np.asarray(params.c, dtype=float)
    if cmat.ndim == 0:
        cij = np.full((n, n), float(cmat))
    else:
        if cmat.shape != (k, k):
            raise InvalidArgument("c must be a scalar or a k x k matrix")
        cij = cmat[labels[:, None] - 1, labels[None, :] - 1]
    f0 = 0.01 * cap if params.f0 is None else np.full(n, float(params.f0))

    births = rng.uniform(t0, t1, n)
    lifetimes = rng.exponential(1.0 / params.mu, n) if params.mu > 0 else np.full(n, np.inf)
    deaths = births + lifetimes
    curves = np.zeros((n, len(grid)))
    if n == 0:
        return GrowthResult(curves, births, deaths)

    d2 = (pts[:, None, 0] - pts[None, :, 0]) ** 2 + (pts[:, None, 1] - pts[None, :, 1]) ** 2
    kern = cij * np.exp(-d2 / params.sigma_int**2)
    np.fill_diagonal(kern, 0.0)
    interacting = bool(np.any(kern))

    def drift(f):
        out = lam * f * (1.0 - f / cap)
        if interacting:
            out = out - f * (kern @ f)
        return out

    events = np.unique(np.concatenate([births, deaths[deaths <= grid[-1]], grid]))
    events = events[(events >= min(t0, grid[0])) & (events <= max(t1, grid[-1]))]
    f = np.zeros(n)
    alive = np.zeros(n, dtype=bool)
    gi = 0
    for e, (ta, tb) in enumerate(zip(events, np.append(events[1:], events[-1]))):
        born = births == ta
        f[born] = f0[born]
        alive |= born
        dead = deaths == ta
        alive &= ~dead
        f[dead] = 0.0
        while gi < len(grid) and grid[gi] == ta:
            curves[:, gi] = np.where(alive, f, 0.0)
            gi += 1
        span = tb - ta
        if span <= 0 or not alive.any():
            continue
        steps = int(np.ceil(span / params.dt - 1e-9))
        h = span / steps
        for _ in range(steps):
            if params.noise > 0:
                f = f + h * drift(f) + params.noise * np.sqrt(h) * rng.standard_normal(n) * alive
                f = np.clip(f, 0.0, cap)
            else:
                k1 = drift(f)
                k2 = drift(f + 0.5 * h * k1)
                k3 = drift(f + 0.5 * h * k2)
                k4 = drift(f + h * k3)
                f = np.maximum(f + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), 0.0)
            f[~alive] = 0.0
    return GrowthResult(curves, births, deaths)


# ---------------------------------------------------------------------------
# constructed marks and coverage
# ---------------------------------------------------------------------------


def lisa_marks(points, h_grid) -> np.ndarray:
    """Local K curves: number of other points within distance ``h`` of each point."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    h = np.asarray(h_grid, dtype=float)
    if h.ndim != 1 or np.any(np.diff(h) <= 0):
        raise InvalidArgument("h-grid must be strictly increasing")
    d = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
    np.fill_diagonal(d, np.inf)
    # small relative slack so lattice distances equal to h count as inside
    return (d[:, :, None] <= h[None, None, :] * (1 + 1e-12)).sum(axis=1).astype(float)


def coverage_fraction(points, radii, window: Window, res: int = 512) -> float:
    """Fraction of ``window`` covered by the union of disks, on a ``res x res`` lattice."""
    if res < 256:
        raise InvalidArgument("coverage lattice resolution must be at least 256")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(pts),))
    if np.any(radii < 0):
        raise InvalidArgument("radii must be nonnegative")
    x0, x1, y0, y1 = window.bbox
    xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
    ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    inside = window.contains(np.stack([gx, gy], axis=-1))
    covered = np.zeros_like(inside)
    for (cx, cy), rad in zip(pts, radii):
        if rad <= 0:
            continue
        i0, i1 = np.searchsorted(xs, [cx - rad, cx + rad])
        j0, j1 = np.searchsorted(ys, [cy - rad, cy + rad])
        sub = (gx[i0:i1, j0:j1] - cx) ** 2 + (gy[i0:i1, j0:j1] - cy) ** 2 <= rad**2
        covered[i0:i1, j0:j1] |= sub
    return float((covered & inside).sum() / inside.sum())
