"""Intensity estimation for the ground process and the label factor.

The fitted model evaluates ``rho(x, l) = Q(l | x) * rho_G(x)``. Curves never
enter the intensity (common functional mark distribution).
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import ndtr

from .errors import FileNotFound, InvalidArgument, MalformedInput, OutsideWindow, TooFewPoints
from .geometry import Rectangle, Window
from .pattern import AuxMark, Pattern

__all__ = [
    "IntensityModel",
    "IntensitySpec",
    "fit_intensity",
    "eval_intensity",
    "homogeneous",
    "scott_bandwidth",
    "load_intensity_grid",
    "resolve_intensity",
]

FLOOR_FACTOR = 1e-12


def scott_bandwidth(xy) -> np.ndarray:
    """Per-axis Scott bandwidth ``n**(-1/6) * sd`` for planar data."""
    xy = np.asarray(xy, dtype=float)
    n = len(xy)
    sd = xy.std(axis=0, ddof=1)
    return n ** (-1.0 / 6.0) * sd


def _gauss(dx, dy, h):
    return np.exp(-0.5 * ((dx / h[0]) ** 2 + (dy / h[1]) ** 2)) / (2 * np.pi * h[0] * h[1])


def _lattice(window: Window, res: int = 256):
    x0, x1, y0, y1 = window.bbox
    xs = x0 + (np.arange(res) + 0.5) * (x1 - x0) / res
    ys = y0 + (np.arange(res) + 0.5) * (y1 - y0) / res
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    inside = window.contains(pts)
    cell = (x1 - x0) * (y1 - y0) / res**2
    return pts[inside], cell


def _edge_factors(window: Window, xy: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Kernel mass inside the window for kernels centred at ``xy``."""
    if isinstance(window, Rectangle):
        fx = ndtr((window.xmax - xy[:, 0]) / h[0]) - ndtr((window.xmin - xy[:, 0]) / h[0])
        fy = ndtr((window.ymax - xy[:, 1]) / h[1]) - ndtr((window.ymin - xy[:, 1]) / h[1])
        return fx * fy
    pts, cell = _lattice(window)
    out = np.empty(len(xy))
    for i, c in enumerate(xy):
        out[i] = _gauss(pts[:, 0] - c[0], pts[:, 1] - c[1], h).sum() * cell
    return out


@dataclass(frozen=True, eq=False)
class IntensityModel:
    """A fitted (or fixed) intensity ``rho(x, l)``.

    Use :func:`fit_intensity` or :func:`homogeneous` rather than building
    instances directly.
    """

    kind: str
    window: Window
    n: int
    floor: float
    rate: Optional[float] = None
    data_xy: Optional[np.ndarray] = None
    bandwidth: Optional[np.ndarray] = None
    edge: Optional[np.ndarray] = None
    interp: Optional[RegularGridInterpolator] = None
    grid_bounds: Optional[tuple] = None
    label_freq: Optional[np.ndarray] = None  # index l-1
    label_models: Optional[tuple] = None

    def ground(self, xy) -> np.ndarray:
        """Unfloored ground intensity at ``xy`` (shape (..., 2))."""
        xy = np.asarray(xy, dtype=float)
        if self.kind == "homogeneous":
            return np.full(xy.shape[:-1], self.rate)
        if self.kind == "kernel":
            flat = xy.reshape(-1, 2)
            if len(self.data_xy) == 0:
                return np.zeros(xy.shape[:-1])
            dx = flat[:, None, 0] - self.data_xy[None, :, 0]
            dy = flat[:, None, 1] - self.data_xy[None, :, 1]
            vals = (_gauss(dx, dy, self.bandwidth) / self.edge[None, :]).sum(axis=1)
            return vals.reshape(xy.shape[:-1])
        x0, x1, y0, y1 = self.grid_bounds
        flat = xy.reshape(-1, 2)
        q = np.column_stack([np.clip(flat[:, 0], x0, x1), np.clip(flat[:, 1], y0, y1)])
        return self.interp(q).reshape(xy.shape[:-1])

    def label_factor(self, xy, labels) -> np.ndarray:
        labels = np.asarray(labels)
        if self.label_models is not None:
            per = np.stack([m.ground(xy) for m in self.label_models])
            tot = per.sum(axis=0)
            own = np.take_along_axis(per, (labels - 1)[None], axis=0)[0]
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(tot > 0, own / tot, 0.0)
        return self.label_freq[labels - 1]

    def evaluate(self, xy, labels=None):
        """Floored ``rho(x, l)`` and a mask of floored entries."""
        rho = self.ground(xy)
        if labels is not None and (self.label_freq is not None or self.label_models is not None):
            rho = rho * self.label_factor(xy, labels)
        floored = rho < self.floor
        return np.where(floored, self.floor, rho), floored

    def __call__(self, xy, labels=None) -> np.ndarray:
        return self.evaluate(xy, labels)[0]

    def describe(self) -> dict:
        d = {"kind": self.kind, "n": self.n}
        if self.kind == "homogeneous":
            d["rate"] = self.rate
        if self.kind == "kernel":
            d["bandwidth"] = [float(b) for b in self.bandwidth]
        if self.label_freq is not None:
            d["label_freq"] = [float(q) for q in self.label_freq]
        d["per_label"] = self.label_models is not None
        return d


def homogeneous(rate: float, window: Window, label_freq=None) -> IntensityModel:
    """A fixed constant intensity (e.g. the true rate of a simulation)."""
    if not rate > 0:
        raise InvalidArgument("rate must be positive")
    lf = None if label_freq is None else np.asarray(label_freq, dtype=float)
    return IntensityModel("homogeneous", window, 0, FLOOR_FACTOR * rate, rate=float(rate), label_freq=lf)


def _label_freq(p: Pattern):
    if p.labels is None:
        return None
    counts = np.bincount(p.labels, minlength=p.n_labels + 1)[1:]
    return counts / max(len(p), 1)


def _kernel(p_xy, window, n_total, bw) -> IntensityModel:
    edge = _edge_factors(window, p_xy, bw)
    floor = FLOOR_FACTOR * max(n_total, 1) / window.area
    return IntensityModel("kernel", window, len(p_xy), floor, data_xy=p_xy.copy(), bandwidth=bw, edge=edge)


def fit_intensity(
    p: Pattern,
    kind: str = "homogeneous",
    bandwidth: Union[str, float, tuple] = "scott",
    per_label: bool = False,
    grid_path=None,
) -> IntensityModel:
    """Fit an intensity model to ``p``.

    Parameters
    ----------
    kind : {"homogeneous", "kernel", "grid"}
        ``homogeneous`` gives ``n/|W|``. ``kernel`` is a Gaussian kernel
        estimate with per-point edge normalisation, so it integrates to ``n``
        over the window. ``grid`` bilinearly interpolates a user lattice read
        from ``grid_path`` (CSV ``x,y,rho``).
    bandwidth : "scott", a float (isotropic) or an (hx, hy) pair
    per_label : estimate ``Q(l | x)`` from per-label kernels instead of global
        label frequencies (kernel kind only)
    """
    n = len(p)
    w = p.window
    freq = _label_freq(p)
    if kind == "homogeneous":
        if n < 1:
            raise TooFewPoints("homogeneous intensity needs at least one point")
        rate = n / w.area
        return IntensityModel("homogeneous", w, n, FLOOR_FACTOR * rate, rate=rate, label_freq=freq)
    if kind == "kernel":
        if n < 2:
            raise TooFewPoints("kernel intensity needs at least two points")
        if isinstance(bandwidth, str):
            if bandwidth != "scott":
                raise InvalidArgument(f"unknown bandwidth rule {bandwidth!r}")
            bw = scott_bandwidth(p.xy)
            x0, x1, y0, y1 = w.bbox
            fallback = 0.05 * np.array([x1 - x0, y1 - y0])
            bw = np.where(bw > 0, bw, fallback)
        else:
            bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (2,)).copy()
            if not np.all(bw > 0):
                raise InvalidArgument("bandwidth must be positive")
        model = _kernel(np.asarray(p.xy), w, n, bw)
        label_models = None
        if per_label:
            if p.labels is None:
                raise InvalidArgument("per-label intensity needs labels")
            label_models = tuple(
                _kernel(np.asarray(p.xy[p.labels == l]), w, n, bw) for l in range(1, p.n_labels + 1)
            )
        return IntensityModel(
            "kernel", w, n, model.floor, data_xy=model.data_xy, bandwidth=bw, edge=model.edge,
            label_freq=freq, label_models=label_models,
        )
    if kind == "grid":
        if grid_path is None:
            raise InvalidArgument("grid intensity needs a grid CSV")
        return load_intensity_grid(grid_path, w, n=n, label_freq=freq)
    raise InvalidArgument(f"unknown intensity kind {kind!r}")


def load_intensity_grid(path, window: Window, n: int = 0, label_freq=None) -> IntensityModel:
    """Read a regular ``x,y,rho`` lattice; values are interpolated bilinearly."""
    if not os.path.exists(path):
        raise FileNotFound(f"no such file: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    for row in csv.DictReader(lines):
        try:
            rows.append((float(row["x"]), float(row["y"]), float(row["rho"])))
        except (KeyError, TypeError, ValueError):
            raise MalformedInput("intensity grid CSV needs numeric columns x,y,rho") from None
    arr = np.array(rows)
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    if len(xs) * len(ys) != len(arr) or len(xs) < 2 or len(ys) < 2:
        raise MalformedInput("intensity grid must be a full regular lattice")
    vals = np.full((len(xs), len(ys)), np.nan)
    vals[np.searchsorted(xs, arr[:, 0]), np.searchsorted(ys, arr[:, 1])] = arr[:, 2]
    if np.any(np.isnan(vals)) or np.any(vals < 0):
        raise MalformedInput("intensity grid values must be nonnegative and complete")
    interp = RegularGridInterpolator((xs, ys), vals, method="linear")
    floor = FLOOR_FACTOR * float(vals.mean()) if vals.mean() > 0 else FLOOR_FACTOR
    return IntensityModel(
        "grid", window, n, floor, interp=interp, grid_bounds=(xs[0], xs[-1], ys[0], ys[-1]),
        label_freq=None if label_freq is None else np.asarray(label_freq),
    )


def eval_intensity(m: IntensityModel, x, aux: Optional[AuxMark] = None) -> float:
    """Intensity at a single point ``x`` for auxiliary mark ``aux``."""
    x = np.asarray(x, dtype=float)
    if not bool(m.window.contains(x)):
        raise OutsideWindow(f"{tuple(x)} lies outside the window")
    label = None if aux is None else aux.label
    return float(m(x[None], None if label is None else np.array([label]))[0])


@dataclass(frozen=True)
class IntensitySpec:
    """Deferred intensity fit, refitted on every pattern it is applied to."""

    kind: str = "homogeneous"
    bandwidth: Union[str, float, tuple] = "scott"
    per_label: bool = False
    grid_path: Optional[str] = None

    def fit(self, p: Pattern) -> IntensityModel:
        return fit_intensity(p, self.kind, self.bandwidth, self.per_label, self.grid_path)

    def describe(self) -> dict:
        bw = self.bandwidth if isinstance(self.bandwidth, str) else list(np.atleast_1d(self.bandwidth).astype(float))
        return {"kind": self.kind, "bandwidth": bw, "per_label": self.per_label, "grid_path": self.grid_path}


def resolve_intensity(spec, p: Pattern) -> IntensityModel:
    if isinstance(spec, IntensityModel):
        return spec
    if isinstance(spec, str):
        spec = IntensitySpec(spec)
    return spec.fit(p)
