"""Functional marked point patterns: data model, mark sets and CSV ingestion.

A :class:`Pattern` stores ground locations, optional auxiliary marks (an
integer label and/or a real scalar) and one sampled curve per point. All
curves share one time grid, so curves are held as an ``(n, m)`` array.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .errors import (
    CoincidentPoints,
    DuplicateId,
    FileNotFound,
    GridMismatch,
    InvalidArgument,
    MalformedInput,
    MissingCurve,
    OrphanCurve,
    PointOutsideWindow,
)
from .geometry import Window

__all__ = [
    "Curve",
    "AuxMark",
    "FmPoint",
    "AuxSchema",
    "Pattern",
    "MarkSet",
    "LabelIn",
    "ScalarIn",
    "SupThreshold",
    "IntegralThreshold",
    "mark_in",
    "restrict",
    "pairwise_distances",
    "load_pattern",
    "save_pattern",
]


@dataclass(frozen=True)
class Curve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or len(grid) < 2:
            raise GridMismatch("a curve needs at least two grid points")
        if np.any(np.diff(grid) <= 0):
            raise GridMismatch("curve grid must be strictly increasing")
        if values.shape != grid.shape:
            raise GridMismatch("curve values and grid differ in length")
        if not np.all(np.isfinite(values)):
            raise MalformedInput("curve values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class AuxMark:
    label: Optional[int] = None
    scalar: Optional[float] = None


@dataclass(frozen=True)
class FmPoint:
    id: str
    loc: tuple
    aux: AuxMark
    curve: Curve


@dataclass(frozen=True)
class AuxSchema:
    """Declared auxiliary marks. ``n_labels`` = k_d, labels run over 1..k_d."""

    n_labels: Optional[int] = None
    scalar: bool = False


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


class Pattern:
    """An observed functional marked point pattern in a window.

    Parameters
    ----------
    window : Window
    xy : (n, 2) array of locations
    grid : (m,) strictly increasing time grid shared by all curves
    curves : (n, m) array of curve samples
    ids : optional sequence of n unique strings (defaults to ``"0".."n-1"``)
    labels : optional (n,) integer labels in 1..n_labels
    scalars : optional (n,) real auxiliary marks
    n_labels : number of label classes (inferred from ``labels`` if omitted)
    """

    def __init__(
        self,
        window: Window,
        xy,
        grid,
        curves,
        ids=None,
        labels=None,
        scalars=None,
        n_labels: Optional[int] = None,
    ):
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        n = len(xy)
        grid = np.asarray(grid, dtype=float)
        curves = np.asarray(curves, dtype=float).reshape(n, -1) if n else np.empty((0, len(grid)))
        Curve(grid, np.zeros_like(grid))  # grid validation
        if curves.shape != (n, len(grid)):
            raise GridMismatch(f"curves have shape {curves.shape}, expected {(n, len(grid))}")
        if not np.all(np.isfinite(curves)):
            raise MalformedInput("curve values must be finite")
        if not np.all(np.isfinite(xy)):
            raise MalformedInput("locations must be finite")
        ids = tuple(str(i) for i in range(n)) if ids is None else tuple(str(i) for i in ids)
        if len(ids) != n:
            raise InvalidArgument("ids and locations differ in length")
        if len(set(ids)) != n:
            raise DuplicateId("point ids must be unique")
        if n and not np.all(window.contains(xy)):
            bad = ids[int(np.argmin(window.contains(xy)))]
            raise PointOutsideWindow(f"point {bad!r} lies outside the window")
        if n > 1:
            uniq = np.unique(xy, axis=0)
            if len(uniq) < n:
                raise CoincidentPoints("two points share the same location")
        if labels is not None:
            labels = np.asarray(labels)
            if labels.shape != (n,) or (n and not np.issubdtype(labels.dtype, np.integer)):
                raise MalformedInput("labels must be an integer vector")
            labels = labels.astype(np.int64)
            if n_labels is None:
                n_labels = int(labels.max()) if n else 0
            if n and (labels.min() < 1 or labels.max() > n_labels):
                raise MalformedInput(f"labels must lie in 1..{n_labels}")
        if scalars is not None:
            scalars = np.asarray(scalars, dtype=float)
            if scalars.shape != (n,) or not np.all(np.isfinite(scalars)):
                raise MalformedInput("scalar marks must be a finite vector")
        self.window = window
        self.xy = _frozen(xy)
        self.grid = _frozen(grid)
        self.curves = _frozen(curves)
        self.ids = ids
        self.labels = None if labels is None else _frozen(labels)
        self.scalars = None if scalars is None else _frozen(scalars)
        self.n_labels = n_labels if labels is not None else None

    def __len__(self) -> int:
        return len(self.xy)

    def __getitem__(self, i: int) -> FmPoint:
        aux = AuxMark(
            None if self.labels is None else int(self.labels[i]),
            None if self.scalars is None else float(self.scalars[i]),
        )
        return FmPoint(self.ids[i], tuple(self.xy[i]), aux, Curve(self.grid, self.curves[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __repr__(self) -> str:
        return f"Pattern(n={len(self)}, m={len(self.grid)}, window={self.window})"

    @property
    def schema(self) -> AuxSchema:
        return AuxSchema(self.n_labels, self.scalars is not None)

    def subset(self, idx) -> "Pattern":
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        idx = idx.astype(np.intp, copy=False)
        return self.replace(
            xy=self.xy[idx],
            curves=self.curves[idx],
            ids=[self.ids[i] for i in idx],
            labels=None if self.labels is None else self.labels[idx],
            scalars=None if self.scalars is None else self.scalars[idx],
        )

    def replace(self, **kw) -> "Pattern":
        args = dict(
            window=self.window,
            xy=self.xy,
            grid=self.grid,
            curves=self.curves,
            ids=self.ids,
            labels=self.labels,
            scalars=self.scalars,
            n_labels=self.n_labels,
        )
        args.update(kw)
        return Pattern(**args)

    def translate(self, dx: float, dy: float) -> "Pattern":
        return self.replace(window=self.window.translate(dx, dy), xy=self.xy + np.array([dx, dy]))

    @cached_property
    def distances(self):
        """Cached ``(displacements, distances)`` over all ordered pairs.

        ``displacements[i, j] = xy[j] - xy[i]``.
        """
        disp = self.xy[None, :, :] - self.xy[:, None, :]
        dist = np.hypot(disp[..., 0], disp[..., 1])
        disp.setflags(write=False)
        dist.setflags(write=False)
        return disp, dist

    def equals(self, other: "Pattern") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            self.window == other.window
            and self.ids == other.ids
            and self.n_labels == other.n_labels
            and same(self.xy, other.xy)
            and same(self.grid, other.grid)
            and same(self.curves, other.curves)
            and same(self.labels, other.labels)
            and same(self.scalars, other.scalars)
        )


# ---------------------------------------------------------------------------
# mark sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LabelIn:
    labels: frozenset

    def __init__(self, labels: Iterable[int]):
        object.__setattr__(self, "labels", frozenset(int(l) for l in labels))

    def mask(self, p: Pattern) -> np.ndarray:
        if p.labels is None:
            return np.zeros(len(p), dtype=bool)
        return np.isin(p.labels, list(self.labels))


@dataclass(frozen=True)
class ScalarIn:
    lo: float
    hi: float

    def mask(self, p: Pattern) -> np.ndarray:
        if p.scalars is None:
            return np.zeros(len(p), dtype=bool)
        return (p.scalars >= self.lo) & (p.scalars <= self.hi)


@dataclass(frozen=True)
class SupThreshold:
    """``max_j |f(t_j)| > c`` (above) or ``<= c`` (below)."""

    c: float
    above: bool = True

    def mask(self, p: Pattern) -> np.ndarray:
        sup = np.abs(p.curves).max(axis=1) if len(p) else np.empty(0)
        return sup > self.c if self.above else sup <= self.c


@dataclass(frozen=True)
class IntegralThreshold:
    """Trapezoidal integral of the curve ``> c`` (above) or ``<= c`` (below)."""

    c: float
    above: bool = True

    def mask(self, p: Pattern) -> np.ndarray:
        integral = np.trapezoid(p.curves, p.grid, axis=1) if len(p) else np.empty(0)
        return integral > self.c if self.above else integral <= self.c


@dataclass(frozen=True)
class MarkSet:
    """A product set D x E given as conjunctions of predicates.

    Empty ``aux``/``func`` tuples mean "all marks". ``a & b`` is the
    intersection of two mark sets.
    """

    aux: tuple = ()
    func: tuple = ()

    @classmethod
    def all(cls) -> "MarkSet":
        return cls()

    @property
    def is_full(self) -> bool:
        return not self.aux and not self.func

    def __and__(self, other: "MarkSet") -> "MarkSet":
        return MarkSet(self.aux + other.aux, self.func + other.func)

    def mask(self, p: Pattern) -> np.ndarray:
        out = np.ones(len(p), dtype=bool)
        for pred in self.aux + self.func:
            out &= pred.mask(p)
        return out


def mark_set(aux=None, func=None) -> MarkSet:
    """Convenience constructor taking single predicates or ``None``."""
    return MarkSet(() if aux is None else (aux,), () if func is None else (func,))


def mark_in(ms: MarkSet, point: FmPoint) -> bool:
    """Whether a single point's marks fall in ``ms``."""
    # a one-point pattern in an unbounded frame reuses the vectorized predicates
    lab = None if point.aux.label is None else [point.aux.label]
    sc = None if point.aux.scalar is None else [point.aux.scalar]
    single = _SinglePoint(point.curve.grid, point.curve.values[None], lab, sc)
    return bool(ms.mask(single)[0])


@dataclass
class _SinglePoint:
    grid: np.ndarray
    curves: np.ndarray
    labels: Optional[list] = None
    scalars: Optional[list] = None

    def __post_init__(self):
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
        if self.scalars is not None:
            self.scalars = np.asarray(self.scalars, dtype=float)

    def __len__(self):
        return 1


def restrict(p: Pattern, ms: MarkSet) -> Pattern:
    """Sub-pattern of points with marks in ``ms``; window and grid are kept."""
    return p.subset(ms.mask(p))


def pairwise_distances(p: Pattern):
    """Distances and displacement vectors over ordered pairs.

    Returns ``(i, j, disp, dist)`` for every ordered pair ``i != j`` with
    ``disp = xy[j] - xy[i]``. The full tables are cached on the pattern.
    """
    disp, dist = p.distances
    n = len(p)
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    return i, j, disp[i, j], dist[i, j]


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------


def _rows(source):
    """Yield dict rows from a path or file-like, skipping ``#`` comment lines."""
    if isinstance(source, (str, os.PathLike)):
        if not os.path.exists(source):
            raise FileNotFound(f"no such file: {source}")
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise MalformedInput("empty CSV")
    reader.fieldnames = [f.strip() for f in reader.fieldnames]
    for row in reader:
        yield {k: (v.strip() if isinstance(v, str) else v) for k, v in row.items()}


def _float(s, what):
    try:
        return float(s)
    except (TypeError, ValueError):
        raise MalformedInput(f"cannot parse {what} value {s!r}") from None


def load_pattern(points_source, curves_source, window: Window, aux_schema: Optional[AuxSchema] = None) -> Pattern:
    """Read a pattern from a points CSV and a long-form curves CSV.

    points: ``id,x,y[,label][,scalar]``; curves: ``id,t,value``. Every point
    needs a curve and all curves must be sampled on the same set of times.
    """
    ids, xy, labels, scalars = [], [], [], []
    seen = set()
    for row in _rows(points_source):
        if not {"id", "x", "y"} <= row.keys():
            raise MalformedInput("points CSV needs columns id,x,y")
        pid = row["id"]
        if pid in seen:
            raise DuplicateId(f"duplicate point id {pid!r}")
        seen.add(pid)
        ids.append(pid)
        xy.append((_float(row["x"], "x"), _float(row["y"], "y")))
        if row.get("label") not in (None, ""):
            try:
                labels.append(int(row["label"]))
            except ValueError:
                raise MalformedInput(f"bad label {row['label']!r}") from None
        if row.get("scalar") not in (None, ""):
            scalars.append(_float(row["scalar"], "scalar"))

    if isinstance(curves_source, (str, os.PathLike)) and not os.path.exists(curves_source):
        raise MissingCurve(f"curves file not found: {curves_source}")
    samples: dict = {}
    for row in _rows(curves_source):
        if not {"id", "t", "value"} <= row.keys():
            raise MalformedInput("curves CSV needs columns id,t,value")
        per_id = samples.setdefault(row["id"], {})
        t = _float(row["t"], "t")
        if t in per_id:
            raise GridMismatch(f"repeated time {t} for curve {row['id']!r}")
        per_id[t] = _float(row["value"], "value")

    for pid in ids:
        if pid not in samples:
            raise MissingCurve(f"point {pid!r} has no curve rows")
    orphans = set(samples) - seen
    if orphans:
        raise OrphanCurve(f"curves without points: {sorted(orphans)[:5]}")

    grid = None
    curves = []
    for pid in ids:
        times = sorted(samples[pid])
        if grid is None:
            grid = times
        elif times != grid:
            raise GridMismatch(f"curve {pid!r} is sampled on a different grid")
        curves.append([samples[pid][t] for t in times])
    if grid is None:
        raise MalformedInput("no points")

    n = len(ids)
    schema = aux_schema or AuxSchema()
    if labels and len(labels) != n:
        raise MalformedInput("label column must be filled for every point")
    if scalars and len(scalars) != n:
        raise MalformedInput("scalar column must be filled for every point")
    if schema.n_labels is not None and not labels:
        raise MalformedInput("aux schema declares labels but the points CSV has none")
    if schema.scalar and not scalars:
        raise MalformedInput("aux schema declares scalars but the points CSV has none")
    return Pattern(
        window,
        np.array(xy),
        np.array(grid),
        np.array(curves),
        ids=ids,
        labels=np.array(labels, dtype=np.int64) if labels else None,
        scalars=np.array(scalars) if scalars else None,
        n_labels=schema.n_labels,
    )


def save_pattern(p: Pattern, points_path, curves_path) -> None:
    """Write the two CSV files read by :func:`load_pattern` (lossless floats)."""
    cols = ["id", "x", "y"]
    if p.labels is not None:
        cols.append("label")
    if p.scalars is not None:
        cols.append("scalar")
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for i, pid in enumerate(p.ids):
        row = [pid, repr(float(p.xy[i, 0])), repr(float(p.xy[i, 1]))]
        if p.labels is not None:
            row.append(str(int(p.labels[i])))
        if p.scalars is not None:
            row.append(repr(float(p.scalars[i])))
        buf.write(",".join(row) + "\n")
    with open(points_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    buf = io.StringIO()
    buf.write("id,t,value\n")
    for i, pid in enumerate(p.ids):
        for t, v in zip(p.grid, p.curves[i]):
            buf.write(f"{pid},{float(t)!r},{float(v)!r}\n")
    with open(curves_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
