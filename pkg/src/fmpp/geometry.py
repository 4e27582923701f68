"""Planar observation windows, structuring elements and edge-correction weights.

Windows are rectangles or convex polygons. Structuring elements (the spatial
test sets entering the K-measures) are origin-symmetric closed sets: balls,
double-cone sectors and boxes. All functions here are pure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import EmptyErosion, InvalidArgument, InvalidWindow, OutsideWindow, Unsupported, ZeroArc

__all__ = [
    "Rectangle",
    "ConvexPolygon",
    "Window",
    "rect",
    "polygon",
    "parse_window",
    "Ball",
    "Sector",
    "Box",
    "StructElem",
    "EDGE_CORRECTIONS",
    "normalize_correction",
    "area",
    "erode",
    "intersect",
    "shifted_intersection_volume",
    "arc_fraction_inside",
    "edge_weight",
]

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.xmax, self.ymin, self.ymax)
        if not all(np.isfinite(vals)):
            raise InvalidWindow("rectangle bounds must be finite")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise InvalidWindow(f"degenerate rectangle {vals}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def sides(self):
        return np.array([self.xmax - self.xmin, self.ymax - self.ymin])

    @property
    def bbox(self):
        return (self.xmin, self.xmax, self.ymin, self.ymax)

    @property
    def vertices(self) -> np.ndarray:
        return np.array(
            [
                [self.xmin, self.ymin],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
                [self.xmin, self.ymax],
            ]
        )

    def halfplanes(self):
        normals = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        offsets = np.array([self.xmax, self.ymax, -self.xmin, -self.ymin])
        return normals, offsets

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def translate(self, dx: float, dy: float) -> "Rectangle":
        return Rectangle(self.xmin + dx, self.xmax + dx, self.ymin + dy, self.ymax + dy)

    def to_text(self) -> str:
        return f"rect({self.xmin!r}, {self.xmax!r}, {self.ymin!r}, {self.ymax!r})"


@dataclass(frozen=True)
class ConvexPolygon:
    """Strictly convex polygon, vertices in counter-clockwise order."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidWindow("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidWindow("polygon vertices must be finite")
        object.__setattr__(self, "vertices", tuple(map(tuple, v.tolist())))
        if _signed_area(v) <= 0:
            raise InvalidWindow("polygon must have positive (counter-clockwise) signed area")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise InvalidWindow("polygon must be strictly convex")

    @property
    def area(self) -> float:
        return _signed_area(np.asarray(self.vertices))

    @property
    def bbox(self):
        v = np.asarray(self.vertices)
        return (v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max())

    def halfplanes(self):
        v = np.asarray(self.vertices)
        e = np.roll(v, -1, axis=0) - v
        normals = np.column_stack([e[:, 1], -e[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offsets = np.einsum("ij,ij->i", normals, v)
        return normals, offsets

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        normals, offsets = self.halfplanes()
        slack = 1e-12 * max(1.0, np.abs(offsets).max())
        return np.all(pts @ normals.T <= offsets + slack, axis=-1)

    def translate(self, dx: float, dy: float) -> "ConvexPolygon":
        return ConvexPolygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def to_text(self) -> str:
        return "poly(" + "; ".join(f"{x!r} {y!r}" for x, y in self.vertices) + ")"


Window = Union[Rectangle, ConvexPolygon]


def rect(xmin, xmax, ymin, ymax) -> Rectangle:
    return Rectangle(float(xmin), float(xmax), float(ymin), float(ymax))


def polygon(vertices) -> ConvexPolygon:
    return ConvexPolygon(tuple(map(tuple, np.asarray(vertices, dtype=float).tolist())))


def parse_window(text: str) -> Window:
    """Parse ``rect(xmin, xmax, ymin, ymax)`` or ``poly(x y; x y; ...)``.

    A bare list of numbers ``x1 y1, x2 y2, ...`` is read as polygon vertices.
    """
    t = text.strip()
    try:
        if t.startswith("rect(") and t.endswith(")"):
            vals = [float(v) for v in t[5:-1].split(",")]
            if len(vals) != 4:
                raise InvalidWindow("rect needs four numbers")
            return rect(*vals)
        body = t[5:-1] if t.startswith("poly(") and t.endswith(")") else t
        rows = [r.replace(",", " ").split() for r in body.replace(";", "\n").replace("),", "\n").splitlines()]
        if len(rows) == 1:  # "x1 y1, x2 y2" on one line
            rows = [r.split() for r in body.split(",")]
        verts = [[float(a) for a in r] for r in rows if r]
    except ValueError:
        raise InvalidWindow(f"cannot parse window {text!r}") from None
    if any(len(v) != 2 for v in verts):
        raise InvalidWindow(f"cannot parse window {text!r}")
    return polygon(verts)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clip(v: np.ndarray, normal, offset) -> np.ndarray:
    """Sutherland-Hodgman step: keep the part of convex polygon ``v`` with n.x <= c."""
    if len(v) == 0:
        return v
    s = v @ normal - offset
    out = []
    k = len(v)
    for i in range(k):
        j = (i + 1) % k
        if s[i] <= 0:
            out.append(v[i])
        if (s[i] < 0 < s[j]) or (s[j] < 0 < s[i]):
            lam = s[i] / (s[i] - s[j])
            out.append(v[i] + lam * (v[j] - v[i]))
    return np.array(out) if out else np.empty((0, 2))


def _halfplane_polygon(normals, offsets, start: np.ndarray) -> np.ndarray:
    v = start
    for n, c in zip(normals, offsets):
        v = _clip(v, n, c)
        if len(v) < 3:
            return np.empty((0, 2))
    return v


def _as_window(v: np.ndarray) -> Window:
    """Wrap a clipped vertex array; tiny or degenerate results raise EmptyErosion."""
    if len(v) < 3 or _signed_area(v) <= 1e-14:
        raise EmptyErosion("intersection has zero area")
    # drop near-duplicate vertices produced by clipping through a corner
    keep = [v[0]]
    for p in v[1:]:
        if np.hypot(*(p - keep[-1])) > 1e-12:
            keep.append(p)
    if len(keep) > 1 and np.hypot(*(keep[0] - keep[-1])) <= 1e-12:
        keep.pop()
    v = np.array(keep)
    if len(v) < 3:
        raise EmptyErosion("intersection has zero area")
    # drop collinear vertices so the strict convexity check passes
    while True:
        e_prev = v - np.roll(v, 1, axis=0)
        e_next = np.roll(v, -1, axis=0) - v
        cross = e_prev[:, 0] * e_next[:, 1] - e_prev[:, 1] * e_next[:, 0]
        scale = np.linalg.norm(e_prev, axis=1) * np.linalg.norm(e_next, axis=1)
        bad = cross <= 1e-12 * scale
        if not bad.any():
            break
        v = v[~(np.arange(len(v)) == np.argmax(bad))]
        if len(v) < 3:
            raise EmptyErosion("intersection has zero area")
    return ConvexPolygon(tuple(map(tuple, v.tolist())))


def _vertices(w: Window) -> np.ndarray:
    return np.asarray(w.vertices, dtype=float)


# ---------------------------------------------------------------------------
# structuring elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    r: float = 1.0

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidArgument("ball radius must be >= 0")

    @property
    def reach(self) -> float:
        return self.r

    @property
    def area(self) -> float:
        return np.pi * self.r**2

    def scaled(self, s: float) -> "Ball":
        return Ball(self.r * s)

    def critical_scale(self, v) -> np.ndarray:
        """Smallest s with ``v`` in ``self.scaled(s)``."""
        v = np.asarray(v, dtype=float)
        d = np.hypot(v[..., 0], v[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(d == 0, 0.0, d / self.r) if self.r > 0 else np.where(d == 0, 0.0, np.inf)

    def contains(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.hypot(v[..., 0], v[..., 1]) <= self.r


@dataclass(frozen=True)
class Sector:
    """Double cone of directions [phi, psi] and [phi+pi, psi+pi], cut at radius r."""

    r: float = 1.0
    phi: float = 0.0
    psi: float = np.pi / 2

    def __post_init__(self):
        if not self.r >= 0:
            raise InvalidArgument("sector radius must be >= 0")
        if not (-np.pi / 2 <= self.phi <= self.psi <= self.phi + np.pi):
            raise InvalidArgument("sector needs -pi/2 <= phi <= psi <= phi + pi")

    @property
    def reach(self) -> float:
        return self.r

    @property
    def width(self) -> float:
        return self.psi - self.phi

    @property
    def area(self) -> float:
        return self.width * self.r**2

    def scaled(self, s: float) -> "Sector":
        return Sector(self.r * s, self.phi, self.psi)

    def _in_cone(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.width <= 0:
            # measure-zero ray pair: treated as empty
            return np.zeros(v.shape[:-1], dtype=bool)
        if self.width >= np.pi:
            return np.ones(v.shape[:-1], dtype=bool)
        theta = np.arctan2(v[..., 1], v[..., 0])
        return np.mod(theta - self.phi, np.pi) <= self.width

    def critical_scale(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        d = np.hypot(v[..., 0], v[..., 1])
        with np.errstate(divide="ignore", invalid="ignore"):
            s = d / self.r if self.r > 0 else np.where(d == 0, 0.0, np.inf)
        return np.where(self._in_cone(v), s, np.inf)

    def contains(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return (np.hypot(v[..., 0], v[..., 1]) <= self.r) & self._in_cone(v)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [-hx, hx] x [-hy, hy]."""

    hx: float = 1.0
    hy: float = 1.0

    def __post_init__(self):
        if not (self.hx >= 0 and self.hy >= 0):
            raise InvalidArgument("box half-widths must be >= 0")

    @property
    def reach(self) -> float:
        return float(np.hypot(self.hx, self.hy))

    @property
    def area(self) -> float:
        return 4.0 * self.hx * self.hy

    def scaled(self, s: float) -> "Box":
        return Box(self.hx * s, self.hy * s)

    def critical_scale(self, v) -> np.ndarray:
        v = np.abs(np.asarray(v, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            sx = np.where(v[..., 0] == 0, 0.0, v[..., 0] / self.hx) if self.hx > 0 else np.where(v[..., 0] == 0, 0.0, np.inf)
            sy = np.where(v[..., 1] == 0, 0.0, v[..., 1] / self.hy) if self.hy > 0 else np.where(v[..., 1] == 0, 0.0, np.inf)
        return np.maximum(sx, sy)

    def contains(self, v) -> np.ndarray:
        v = np.abs(np.asarray(v, dtype=float))
        return (v[..., 0] <= self.hx) & (v[..., 1] <= self.hy)


StructElem = Union[Ball, Sector, Box]


# ---------------------------------------------------------------------------
# set operations
# ---------------------------------------------------------------------------


def area(w: Window) -> float:
    """Lebesgue area of a window."""
    return float(w.area)


def _inset(c: StructElem):
    if isinstance(c, Box):
        return c.hx, c.hy
    # sectors are over-eroded by their bounding ball
    return c.r, c.r


def erode(w: Window, c: StructElem) -> Window:
    """Minkowski subtraction ``W - C = {x : x + C inside W}``.

    Sectors are replaced by their bounding ball, which erodes slightly more
    than necessary but keeps ``x + C`` inside ``W``. Raises
    :class:`EmptyErosion` when the result has zero area.
    """
    hx, hy = _inset(c)
    if isinstance(w, Rectangle):
        x0, x1, y0, y1 = w.xmin + hx, w.xmax - hx, w.ymin + hy, w.ymax - hy
        if not (x0 < x1 and y0 < y1):
            raise EmptyErosion(f"window eroded by {c} is empty")
        return Rectangle(x0, x1, y0, y1)
    if hx == 0 and hy == 0:
        return w
    normals, offsets = w.halfplanes()
    if isinstance(c, Box):
        support = c.hx * np.abs(normals[:, 0]) + c.hy * np.abs(normals[:, 1])
    else:
        support = np.full(len(offsets), c.r)
    v = _halfplane_polygon(normals, offsets - support, _vertices(w))
    return _as_window(v)


def intersect(a: Window, b: Window) -> Window:
    if isinstance(a, Rectangle) and isinstance(b, Rectangle):
        x0, x1 = max(a.xmin, b.xmin), min(a.xmax, b.xmax)
        y0, y1 = max(a.ymin, b.ymin), min(a.ymax, b.ymax)
        if not (x0 < x1 and y0 < y1):
            raise EmptyErosion("windows do not overlap")
        return Rectangle(x0, x1, y0, y1)
    normals, offsets = b.halfplanes()
    return _as_window(_halfplane_polygon(normals, offsets, _vertices(a)))


def erode_all(w: Window, elems: Sequence[StructElem]) -> Window:
    """Intersection of the erosions of ``w`` by each element."""
    out = erode(w, elems[0])
    for c in elems[1:]:
        out = intersect(out, erode(w, c))
    return out


def shifted_intersection_volume(w: Window, shifts) -> float:
    """Area of ``W`` intersected with ``W + u`` for every shift ``u``."""
    u = np.atleast_2d(np.asarray(shifts, dtype=float))
    if isinstance(w, Rectangle):
        return float(_rect_shift_volume(w.sides, u[None])[0])
    normals, offsets = w.halfplanes()
    v = _vertices(w)
    for s in u:
        v = _halfplane_polygon(normals, offsets + normals @ s, v)
        if len(v) == 0:
            return 0.0
    return max(0.0, _signed_area(v))


def _rect_shift_volume(sides, u) -> np.ndarray:
    """Vectorized rectangle overlap; ``u`` has shape (T, k, 2)."""
    pos = np.maximum(u, 0.0).max(axis=1)
    neg = np.maximum(-u, 0.0).max(axis=1)
    return np.prod(np.maximum(0.0, sides - pos - neg), axis=-1)


def translational_volumes(w: Window, u) -> np.ndarray:
    """Denominators of the translational weight for displacement tuples.

    ``u`` has shape (T, n-1, 2) holding ``x_i - x`` for each tuple. The region
    is ``W`` intersected with ``W - u_i``. This keeps the weight unbiased
    for non-symmetric polygons too; for rectangles the sign of the shifts
    does not matter.
    """
    u = np.asarray(u, dtype=float)
    if isinstance(w, Rectangle):
        return _rect_shift_volume(w.sides, u)
    return np.array([shifted_intersection_volume(w, -row) for row in u])


def _rect_arc_fraction(w: Rectangle, cx, cy, r) -> np.ndarray:
    """Fraction of the circle of radius ``r`` around (cx, cy) that lies in ``w``.

    Centres must lie inside ``w``. Uses inclusion-exclusion over the four edge
    arcs; adjacent arcs overlap exactly when the shared corner is inside the
    circle, and no three arcs can overlap for an interior centre.
    """
    cx, cy, r = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (cx, cy, r)))
    d = np.stack([cx - w.xmin, w.ymax - cy, w.xmax - cx, cy - w.ymin])  # left, top, right, bottom
    d = np.maximum(d, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r > 0, np.minimum(d / r, 1.0), 1.0)
    half = np.arccos(ratio)
    outside = 2.0 * half.sum(axis=0)
    for a, b in ((0, 1), (1, 2), (2, 3), (3, 0)):
        corner_in = d[a] ** 2 + d[b] ** 2 < r**2
        outside = outside - np.where(corner_in, half[a] + half[b] - np.pi / 2, 0.0)
    return np.clip(1.0 - outside / TWO_PI, 0.0, 1.0)


def _poly_arc_fraction(w: ConvexPolygon, center, r: float) -> float:
    """Exact arc fraction for a convex polygon via circle/edge crossing angles."""
    c = np.asarray(center, dtype=float)
    v = _vertices(w)
    nxt = np.roll(v, -1, axis=0)
    angles = []
    for p0, p1 in zip(v, nxt):
        e = p1 - p0
        f = p0 - c
        a = e @ e
        b = 2 * f @ e
        cc = f @ f - r * r
        disc = b * b - 4 * a * cc
        if disc < 0:
            continue
        sq = np.sqrt(disc)
        for s in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
            if 0.0 <= s <= 1.0:
                q = p0 + s * e - c
                angles.append(np.arctan2(q[1], q[0]) % TWO_PI)
    if not angles:
        probe = c + np.array([r, 0.0])
        return 1.0 if w.contains(probe) else 0.0
    angles = np.unique(np.array(angles))
    bounds = np.append(angles, angles[0] + TWO_PI)
    inside = 0.0
    for a0, a1 in zip(bounds[:-1], bounds[1:]):
        if a1 - a0 <= 0:
            continue
        mid = 0.5 * (a0 + a1)
        if w.contains(c + r * np.array([np.cos(mid), np.sin(mid)])):
            inside += a1 - a0
    return inside / TWO_PI


def arc_fractions(w: Window, centers, radii) -> np.ndarray:
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    radii = np.broadcast_to(np.asarray(radii, dtype=float), (len(centers),))
    if isinstance(w, Rectangle):
        return _rect_arc_fraction(w, centers[:, 0], centers[:, 1], radii)
    return np.array([_poly_arc_fraction(w, c, r) for c, r in zip(centers, radii)])


def arc_fraction_inside(w: Window, center, radius: float) -> float:
    """Fraction of the circle ``|y - center| = radius`` lying inside ``w``."""
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    if not w.contains(np.asarray(center, dtype=float)):
        raise OutsideWindow(f"centre {tuple(center)} outside window")
    frac = float(arc_fractions(w, [center], radius)[0])
    if frac <= 0:
        raise ZeroArc("circle lies entirely outside the window")
    return frac


# ---------------------------------------------------------------------------
# edge corrections
# ---------------------------------------------------------------------------

EDGE_CORRECTIONS = ("minus-sampling", "translational", "isotropic", "none")
_ALIASES = {
    "minus": "minus-sampling",
    "border": "minus-sampling",
    "trans": "translational",
    "translation": "translational",
    "iso": "isotropic",
    "ripley": "isotropic",
}


def normalize_correction(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in EDGE_CORRECTIONS:
        raise InvalidArgument(f"unknown edge correction {kind!r}")
    return kind


def edge_weight(kind: str, w: Window, x, neighbors, elems) -> float:
    """Edge-correction weight for a conditioning point ``x`` and its neighbours.

    Parameters
    ----------
    kind : {"minus-sampling", "translational", "isotropic", "none"}
    w : Window
    x : (2,) point in ``w``
    neighbors : sequence of n-1 points
    elems : sequence of n-1 structuring elements (used by minus sampling)
    """
    kind = normalize_correction(kind)
    x = np.asarray(x, dtype=float)
    nb = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    if len(nb) != len(elems):
        raise InvalidArgument("need one structuring element per neighbour")
    if kind == "none":
        return 1.0 / w.area
    if kind == "minus-sampling":
        eroded = erode_all(w, list(elems))
        return 1.0 / eroded.area if bool(eroded.contains(x)) else 0.0
    if kind == "translational":
        vol = float(translational_volumes(w, (nb - x)[None])[0])
        return 1.0 / vol if vol > 0 else 0.0
    if len(nb) != 1:
        raise Unsupported("isotropic correction requires n = 2")
    d = float(np.hypot(*(nb[0] - x)))
    if d == 0:
        return 1.0 / w.area
    # full-circle/inside-arc ratio, scaled by 1/|W| like the other corrections
    return 1.0 / (w.area * arc_fraction_inside(w, x, d))
