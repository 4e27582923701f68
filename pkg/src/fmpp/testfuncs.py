"""Test functions on tuples of marks.

Integrals over the time grid use the uniform left-Riemann weight (b - a)/m,
so with 20 yearly samples over [1998, 2017] each sample carries weight 19/20.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ArityMismatch, EmptyPattern, InvalidArgument, MissingAuxScalar, NonpositiveKlInput
from .pattern import Curve, Pattern

__all__ = ["TestFunction", "evaluate", "tuple_values", "empirical_mean_curve", "parse_test_function"]

BINARY_KINDS = ("lp", "sup", "kl", "inner", "deriv-l2", "variogram", "aux-product", "aux-variogram")
KINDS = ("one", "sum-of", "max-of") + BINARY_KINDS


@dataclass(frozen=True)
class TestFunction:
    """A test function ``t`` on n-tuples of (aux, curve) marks.

    ``param`` is the exponent p for ``lp`` and the derivative order k for
    ``deriv-l2``. ``mean_curve`` is the fixed centring curve of ``variogram``;
    when ``None`` it is taken to be the empirical mean of the pattern the
    function is evaluated on (see :meth:`bind`).
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    param: Optional[float] = None
    mean_curve: Optional[tuple] = None
    parts: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown test function kind {self.kind!r}")
        if self.kind == "lp" and not (self.param is not None and self.param >= 1):
            raise InvalidArgument("lp needs p >= 1")
        if self.kind == "deriv-l2" and not (self.param is not None and int(self.param) == self.param and self.param >= 1):
            raise InvalidArgument("deriv-l2 needs an integer order k >= 1")
        if self.kind in ("sum-of", "max-of") and not self.parts:
            raise InvalidArgument(f"{self.kind} needs at least one part")
        if self.mean_curve is not None:
            object.__setattr__(self, "mean_curve", tuple(float(v) for v in self.mean_curve))

    # constructors -----------------------------------------------------------
    @classmethod
    def one(cls):
        return cls("one")

    @classmethod
    def lp(cls, p=2.0):
        return cls("lp", float(p))

    @classmethod
    def sup(cls):
        return cls("sup")

    @classmethod
    def kl(cls):
        return cls("kl")

    @classmethod
    def inner(cls):
        return cls("inner")

    @classmethod
    def deriv_l2(cls, k=1):
        return cls("deriv-l2", int(k))

    @classmethod
    def variogram(cls, mean_curve=None):
        return cls("variogram", mean_curve=None if mean_curve is None else tuple(np.asarray(mean_curve, dtype=float)))

    @classmethod
    def aux_product(cls):
        return cls("aux-product")

    @classmethod
    def aux_variogram(cls):
        return cls("aux-variogram")

    @classmethod
    def sum_of(cls, *parts):
        return cls("sum-of", parts=tuple(parts))

    @classmethod
    def max_of(cls, *parts):
        return cls("max-of", parts=tuple(parts))

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction.sum_of(self, other)

    # ------------------------------------------------------------------------
    def supports_arity(self, n: int) -> bool:
        if self.kind == "one":
            return n >= 1
        if self.kind in ("sum-of", "max-of"):
            return all(p.supports_arity(n) for p in self.parts)
        return n == 2

    def bind(self, p: Pattern) -> "TestFunction":
        """Fill unset variogram centring curves with the empirical mean of ``p``."""
        if self.kind == "variogram" and self.mean_curve is None:
            return TestFunction.variogram(empirical_mean_curve(p).values)
        if self.parts:
            return TestFunction(self.kind, self.param, self.mean_curve, tuple(q.bind(p) for q in self.parts))
        return self

    def to_text(self) -> str:
        names = {"one": "one", "sup": "sup", "kl": "kl", "inner": "inner", "variogram": "vario",
                 "aux-product": "aux-prod", "aux-variogram": "aux-vario"}
        if self.kind == "lp":
            return f"lp:{self.param:g}"
        if self.kind == "deriv-l2":
            return f"deriv:{int(self.param)}"
        if self.kind == "sum-of":
            return "+".join(q.to_text() for q in self.parts)
        if self.kind == "max-of":
            return "max(" + ",".join(q.to_text() for q in self.parts) + ")"
        return names[self.kind]


def _riemann_weight(grid: np.ndarray) -> float:
    return (grid[-1] - grid[0]) / len(grid)


def _values(tf: TestFunction, grid, curves, scalars) -> np.ndarray:
    """Vectorized core. ``curves`` is (T, n, m); ``scalars`` (T, n) or None."""
    T, n = curves.shape[:2]
    if not tf.supports_arity(n):
        raise ArityMismatch(f"test function {tf.kind!r} does not accept {n}-tuples")
    kind = tf.kind
    if kind == "one":
        return np.ones(T)
    if kind == "sum-of":
        return sum(_values(q, grid, curves, scalars) for q in tf.parts)
    if kind == "max-of":
        return np.max([_values(q, grid, curves, scalars) for q in tf.parts], axis=0)
    if kind in ("aux-product", "aux-variogram"):
        if scalars is None:
            raise MissingAuxScalar(f"{kind} needs scalar auxiliary marks")
        l1, l2 = scalars[:, 0], scalars[:, 1]
        return l1 * l2 if kind == "aux-product" else 0.5 * (l1 - l2) ** 2
    f1, f2 = curves[:, 0, :], curves[:, 1, :]
    wgt = _riemann_weight(grid)
    if kind == "lp":
        p = tf.param
        return (wgt * np.sum(np.abs(f1 - f2) ** p, axis=1)) ** (1.0 / p)
    if kind == "sup":
        return np.max(np.abs(f1 - f2), axis=1)
    if kind == "kl":
        if np.any(f1 <= 0) or np.any(f2 <= 0):
            raise NonpositiveKlInput("Kullback-Leibler test function needs positive curves")
        return wgt * np.sum((f1 - f2) * np.log(f1 / f2), axis=1)
    if kind == "inner":
        return wgt * np.sum(f1 * f2, axis=1)
    if kind == "deriv-l2":
        k = int(tf.param)
        if len(grid) <= k:
            raise InvalidArgument("grid too short for the requested derivative order")
        d1, d2, g = f1, f2, grid
        for _ in range(k):
            h = np.diff(g)
            d1, d2 = np.diff(d1, axis=1) / h, np.diff(d2, axis=1) / h
            g = g[:-1]
        w = (grid[-1] - grid[0]) / d1.shape[1]
        return np.sqrt(w * np.sum((d1 - d2) ** 2, axis=1))
    if kind == "variogram":
        if tf.mean_curve is None:
            raise InvalidArgument("variogram needs a mean curve; call bind(pattern) first")
        fbar = np.asarray(tf.mean_curve)
        if fbar.shape != grid.shape:
            raise InvalidArgument("variogram mean curve does not match the grid")
        return wgt * np.sum((f1 - fbar) * (f2 - fbar), axis=1)
    raise InvalidArgument(f"unhandled kind {kind}")  # pragma: no cover


def evaluate(tf: TestFunction, marks: Sequence[tuple]) -> float:
    """Evaluate ``tf`` on a tuple of ``(AuxMark, Curve)`` marks."""
    n = len(marks)
    if not tf.supports_arity(n):
        raise ArityMismatch(f"test function {tf.kind!r} does not accept {n}-tuples")
    grid = marks[0][1].grid
    for _, c in marks[1:]:
        if not np.array_equal(c.grid, grid):
            raise InvalidArgument("curves must share one grid")
    curves = np.stack([c.values for _, c in marks])[None]
    scal = [a.scalar for a, _ in marks]
    scalars = None if any(s is None for s in scal) else np.array(scal, dtype=float)[None]
    return float(_values(tf, grid, curves, scalars)[0])


def tuple_values(tf: TestFunction, p: Pattern, idx) -> np.ndarray:
    """Evaluate ``tf`` on index tuples of ``p``; ``idx`` has shape (T, n)."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.ndim != 2:
        raise InvalidArgument("idx must be (T, n)")
    if len(idx) == 0:
        if not tf.supports_arity(idx.shape[1]):
            raise ArityMismatch(f"test function {tf.kind!r} does not accept {idx.shape[1]}-tuples")
        return np.zeros(0)
    scalars = None if p.scalars is None else p.scalars[idx]
    return _values(tf, p.grid, p.curves[idx], scalars)


def empirical_mean_curve(p: Pattern) -> Curve:
    """Pointwise average of the pattern's curves."""
    if len(p) == 0:
        raise EmptyPattern("mean curve of an empty pattern")
    return Curve(p.grid, p.curves.mean(axis=0))


# ---------------------------------------------------------------------------
# text form: one|lp:p|sup|kl|inner|deriv:k|vario|aux-prod|aux-vario, "+" sums, max(...)
# ---------------------------------------------------------------------------

_ATOMS = {
    "one": TestFunction.one,
    "sup": TestFunction.sup,
    "kl": TestFunction.kl,
    "inner": TestFunction.inner,
    "vario": TestFunction.variogram,
    "aux-prod": TestFunction.aux_product,
    "aux-vario": TestFunction.aux_variogram,
}


def _split_top(text: str, sep: str):
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise InvalidArgument(f"unbalanced parentheses in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise InvalidArgument(f"unbalanced parentheses in {text!r}")
    parts.append("".join(cur))
    return [s.strip() for s in parts]


def parse_test_function(text: str) -> TestFunction:
    """Parse the command-line form, e.g. ``"lp:2+aux-prod"`` or ``"max(sup,aux-vario)"``."""
    text = text.strip()
    terms = _split_top(text, "+")
    if len(terms) > 1:
        return TestFunction.sum_of(*(parse_test_function(t) for t in terms))
    if text.startswith("max(") and text.endswith(")"):
        args = _split_top(text[4:-1], ",")
        return TestFunction.max_of(*(parse_test_function(a) for a in args))
    name, _, arg = text.partition(":")
    try:
        if name == "lp":
            return TestFunction.lp(float(arg) if arg else 2.0)
        if name == "deriv":
            return TestFunction.deriv_l2(int(arg) if arg else 1)
    except ValueError:
        raise InvalidArgument(f"bad parameter in test function {text!r}") from None
    if name in _ATOMS and not arg:
        return _ATOMS[name]()
    raise InvalidArgument(f"unknown test function {text!r}")
