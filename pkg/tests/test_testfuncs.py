import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import random_pattern
from fmpp.datasets import load_provinces
from fmpp.errors import ArityMismatch, EmptyPattern, InvalidArgument, MissingAuxScalar, NonpositiveKlInput
from fmpp.pattern import AuxMark, Curve
from fmpp.testfuncs import TestFunction as TF
from fmpp.testfuncs import empirical_mean_curve, evaluate, parse_test_function, tuple_values

YEARS = np.arange(1998.0, 2018.0)


def marks(*curves, grid=None, scalars=None):
    curves = [np.asarray(c, dtype=float) for c in curves]
    grid = np.arange(len(curves[0]), dtype=float) if grid is None else grid
    scalars = scalars or [None] * len(curves)
    return [(AuxMark(None, s), Curve(grid, c)) for c, s in zip(curves, scalars)]


def test_examples():
    f = np.array([1.0, 2.0, 5.0])
    assert evaluate(TF.lp(2), marks(f, f)) == 0.0
    assert evaluate(TF.sup(), marks([3, 3], [1, 1])) == 2.0
    assert evaluate(TF.aux_variogram(), marks([0, 0], [0, 0], scalars=[4.0, 2.0])) == 2.0
    assert evaluate(TF.aux_product(), marks([0, 0], [0, 0], scalars=[4.0, 2.0])) == 8.0


def test_variogram_hand_riemann_value():
    fbar = np.sin(YEARS)
    tf = TF.variogram(fbar)
    assert evaluate(tf, marks(fbar + 1, fbar + 1, grid=YEARS)) == pytest.approx(19.0, abs=1e-12)
    f1, f2 = fbar + np.linspace(0, 1, 20), fbar - 0.5
    hand = (2017 - 1998) / 20 * sum((a - b) * (c - b) for a, b, c in zip(f1, fbar, f2))
    assert evaluate(tf, marks(f1, f2, grid=YEARS)) == pytest.approx(hand, rel=1e-14)


def test_riemann_weights():
    g = np.array([0.0, 1.0, 2.0, 3.0])
    f1, f2 = np.array([1.0, 2.0, 3.0, 4.0]), np.array([1.0, 1.0, 1.0, 1.0])
    w = 3.0 / 4
    assert evaluate(TF.lp(1), marks(f1, f2, grid=g)) == pytest.approx(w * 6)
    assert evaluate(TF.lp(2), marks(f1, f2, grid=g)) == pytest.approx(np.sqrt(w * 14))
    assert evaluate(TF.inner(), marks(f1, f2, grid=g)) == pytest.approx(w * 10)
    kl = w * np.sum((f1 - f2) * np.log(f1 / f2))
    assert evaluate(TF.kl(), marks(f1, f2, grid=g)) == pytest.approx(kl)
    # first differences of f1 are 1, of f2 are 0: three samples, weight 3/3
    assert evaluate(TF.deriv_l2(1), marks(f1, f2, grid=g)) == pytest.approx(np.sqrt(3.0))
    assert evaluate(TF.deriv_l2(2), marks(f1, f2, grid=g)) == pytest.approx(0.0)


def test_errors():
    with pytest.raises(NonpositiveKlInput):
        evaluate(TF.kl(), marks([1, 0], [1, 1]))
    with pytest.raises(ArityMismatch):
        evaluate(TF.lp(2), marks([1, 1], [1, 1], [1, 1]))
    with pytest.raises(MissingAuxScalar):
        evaluate(TF.aux_product(), marks([1, 1], [1, 1]))
    with pytest.raises(InvalidArgument):
        TF.lp(0.5)
    with pytest.raises(InvalidArgument):
        evaluate(TF.variogram(), marks([1, 1], [1, 1]))


def test_one_any_arity():
    assert evaluate(TF.one(), marks([1, 1], [2, 2], [3, 3])) == 1.0
    assert TF.max_of(TF.one(), TF.one()).supports_arity(3)
    assert not (TF.one() + TF.sup()).supports_arity(3)


def test_combinators():
    m = marks([3, 3], [1, 1], scalars=[1.0, 4.0])
    assert evaluate(TF.sup() + TF.aux_variogram(), m) == pytest.approx(2.0 + 4.5)
    assert evaluate(TF.max_of(TF.sup(), TF.aux_variogram()), m) == pytest.approx(4.5)


curve_pairs = hnp.arrays(np.float64, (3, 12), elements=st.floats(-50, 50))


@given(curve_pairs)
def test_symmetry_and_nonnegativity(c):
    for tf in (TF.lp(1), TF.lp(2), TF.lp(3.5), TF.sup(), TF.inner(), TF.deriv_l2(1), TF.variogram(np.zeros(12))):
        a, b = evaluate(tf, marks(c[0], c[1])), evaluate(tf, marks(c[1], c[0]))
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
        if tf.kind in ("lp", "sup", "deriv-l2"):
            assert a >= 0


@given(curve_pairs)
def test_triangle_inequality(c):
    for tf in (TF.lp(1), TF.lp(2), TF.sup()):
        d = lambda i, j: evaluate(tf, marks(c[i], c[j]))  # noqa: E731
        assert d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9


@given(hnp.arrays(np.float64, 12, elements=st.floats(0.01, 50)), hnp.arrays(np.float64, 12, elements=st.floats(0.01, 50)))
def test_kl_properties(f, g):
    assert evaluate(TF.kl(), marks(f, f)) == 0.0
    assert evaluate(TF.kl(), marks(f, g)) >= 0


@given(hnp.arrays(np.float64, 12, elements=st.floats(-50, 50)))
def test_inner_equals_squared_norm(f):
    zero = np.zeros_like(f)
    assert evaluate(TF.inner(), marks(f, f)) == pytest.approx(evaluate(TF.lp(2), marks(f, zero)) ** 2, rel=1e-9, abs=1e-9)


def test_discretization_consistency():
    def lp_at(m):
        g = np.linspace(0, 1, m, endpoint=False)
        return evaluate(TF.lp(2), marks(np.sin(2 * np.pi * g), np.cos(2 * np.pi * g), grid=g))

    # closed form on [0, 1): ||sin - cos||_2 = 1, and the (b - a)/m weight loses 1/m
    for m in (20, 40, 80):
        assert abs(lp_at(m) - 1.0) < 2.0 / m


def test_tuple_values_matches_scalar_eval(rng):
    p = random_pattern(rng, 10, scalars=True)
    idx = np.array([[0, 1], [3, 2], [9, 4]])
    for tf in (TF.lp(2), TF.sup(), TF.aux_product(), TF.variogram().bind(p)):
        vec = tuple_values(tf, p, idx)
        ref = [evaluate(tf, [(p[i].aux, p[i].curve), (p[j].aux, p[j].curve)]) for i, j in idx]
        assert np.allclose(vec, ref, rtol=1e-13)


def test_empirical_mean_curve():
    from fmpp import Pattern, rect

    p = Pattern(rect(0, 1, 0, 1), [[0.1, 0.1], [0.2, 0.2]], [0, 1], [[0, 2], [2, 0]])
    assert empirical_mean_curve(p).values.tolist() == [1.0, 1.0]
    assert empirical_mean_curve(p.subset([0])).values.tolist() == [0.0, 2.0]
    with pytest.raises(EmptyPattern):
        empirical_mean_curve(p.subset([]))
    q = load_provinces()
    naive = [sum(q.curves[i, j] for i in range(len(q))) / len(q) for j in range(len(q.grid))]
    assert np.allclose(empirical_mean_curve(q).values, naive, rtol=0, atol=1e-12)


@pytest.mark.parametrize(
    "text", ["one", "lp:2", "lp:1.5", "sup", "kl", "inner", "deriv:2", "vario", "aux-prod", "aux-vario",
             "lp:2+aux-prod", "max(sup,aux-vario)", "max(lp:1,deriv:1)+one"],
)
def test_parse_round_trip(text):
    tf = parse_test_function(text)
    assert parse_test_function(tf.to_text()) == tf


@pytest.mark.parametrize("text", ["lp:x", "nope", "max(sup", "vario:3"])
def test_parse_errors(text):
    with pytest.raises(InvalidArgument):
        parse_test_function(text)
