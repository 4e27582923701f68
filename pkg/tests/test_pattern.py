import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pattern
from fmpp.datasets import load_provinces
from fmpp.errors import (
    CoincidentPoints,
    DuplicateId,
    FileNotFound,
    GridMismatch,
    MalformedInput,
    MissingCurve,
    OrphanCurve,
    PointOutsideWindow,
)
from fmpp.geometry import rect
from fmpp.pattern import (
    AuxMark,
    AuxSchema,
    Curve,
    FmPoint,
    IntegralThreshold,
    LabelIn,
    MarkSet,
    Pattern,
    ScalarIn,
    SupThreshold,
    load_pattern,
    mark_in,
    mark_set,
    pairwise_distances,
    restrict,
    save_pattern,
)

POINTS = "id,x,y\na,0.1,0.1\nb,0.5,0.5\nc,0.9,0.2\n"
CURVES = "id,t,value\n" + "".join(f"{i},{t},{v}\n" for i in "abc" for t, v in zip((0, 1, 2), (1.0, 2.0, 0.5)))


def load(points=POINTS, curves=CURVES, window=None, schema=None):
    return load_pattern(io.StringIO(points), io.StringIO(curves), window or rect(0, 1, 0, 1), schema)


def test_load_well_formed():
    p = load()
    assert len(p) == 3
    assert np.array_equal(p.grid, [0, 1, 2])
    assert p.ids == ("a", "b", "c")


def test_load_comments_and_shuffled_rows():
    lines = CURVES.splitlines()
    curves = "# a comment\n" + lines[0] + "\n" + "\n".join(reversed(lines[1:])) + "\n"
    assert load(curves=curves).equals(load())


def test_load_aux_columns():
    pts = "id,x,y,label,scalar\na,0.1,0.1,1,0.5\nb,0.5,0.5,2,1.5\nc,0.9,0.2,2,-1\n"
    p = load(points=pts, schema=AuxSchema(n_labels=3, scalar=True))
    assert list(p.labels) == [1, 2, 2] and p.n_labels == 3
    assert list(p.scalars) == [0.5, 1.5, -1.0]
    assert p[1].aux == AuxMark(2, 1.5)


@pytest.mark.parametrize(
    "points,curves,err",
    [
        (POINTS + "p7,0.3,0.3\n", CURVES, MissingCurve),
        (POINTS, CURVES + "zz,0,1\n", OrphanCurve),
        (POINTS, CURVES.replace("c,2,0.5", "c,3,0.5"), GridMismatch),
        (POINTS + "a,0.2,0.2\n", CURVES, DuplicateId),
        (POINTS.replace("0.9,0.2", "1.9,0.2"), CURVES, PointOutsideWindow),
        (POINTS.replace("0.9,0.2", "0.5,0.5"), CURVES, CoincidentPoints),
        (POINTS.replace("0.9", "abc"), CURVES, MalformedInput),
        ("id,x\na,1\n", CURVES, MalformedInput),
    ],
)
def test_load_errors(points, curves, err):
    with pytest.raises(err):
        load(points, curves)


def test_missing_files(tmp_path):
    pts = tmp_path / "p.csv"
    pts.write_text(POINTS)
    with pytest.raises(MissingCurve):
        load_pattern(pts, tmp_path / "nope.csv", rect(0, 1, 0, 1))
    with pytest.raises(FileNotFound):
        load_pattern(tmp_path / "nope.csv", pts, rect(0, 1, 0, 1))


def test_schema_declares_missing_labels():
    with pytest.raises(MalformedInput):
        load(schema=AuxSchema(n_labels=2))


def test_label_out_of_declared_range():
    with pytest.raises(MalformedInput):
        Pattern(rect(0, 1, 0, 1), [[0.5, 0.5]], [0, 1], [[0, 0]], labels=[3], n_labels=2)


def test_round_trip_bit_exact(tmp_path, rng):
    p = random_pattern(rng, 25, labels=3, scalars=True)
    save_pattern(p, tmp_path / "p.csv", tmp_path / "c.csv")
    q = load_pattern(tmp_path / "p.csv", tmp_path / "c.csv", p.window, AuxSchema(3, True))
    assert q.equals(p)


def test_pattern_is_immutable(rng):
    p = random_pattern(rng, 5)
    with pytest.raises(ValueError):
        p.xy[0, 0] = 0.0


def test_curve_validation():
    with pytest.raises(GridMismatch):
        Curve([0.0], [1.0])
    with pytest.raises(GridMismatch):
        Curve([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(MalformedInput):
        Curve([0.0, 1.0], [1.0, np.nan])


# -- mark sets ------------------------------------------------------------------


def point(values, label=None, scalar=None):
    g = np.arange(len(values), dtype=float)
    return FmPoint("x", (0.0, 0.0), AuxMark(label, scalar), Curve(g, np.asarray(values, dtype=float)))


def test_mark_in_examples():
    assert mark_in(mark_set(func=SupThreshold(2.0)), point([1, 3, 1]))
    assert not mark_in(mark_set(func=SupThreshold(2.0, above=False)), point([1, 3, 1]))
    assert not mark_in(mark_set(aux=LabelIn([1])), point([0, 0], label=2))
    assert mark_in(MarkSet.all(), point([5, -5]))
    assert mark_in(mark_set(aux=ScalarIn(0, 1)), point([0, 0], scalar=0.5))
    # trapezoid of (0, 1, 0) on unit spacing is 1
    assert not mark_in(mark_set(func=IntegralThreshold(1.0)), point([0, 1, 0]))
    assert mark_in(mark_set(func=IntegralThreshold(0.99)), point([0, 1, 0]))


def test_sup_uses_absolute_value():
    assert mark_in(mark_set(func=SupThreshold(2.0)), point([0, -3, 0]))


def test_restrict_examples(rng):
    p = random_pattern(rng, 20, labels=2)
    assert restrict(p, MarkSet.all()).equals(p)
    assert len(restrict(p, mark_set(aux=LabelIn([])))) == 0


def test_restrict_bundled_split():
    p = load_provinces("demography")
    sup = np.abs(p.curves).max(axis=1)
    c = float(np.sort(sup)[19] + np.sort(sup)[20]) / 2
    lo = restrict(p, mark_set(func=SupThreshold(c, above=False)))
    hi = restrict(p, mark_set(func=SupThreshold(c, above=True)))
    assert (len(lo), len(hi)) == (20, 27)
    assert len(lo) + len(hi) == 47
    assert set(lo.ids).isdisjoint(hi.ids)


MARKSETS = st.sampled_from(
    [
        MarkSet.all(),
        mark_set(aux=LabelIn([1])),
        mark_set(aux=LabelIn([2, 3])),
        mark_set(aux=ScalarIn(0.2, 0.7)),
        mark_set(func=SupThreshold(1.5)),
        mark_set(func=IntegralThreshold(0.0, above=False)),
        mark_set(aux=LabelIn([1, 2]), func=SupThreshold(1.0, above=False)),
    ]
)


@given(MARKSETS, MARKSETS, st.integers(0, 2**32 - 1))
def test_restrict_composition(a, b, seed):
    p = random_pattern(np.random.default_rng(seed), 30, labels=3, scalars=True)
    assert restrict(restrict(p, a), b).equals(restrict(p, a & b))


@given(MARKSETS, st.integers(0, 2**32 - 1))
def test_mark_in_order_invariant(ms, seed):
    rng = np.random.default_rng(seed)
    p = random_pattern(rng, 15, labels=3, scalars=True)
    perm = rng.permutation(len(p))
    q = p.subset(perm)
    assert np.array_equal(ms.mask(p)[perm], ms.mask(q))
    assert [mark_in(ms, pt) for pt in q] == list(ms.mask(q))


# -- distances -------------------------------------------------------------------


def simple(xy):
    n = len(xy)
    return Pattern(rect(-10, 10, -10, 10), xy, [0, 1], np.zeros((n, 2)))


def test_pairwise_examples():
    _, _, disp, dist = pairwise_distances(simple([[0, 0], [3, 4]]))
    assert list(dist) == [5.0, 5.0]
    assert disp[0].tolist() == [3.0, 4.0]
    assert len(pairwise_distances(simple([[0, 0]]))[3]) == 0
    d = pairwise_distances(simple([[0, 0], [1, 0], [2, 0]]))[3]
    assert sorted(set(d.tolist())) == [1.0, 2.0]


def test_distances_cached(rng):
    p = random_pattern(rng, 10)
    assert p.distances is p.distances


def test_translate_preserves_structure(rng):
    p = random_pattern(rng, 10)
    q = p.translate(3.0, -2.0)
    assert np.allclose(q.distances[1], p.distances[1])
