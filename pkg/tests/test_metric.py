import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from looseembed.errors import (
    AmbiguousClusteringError,
    AsymmetryError,
    EmptySubsetError,
    IndexOutOfRange,
    IndistinctPointsError,
    NegativeDistanceError,
    NonzeroDiagonalError,
    ParseError,
    TriangleViolation,
)
from looseembed.metric import (
    classify_distances,
    dumps,
    loads,
    parse_point_cloud,
    read_point_cloud,
    restrict,
    space_from_points,
    validate_metric,
)

# integer points under the L1 metric give exact integer metric spaces
int_points = st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)),
                      min_size=2, max_size=7, unique=True)


def l1_space(pts):
    return validate_metric([[abs(a - c) + abs(b - d) for (c, d) in pts] for (a, b) in pts])


def circle4():
    th = [k * math.pi / 2 for k in range(4)]
    D = [[min(abs(a - b) % (2 * math.pi), 2 * math.pi - abs(a - b) % (2 * math.pi)) for b in th] for a in th]
    return validate_metric(D)


def test_two_points_valid():
    s = validate_metric([[0, 1], [1, 0]])
    assert s.n == 2 and s.exact
    assert s.dist[0, 1] == 1


def test_asymmetry():
    with pytest.raises(AsymmetryError):
        validate_metric([[0, 1], [2, 0]])


def test_triangle_violation_reports_triple():
    with pytest.raises(TriangleViolation) as exc:
        validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    assert exc.value.triple == (0, 2, 1)


@pytest.mark.parametrize("matrix, err", [
    ([[1, 1], [1, 0]], NonzeroDiagonalError),
    ([[0, -1], [-1, 0]], NegativeDistanceError),
    ([[0, 0], [0, 0]], IndistinctPointsError),
])
def test_other_axioms(matrix, err):
    with pytest.raises(err):
        validate_metric(matrix)


def test_all_violations_collected():
    with pytest.raises(NonzeroDiagonalError) as exc:
        validate_metric([[1, 1, 5], [2, 0, 1], [5, 1, 0]])
    kinds = {type(e) for e in exc.value.violations}
    assert {NonzeroDiagonalError, AsymmetryError, TriangleViolation} <= kinds


def test_float_triangle_tolerance():
    validate_metric([[0, 1, 2 + 1e-12], [1, 0, 1], [2 + 1e-12, 1, 0]])
    with pytest.raises(TriangleViolation):
        validate_metric([[0, 1, 2 + 1e-6], [1, 0, 1], [2 + 1e-6, 1, 0]])


def test_equilateral_one_class(triangle):
    c = classify_distances(triangle)
    assert c.num_classes == 1 and len(c.classes[0]) == 3


def test_circle4_two_classes():
    c = classify_distances(circle4())
    assert c.num_classes == 2
    assert [len(b) for b in c.classes] == [4, 2]
    assert c.values[0] == pytest.approx(math.pi / 2, abs=1e-12)
    assert c.values[1] == pytest.approx(math.pi, abs=1e-12)


def test_gap_rule():
    s = validate_metric([[0, 1.0, 2.0], [1.0, 0, 1.0 + 1e-12], [2.0, 1.0 + 1e-12, 0]])
    c = classify_distances(s, 1e-9)
    assert c.num_classes == 2


def test_ambiguous_chain():
    # consecutive gaps below tol_class chain into a block wider than tol_class / 2
    d = [1.0, 1.0 + 4e-10, 1.0 + 8e-10]
    s = validate_metric([[0, d[0], d[1]], [d[0], 0, d[2]], [d[1], d[2], 0]])
    with pytest.raises(AmbiguousClusteringError):
        classify_distances(s, 1e-9)


def test_restrict_examples(k4):
    sub = restrict(k4, [0, 1])
    assert sub.n == 2 and sub.dist[0, 1] == 1 and sub.labels == ("p0", "p1")
    assert restrict(k4, range(4)) == k4
    pair = restrict(circle4(), [0, 2])
    assert pair.dist[0, 1] == pytest.approx(math.pi)


def test_restrict_errors(k4):
    with pytest.raises(EmptySubsetError):
        restrict(k4, [])
    with pytest.raises(IndexOutOfRange):
        restrict(k4, [0, 4])


DOC = """# a comment
points 3
labels a b c
0 1 3/2
1 0 1   # trailing comment
3/2 1 0
"""


def test_round_trip_exact():
    s = loads(DOC)
    assert s.exact and s.dist[0, 2] == Fraction(3, 2)
    assert loads(dumps(s)) == s
    assert dumps(loads(dumps(s))) == dumps(s)


def test_round_trip_float():
    s = circle4()
    back = loads(dumps(s))
    assert not back.exact
    assert np.array_equal(back.dist, s.dist)


def test_missing_row():
    with pytest.raises(ParseError) as exc:
        loads("points 3\nlabels a b c\n0 1 1\n1 0 1\n")
    assert exc.value.line == 4


@pytest.mark.parametrize("doc", [
    "",
    "pts 2\nlabels a b\n0 1\n1 0\n",
    "points 2\nlabels a\n0 1\n1 0\n",
    "points 2\nlabels a b\n0 x\n1 0\n",
    "points 2\nlabels a b\n0 1 1\n1 0\n",
])
def test_parse_errors(doc):
    with pytest.raises(ParseError):
        loads(doc)


def test_point_cloud(tmp_path):
    f = tmp_path / "pts.csv"
    f.write_text("name,x,y\na,0,0\nb,3,0\nc,0,4\n")
    s = read_point_cloud(f)
    assert s.labels == ("a", "b", "c")
    assert s.dist[1, 2] == pytest.approx(5.0)
    labels, coords = parse_point_cloud("0,0\n1,1\n")
    assert labels == ("p0", "p1") and coords.shape == (2, 2)


@given(int_points, st.data())
def test_restrict_hereditary(pts, data):
    s = l1_space(pts)
    idx = data.draw(st.lists(st.integers(0, s.n - 1), min_size=1, unique=True))
    sub = restrict(s, idx)
    assert (validate_metric(sub.dist.tolist()).dist == sub.dist).all()


@given(int_points)
def test_exact_classes_are_literal_equality(pts):
    s = l1_space(pts)
    c = classify_distances(s)
    for a, block in enumerate(c.classes):
        for b, other in enumerate(c.classes):
            same = s.dist[block[0]] == s.dist[other[0]]
            assert same == (a == b)
        assert all(s.dist[p] == s.dist[block[0]] for p in block)
    assert sorted(p for b in c.classes for p in b) == [(i, j) for i in range(s.n) for j in range(i + 1, s.n)]


@given(int_points, st.fractions(min_value=Fraction(1, 7), max_value=7))
def test_rescaling_keeps_blocks(pts, lam):
    s = l1_space(pts)
    c1 = classify_distances(s)
    c2 = classify_distances(s.scaled(lam))
    assert c1.classes == c2.classes
    assert all(v2 == lam * v1 for v1, v2 in zip(c1.values, c2.values))


@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=2, max_size=6, unique=True),
       st.floats(0.5, 4.0))
def test_rescaling_floats_with_wide_gaps(pts, lam):
    x = np.array(pts)
    s = space_from_points(x) if len({tuple(p) for p in np.round(x, 3)}) == len(x) else None
    if s is None or s.dist[np.triu_indices(s.n, 1)].min() < 1e-3:
        return
    d = np.sort(s.dist[np.triu_indices(s.n, 1)])
    if np.diff(d).size and 0 < np.diff(d)[np.diff(d) > 0].min(initial=1) < 1e-6:
        return
    assert classify_distances(s, 1e-9).classes == classify_distances(s.scaled(lam), 1e-9).classes


@given(int_points)
def test_round_trip_property(pts):
    s = l1_space(pts)
    assert loads(dumps(s)) == s
