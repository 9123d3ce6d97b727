from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhcert.errors import Disconnected, HypothesisFailed, NotCovered
from fhcert.simplicial import (
    Box,
    ComplexPoint,
    SimplicialComplex,
    barycentric_subdivide,
    check_ball_containment,
    check_nerve_contraction,
    cube_coordinates,
    estimate_DN,
    global_l1,
    grid_box_cover,
    l1_distance,
    nerve,
    nerve_map,
    sample_close_pairs,
    segment_l1_length,
    to_subdivision,
)

half = Fraction(1, 2)


def test_l1_examples():
    K = SimplicialComplex([(0, 1), (1, 2)])
    x = ComplexPoint.of({0: half, 1: half})
    y = ComplexPoint.of({1: half, 2: half})
    assert l1_distance(K, x, x) == (0, True)
    assert l1_distance(K, ComplexPoint.vertex(0), ComplexPoint.vertex(1)) == (1, True)
    assert l1_distance(K, x, y) == (1, True)
    assert l1_distance(K, x, y, "raw") == (2, True)


def test_l1_disconnected():
    K = SimplicialComplex([(0,), (1,)])
    with pytest.raises(Disconnected):
        l1_distance(K, ComplexPoint.vertex(0), ComplexPoint.vertex(1))


def random_point(rng, simplex):
    w = [rng.randint(1, 6) for _ in simplex]
    return ComplexPoint.of({v: Fraction(a, sum(w)) for v, a in zip(simplex, w)})


@pytest.mark.parametrize("simplices", [
    [(0, 1), (1, 2), (2, 3), (3, 0), (1, 4)],
    [(0, 1, 2, 3)],
])
def test_l1_is_a_metric_where_exact(simplices):
    K = SimplicialComplex(simplices)
    faces = list(K.simplices)
    rng = random.Random(1)
    for _ in range(150):
        x, y, z = (random_point(rng, rng.choice(faces)) for _ in range(3))
        (dxy, exact), dyx = l1_distance(K, x, y), l1_distance(K, y, x)[0]
        assert exact
        assert dxy == dyx
        assert dxy <= l1_distance(K, x, z)[0] + l1_distance(K, z, y)[0]
        assert (dxy == 0) == (x == y)


def test_l1_upper_bound_mode_is_flagged():
    K = SimplicialComplex([(0, 1, 2), (2, 3), (3, 4, 5), (1, 5)])
    faces = list(K.simplices)
    rng = random.Random(1)
    for _ in range(150):
        x, y = random_point(rng, rng.choice(faces)), random_point(rng, rng.choice(faces))
        d, exact = l1_distance(K, x, y)
        # the path metric dominates the global l1 metric; inexact values are upper bounds
        assert d >= global_l1(x, y)
        if tuple(sorted(set(x.support) | set(y.support))) in K:
            assert exact and d == global_l1(x, y)


def test_subdivision_counts():
    sub, back = barycentric_subdivide(SimplicialComplex([(0, 1)]))
    assert sub.f_vector() == [3, 2]
    sub, _ = barycentric_subdivide(SimplicialComplex([(0, 1, 2)]))
    assert sub.f_vector()[-1] == 6
    assert sub.f_vector() == [7, 12, 6]
    empty, _ = barycentric_subdivide(SimplicialComplex())
    assert len(empty) == 0


@pytest.mark.parametrize("d", [1, 2, 3])
def test_subdivision_top_count_formula(d):
    sub, _ = barycentric_subdivide(SimplicialComplex([tuple(range(d + 1))]))
    from math import factorial
    assert sub.f_vector()[-1] == factorial(d + 1)
    # number of vertices is the number of nonempty faces
    assert sub.f_vector()[0] == 2 ** (d + 1) - 1


@given(st.lists(st.integers(1, 9), min_size=1, max_size=4))
def test_to_subdivision_is_the_same_point(raw):
    x = ComplexPoint.of({i: Fraction(a, sum(raw)) for i, a in enumerate(raw)})
    y = to_subdivision(x)
    # barycenter of face F is the uniform point on F
    back: dict = {}
    for face, w in y.weights:
        for v in face:
            back[v] = back.get(v, 0) + w / len(face)
    assert back == x.as_dict()
    sub, _ = barycentric_subdivide(SimplicialComplex([tuple(range(len(raw)))]))
    assert tuple(sorted(y.support)) in sub


def test_dn_estimates():
    assert estimate_DN(0, 20).estimate == 1
    est = estimate_DN(1, 100, seed=2)
    assert est.consistent and est.estimate >= 1
    assert estimate_DN(2, 50).consistent


def test_nerve_map_examples():
    a, b = Box.of((0, 0), (3, 3)), Box.of((2, 0), (5, 3))
    assert nerve_map([a, b], (half * 5, Fraction(3, 2))).as_dict() == {0: half, 1: half}
    assert nerve_map([a, b], (1, Fraction(3, 2))).as_dict() == {0: 1}
    with pytest.raises(NotCovered):
        nerve_map([a], (7, 7))


def test_nerve_of_grid_cover():
    cover = grid_box_cover(0, 10, 4, 2)
    K = nerve(cover, 5)
    assert K.dimension == 3  # 2 x 2 blocks of boxes meet
    assert check_ball_containment(cover, 1, 0, 10, 30) == (True, None)


@given(st.fractions(0, 10), st.fractions(0, 10))
def test_nerve_map_weights_sum_to_one(x, y):
    cover = grid_box_cover(0, 10, 4, 2)
    pt = nerve_map(cover, (x, y))
    assert sum(pt.as_dict().values()) == 1
    assert tuple(sorted(pt.support)) in nerve(cover, 5)


def test_nerve_contraction_small():
    cover = grid_box_cover(0, 10, 4, 2)
    pairs = sample_close_pairs(0, 10, Fraction(1, 24), 200, seed=5)
    pairs.append(((Fraction(1), Fraction(1)), (Fraction(1), Fraction(1))))
    rep = check_nerve_contraction(cover, 1, 3, pairs, grid=20)
    assert rep.ok and rep.pairs_checked == 201 and rep.pairs_failed == 0


def test_single_set_cover_is_constant():
    cover = [Box.of((-1, -1), (11, 11))]
    pairs = sample_close_pairs(0, 10, Fraction(1, 8), 50)
    rep = check_nerve_contraction(cover, 1, 1, pairs, grid=10)
    assert rep.ok and rep.max_ratio_squared == 0


def test_ball_containment_failure_is_reported():
    cover = grid_box_cover(0, 10, 4, 0)
    with pytest.raises(HypothesisFailed) as info:
        check_nerve_contraction(cover, 1, 3, [], grid=10)
    assert info.value.witness is not None


def test_cube_coordinates_reconstruct_point():
    rng = random.Random(4)
    for _ in range(100):
        x = [Fraction(rng.randint(-20, 20), rng.randint(1, 7)) for _ in range(2)]
        coords = cube_coordinates(x)
        assert sum(coords.values()) == 1 and all(w > 0 for w in coords.values())
        rebuilt = [sum(w * Fraction(k[i], 2) for k, w in coords.items()) for i in range(2)]
        assert rebuilt == x


def test_segment_length_on_the_line():
    # half-integer line: adjacent vertices at distance 1, so length is 2 |x - y|
    for a, b in [(0, 1), (Fraction(1, 3), Fraction(7, 4)), (-2, Fraction(1, 2))]:
        length, _ = segment_l1_length([a], [b])
        assert length == 2 * abs(Fraction(b) - Fraction(a))


@given(st.lists(st.fractions(-4, 4, max_denominator=6), min_size=4, max_size=4))
def test_segment_length_bounds(c):
    x, y = c[:2], c[2:]
    length, single = segment_l1_length(x, y)
    l1 = sum(abs(a - b) for a, b in zip(x, y))
    # each unit of coordinate change crosses at most one edge-length per half unit
    assert length <= 2 * l1
    if single:
        cx, cy = cube_coordinates(x), cube_coordinates(y)
        keys = set(cx) | set(cy)
        assert length == sum(abs(cx.get(k, 0) - cy.get(k, 0)) for k in keys) / 2
