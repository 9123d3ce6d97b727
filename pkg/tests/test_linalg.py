from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhcert.errors import NoSolution, NotInvertibleMod
from fhcert.linalg import (
    FgAbelian,
    IntMatrix,
    RatVector,
    cokernel,
    gl_order,
    kernel_basis,
    matrix_order_mod,
    parse_rational,
    rank,
    smith_normal_form,
    solve_rational,
)

from .oracles import count_gl, order_by_multiplication


def diag(D):
    return [D[i, i] for i in range(min(D.rows, D.cols))]


def is_diagonal(D):
    return all(D[i, j] == 0 for i in range(D.rows) for j in range(D.cols) if i != j)


def check_snf(M):
    U, D, V = smith_normal_form(M)
    assert U @ IntMatrix(M) @ V == D
    assert abs(U.det()) == 1 and abs(V.det()) == 1
    assert is_diagonal(D)
    d = [abs(x) for x in diag(D)]
    assert all(x >= 0 for x in diag(D))
    for a, b in zip(d, d[1:]):
        assert (a == 0 and b == 0) or (a != 0 and b % a == 0)
    return D


def test_snf_zero_matrix():
    U, D, V = smith_normal_form([[0, 0], [0, 0]])
    assert D == IntMatrix.zeros(2, 2)
    assert U == IntMatrix.identity(2) and V == IntMatrix.identity(2)


def test_snf_identity():
    assert check_snf(IntMatrix.identity(3).tolist()) == IntMatrix.identity(3)


def test_snf_2x2_example():
    D = check_snf([[2, 4], [6, 8]])
    assert diag(D) == [2, 4]
    # d1 = gcd of entries, d1 d2 = |det|
    assert 2 * 4 == abs(2 * 8 - 4 * 6)


def test_snf_large_entries_do_not_overflow():
    big = 10**30
    D = check_snf([[big, 0], [0, big * 3]])
    assert diag(D) == [big, 3 * big]


@given(st.integers(1, 5).flatmap(lambda m: st.integers(1, 5).flatmap(
    lambda n: st.lists(st.lists(st.integers(-100, 100), min_size=n, max_size=n), min_size=m, max_size=m))))
def test_snf_property(M):
    D = check_snf(M)
    assert rank(M) == sum(1 for x in diag(D) if x)


def test_matrix_order_examples():
    assert matrix_order_mod(IntMatrix.identity(2), 7) == 1
    assert matrix_order_mod([[0, -1], [1, 0]], 5) == 4
    assert matrix_order_mod([[1, 1], [0, 1]], 3) == 3


def test_matrix_order_not_invertible():
    with pytest.raises(NotInvertibleMod):
        matrix_order_mod([[2, 0], [0, 1]], 4)


@given(st.lists(st.integers(-9, 9), min_size=4, max_size=4), st.sampled_from([2, 3, 5, 6, 7, 10, 12]))
def test_matrix_order_matches_multiplication_and_divides_gl(entries, s):
    M = [entries[:2], entries[2:]]
    det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
    from math import gcd
    if gcd(det, s) != 1:
        return
    k = matrix_order_mod(M, s)
    assert k == order_by_multiplication(M, s)
    assert gl_order(2, s) % k == 0


def test_gl_order_examples():
    assert gl_order(1, 5) == 4
    assert gl_order(2, 3) == 48
    assert gl_order(2, 15) == 48 * 480


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("s", [2, 3, 4, 5, 6, 7])
def test_gl_order_matches_brute_force(n, s):
    assert gl_order(n, s) == count_gl(n, s)


def test_solve_rational_examples():
    assert solve_rational(IntMatrix.identity(2), [3, Fraction(-1, 2)]) == RatVector([3, Fraction(-1, 2)])
    assert solve_rational([[2]], [1]) == RatVector([Fraction(1, 2)])
    assert solve_rational([[2, 0], [0, 2]], [1, 1]) == RatVector([Fraction(1, 2), Fraction(1, 2)])


def test_solve_rational_free_coordinates_zero():
    assert solve_rational([[1, 1]], [3]) == RatVector([3, 0])


def test_solve_rational_inconsistent():
    with pytest.raises(NoSolution):
        solve_rational([[1], [1]], [0, 1])


def test_fg_abelian_invariants():
    A = FgAbelian((2, 4), 1)
    assert A.order() is None and str(A) == "Z/2 + Z/4 + Z"
    assert FgAbelian((2, 6)).order() == 12
    with pytest.raises(ValueError):
        FgAbelian((2, 3))
    with pytest.raises(ValueError):
        FgAbelian((1,))


def test_cokernel_and_kernel():
    assert cokernel([[2, 0], [0, 3]]) == FgAbelian((6,), 0)
    assert cokernel([[2], [0]]) == FgAbelian((2,), 1)
    K = kernel_basis([[1, 1, 0]])
    assert K.cols == 2
    assert all(x == 0 for x in IntMatrix([[1, 1, 0]]) @ K.column(0))


def test_parse_rational_exact():
    assert parse_rational("3/6") == Fraction(1, 2)
    assert parse_rational("0.125") == Fraction(1, 8)
    assert parse_rational(7) == Fraction(7)


def test_rat_vector_reduced():
    v = RatVector(["2/4", "-3/9"])
    assert v.entries == (Fraction(1, 2), Fraction(-1, 3))
    assert RatVector.from_json(v.to_json()) == v


def test_int_matrix_json_uses_strings():
    M = IntMatrix([[10**25, -1]])
    assert M.to_json() == [[str(10**25), "-1"]]
    assert IntMatrix.from_json(M.to_json()) == M
