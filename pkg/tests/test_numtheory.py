from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fhcert.numtheory import (
    divisors,
    euler_phi,
    factorize,
    is_prime,
    is_prime_power,
    least_prime_in_progressions,
    multiplicative_order,
    p_part,
    valuation,
)


def trial_prime(n):
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


@given(st.integers(-5, 3000))
def test_is_prime_matches_trial_division(n):
    assert is_prime(n) == trial_prime(n)


@given(st.integers(1, 10**6))
def test_factorize_reconstructs(n):
    f = factorize(n)
    prod = 1
    for p, k in f.items():
        assert trial_prime(p)
        prod *= p**k
    assert prod == n


def test_small_helpers():
    assert factorize(1) == {}
    assert divisors(12) == [1, 2, 3, 4, 6, 12]
    assert euler_phi(15) == 8
    assert p_part(7776, 2) == 32 and p_part(7776, 3) == 243
    assert valuation(48, 2) == 4
    assert is_prime_power(27) and not is_prime_power(12) 
    assert multiplicative_order(2, 7) == 3


def test_least_prime_in_progressions():
    assert least_prime_in_progressions([(1, 1)], 2) == 2
    assert least_prime_in_progressions([(3, 4), (1, 3)], 2) == 7
    assert least_prime_in_progressions([(1, 4)], 30) == 37
    assert least_prime_in_progressions([(1, 4)], 30, exclude={37}) == 41
    with pytest.raises(ValueError):
        least_prime_in_progressions([(2, 4)])


@given(st.integers(0, 30), st.integers(1, 30), st.integers(2, 200))
def test_least_prime_is_least(a, m, lower):
    from math import gcd
    if gcd(a, m) != 1:
        return
    p = least_prime_in_progressions([(a, m)], lower)
    assert p >= lower and p % m == a % m and trial_prime(p)
    assert not any(trial_prime(q) and q % m == a % m for q in range(lower, p))
