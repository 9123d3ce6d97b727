"""Small number-theory helpers (primality and factoring are delegated to sympy)."""

from __future__ import annotations

from math import gcd, lcm

import sympy


def is_prime(n: int) -> bool:
    return bool(sympy.isprime(n))


def factorize(n: int) -> dict[int, int]:
    """Prime factorization ``{p: k}`` of ``n >= 1``."""
    if n < 1:
        raise ValueError("factorize expects a positive integer")
    return {int(p): int(k) for p, k in sorted(sympy.factorint(n).items())}


def prime_divisors(n: int) -> list[int]:
    return sorted(factorize(n))


def divisors(n: int) -> list[int]:
    return [int(d) for d in sympy.divisors(n)]


def euler_phi(n: int) -> int:
    return int(sympy.totient(n))


def p_part(n: int, p: int) -> int:
    """Largest power of ``p`` dividing ``n``."""
    out = 1
    while n % p == 0:
        n //= p
        out *= p
    return out


def valuation(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def is_prime_power(n: int) -> bool:
    return n > 1 and len(factorize(n)) == 1


def least_prime_in_progressions(
    conditions: list[tuple[int, int]], lower: int = 2, exclude: set[int] | None = None
) -> int:
    """Least prime ``p >= lower`` with ``p % m == a`` for every ``(a, m)``.

    The congruences are combined first; Dirichlet guarantees termination when
    the combined residue is a unit.
    """
    a, m = 0, 1
    for ai, mi in conditions:
        a, m = _crt_pair(a, m, ai % mi, mi)
    if gcd(a, m) != 1:
        raise ValueError(f"residue {a} mod {m} is not a unit")
    p = max(lower, 2)
    p += (a - p) % m
    exclude = exclude or set()
    while not (is_prime(p) and p not in exclude):
        p += m
    return p


def _crt_pair(a1: int, m1: int, a2: int, m2: int) -> tuple[int, int]:
    g = gcd(m1, m2)
    if (a2 - a1) % g:
        raise ValueError("incompatible congruences")
    m = lcm(m1, m2)
    if m1 == 1:
        return a2 % m, m
    k = ((a2 - a1) // g) * pow(m1 // g, -1, m2 // g) % (m2 // g)
    return (a1 + k * m1) % m, m


def multiplicative_order(a: int, m: int) -> int:
    if m == 1:
        return 1
    return int(sympy.n_order(a, m))
