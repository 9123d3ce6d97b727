from __future__ import annotations

from math import gcd

import pytest
from hypothesis import given, strategies as st

from fhcert.errors import HypothesisFailed, NotSplit, PreconditionFailed
from fhcert.groups import GroupElement
from fhcert.lemmas import (
    check_cyclic_good,
    check_hyper_good,
    check_rs_kills_v,
    choose_r,
    cyclic_table,
    exhaustive_prime_powers,
    find_prime_power,
    lemma_prime_power,
    section7_index_check,
    sweep_prime_power,
    sweep_rs_kills_v,
)

from . import oracles


def _primes_dividing(k):
    return [p for p in range(2, k + 1) if k % p == 0 and all(p % d for d in range(2, p))]


# rs-kills-v


def test_rs_zero_vector_holds():
    rep = check_rs_kills_v([[0, -1], [1, 0]], 3, 12, (0, 0), 1, 1, 4)
    assert rep.verdict == "holds"


def test_rs_rotation_instance_holds():
    rep = check_rs_kills_v([[0, -1], [1, 0]], 3, 12, (1, 0), 1, 3, 4)
    assert rep.verdict == "holds"
    assert rep.witness["power"] == {"v": [0, 0], "top": 0}


def test_rs_instance_matches_naive_power():
    G = oracles.CyclicSemidirect([[0, -1], [1, 0]], 3, 12)
    assert G.power(((1, 0), 1), 12) == ((0, 0), 0)


def test_rs_hypothesis_failure_is_not_a_counterexample():
    rep = check_rs_kills_v([[0, -1], [1, 0]], 3, 12, (1, 0), 1, 3, 2)
    assert rep.verdict == "hypothesis_failed"
    rep = check_rs_kills_v([[0, -1], [1, 0]], 3, 6, (1, 0), 1, 3, 4)
    assert rep.verdict == "hypothesis_failed"
    assert not rep.counterexamples


def test_rs_sweep_gl1_mod5():
    rep = sweep_rs_kills_v(1, 5)
    assert rep.verdict == "holds"
    assert rep.counts["matrices"] == 4
    assert rep.counts["instances"] == 4 * 5 * 4
    assert rep.counts["holds"] == rep.counts["instances"]


@given(st.integers(0, 2), st.integers(0, 2), st.integers(0, 11),
       st.sampled_from([((0, -1), (1, 0)), ((1, 1), (0, 1)), ((2, 0), (0, 1))]))
def test_rs_property_matches_oracle(a, b, j, M):
    s, r = 3, 12
    G = oracles.CyclicSemidirect(M, s, r)
    s_prime = 1 if (a, b) == (0, 0) else 3
    r_prime = oracles.order_by_multiplication(oracles.mat_power(M, j, s), s)
    rep = check_rs_kills_v(M, s, r, (a, b), j, s_prime, r_prime)
    assert rep.verdict == "holds"
    k = s_prime * r_prime
    assert G.power(((a, b), j), k) == ((0, 0), (j * k) % r)


# prime-power


def _oracle_prime_power(s_prime, r_prime, pr_order):
    """Lexicographically least ``(p, N)`` by scanning a box of exponents."""
    for p in _primes_dividing(s_prime):
        for N in range(1, 20):
            if (s_prime * r_prime) % p**N == 0 and pr_order % p**N:
                return p, N
    return None


def test_prime_power_abelian_examples():
    rep = find_prime_power([[1]], 6, 1, GroupElement((3,), 0))
    assert rep.verdict == "holds"
    assert (rep.witness["p"], rep.witness["N"]) == (2, 1)
    rep = find_prime_power([[1]], 6, 1, GroupElement((1,), 0))
    assert (rep.witness["p"], rep.witness["N"]) == (2, 1)
    assert all(rep.witness["conditions"].values())
    assert [2, 1] in rep.witness["exhaustive"]


def test_prime_power_trivial_cap_is_precondition():
    with pytest.raises(PreconditionFailed):
        find_prime_power([[1]], 6, 1, GroupElement((0,), 1))


def test_prime_power_bad_r_prime():
    with pytest.raises(HypothesisFailed):
        find_prime_power([[-1]], 6, 1, GroupElement((1,), 0))


@pytest.mark.parametrize("M,s,r_prime", [([[1]], 6, 1), ([[-1]], 6, 2), ([[2]], 15, 4)])
def test_prime_power_against_brute_force(M, s, r_prime):
    r = s * r_prime
    G = oracles.CyclicSemidirect(M, s, r)
    for g in G.elements():
        C = oracles.generated(G, [g])
        cap = [x for x in C if x[1] == 0]
        pr = {x[1] for x in C}
        if len(cap) == 1:
            continue
        expected = _oracle_prime_power(len(cap), r_prime, len(pr))
        rep = find_prime_power(M, s, r_prime, GroupElement(*g))
        assert rep.verdict == "holds"
        assert (rep.witness["p"], rep.witness["N"]) == expected
        p, N = expected
        assert r % p**N == 0 and len(pr) % p**N and len(cap) % p == 0


def test_prime_power_sweep_counts_match_oracle():
    M, s = [[-1]], 6
    rep = sweep_prime_power(M, s)
    G = oracles.CyclicSemidirect(M, s, 12)
    cyc = [C for C in oracles.cyclic_subgroups(G) if sum(1 for x in C if x[1] == 0) > 1]
    assert rep.verdict == "holds"
    assert rep.counts["cyclic_subgroups"] == len(cyc)


@given(st.integers(2, 60), st.integers(1, 30), st.integers(1, 60))
def test_lemma_search_matches_exhaustive_scan(s_prime, r_prime, pr_order):
    found = lemma_prime_power(s_prime, r_prime, pr_order)
    assert found == _oracle_prime_power(s_prime, r_prime, pr_order)
    if found is not None and (s_prime * r_prime) % pr_order == 0:
        r = s_prime * r_prime
        assert found in exhaustive_prime_powers(r, pr_order, s_prime)


# cyclic-good


def _oracle_cyclic_good(M, p1, p2, r):
    G = oracles.CyclicSemidirect(M, p1 * p2, r)
    a = b = fail = 0
    for C in oracles.cyclic_subgroups(G):
        cap = sum(1 for x in C if x[1] == 0)
        index = r // len({x[1] for x in C})
        if cap == 1:
            a += 1
        elif any(len(C) % p == 0 and index % p == 0 for p in (p1, p2)):
            b += 1
        else:
            fail += 1
    return a, b, fail


def test_cyclic_good_rank_one_full_mode():
    rep = check_cyclic_good([[1]], 2, 3, 3, 5, "full")
    assert rep.verdict == "holds"
    assert rep.params["r"] == 120
    a, b, fail = _oracle_cyclic_good([[1]], 3, 5, 120)
    assert rep.counts == {"cyclic_subgroups": 140, "condition_a": a, "condition_b": b, "failures": fail}
    assert a + b == 140 and fail == 0


def test_cyclic_good_reduced_mode_matches_oracle():
    M = [[-1, 0], [0, -1]]
    rep = check_cyclic_good(M, 2, 3, 3, 5, "reduced")
    assert rep.verdict == "holds"
    r = rep.params["r"]
    assert r == 15 * 2
    a, b, fail = _oracle_cyclic_good(M, 3, 5, r)
    assert (rep.counts["condition_a"], rep.counts["condition_b"], rep.counts["failures"]) == (a, b, fail)


def test_cyclic_good_top_generator_is_condition_a():
    rep = check_cyclic_good([[1]], 2, 3, 3, 5, "full")
    rows = [x for x in rep.witness["subgroups"] if x["generator"] == {"v": [0], "top": 1}]
    assert rows and rows[0]["condition"] == "a"


def test_cyclic_good_bad_primes():
    rep = check_cyclic_good([[1]], 4, 3, 3, 5, "full")
    assert rep.verdict == "hypothesis_failed"
    assert rep.witness["reasons"]


# hyper-good


def _oracle_hyper_good(M, s, r, o, nu):
    G = oracles.CyclicSemidirect(M, s, r)
    counts = {"a": 0, "b": 0, None: 0}
    for H in oracles.rank_one_subgroups(G):
        if not oracles.is_hyperelementary(G, H):
            continue
        cap = [x[0] for x in H if x[1] == 0]
        ks = [k for k in range(1, s + 1) if s % k == 0 and k % o == 1 % o and k >= nu
              and all(v % k == 0 for x in cap for v in x)]
        if ks:
            counts["a"] += 1
        elif r // len({x[1] for x in H}) >= nu:
            counts["b"] += 1
        else:
            counts[None] += 1
    return counts


def test_hyper_good_dihedral_against_oracle():
    rep = check_hyper_good([[-1]], 2, 3, 15, 30)
    expected = _oracle_hyper_good([[-1]], 15, 30, 2, 3)
    assert rep.verdict == "holds"
    assert rep.counts.get("case_a", 0) == expected["a"]
    assert rep.counts.get("case_b", 0) == expected["b"]
    assert expected[None] == 0
    assert rep.counts["hyperelementary"] == sum(expected.values())


def test_hyper_good_small_r_fails_like_oracle():
    rep = check_hyper_good([[-1]], 2, 3, 15, 4)
    expected = _oracle_hyper_good([[-1]], 15, 4, 2, 3)
    assert rep.verdict == "counterexample"
    assert len(rep.counterexamples) == expected[None] == 2
    assert "p1" not in rep.params


def test_hyper_good_trivial_and_routes_agree():
    rep = check_hyper_good([[-1]], 2, 3, 15, 30)
    trivial = [x for x in rep.witness["subgroups"] if x["order"] == 1]
    assert trivial[0]["case"] == "a" and trivial[0]["k"] == 15
    assert trivial[0]["proof"]["route"] == "cap-trivial"
    for row in rep.witness["subgroups"]:
        assert row["proof"]["ok"]


def test_hyper_good_l3_subgroup_uses_other_prime():
    rep = check_hyper_good([[-1]], 2, 3, 15, 30)
    rows = [x for x in rep.witness["subgroups"] if x["cap_order"] == 3 and x["pr_order"] == 1]
    assert rows
    assert rows[0]["proof"] == {"route": "cap-l-group", "k": 5, "ok": True}


def test_hyper_good_large_nu_is_counterexample():
    rep = check_hyper_good([[1]], 2, 50, 15, 2)
    assert rep.verdict == "counterexample"
    assert rep.counterexamples


def test_hyper_good_hypothesis_failure():
    assert check_hyper_good([[1]], 4, 2, 15, 2).verdict == "hypothesis_failed"
    assert check_hyper_good([[-1]], 2, 2, 15, 3).verdict == "hypothesis_failed"


# index dichotomy


def test_choose_r_examples():
    assert choose_r(6, 3, 5, 2, 3) == 5
    assert choose_r(6, 6, 1, 2, 3) == 4


@given(st.integers(1, 12), st.integers(1, 6))
def test_choose_r_is_least(i, kernel):
    r = choose_r(6, kernel, i, 2, 3)

    def ok(t):
        return t >= 1 and 2 ** (t - 1) >= i * kernel and 3 ** (t - 1) >= i * kernel

    assert ok(r) and not ok(r - 1)


def test_section7_prime_power_quotient_is_vacuous():
    rep = section7_index_check(cyclic_table(4), [1, -1, 1, -1], 3)
    assert rep.verdict == "vacuous" and rep.holds


def test_section7_bad_sign_map():
    with pytest.raises(NotSplit):
        section7_index_check(cyclic_table(3), [1, -1, 1], 2)
    with pytest.raises(NotSplit):
        section7_index_check(cyclic_table(2), [1, 2], 2)


def test_section7_trivial_sign_small_index():
    rep = section7_index_check(cyclic_table(6), [1] * 6, 1)
    assert rep.verdict == "holds"
    assert rep.params["Delta"] == "Z"
    assert rep.counts["failures"] == 0


def test_section7_onto_sign_small_i():
    w = [1, -1, 1, -1, 1, -1]
    rep = section7_index_check(cyclic_table(6), w, 2)
    assert rep.verdict == "holds"
    assert rep.params["Delta"] == "D_infinity"
    assert rep.params["s"] == (2 * 3) ** rep.params["r"]
    assert rep.counts["hyperelementary"] == rep.counts.get("family_holonomy", 0) + rep.counts.get(
        "index", 0) + rep.counts.get("family_torsion", 0)
