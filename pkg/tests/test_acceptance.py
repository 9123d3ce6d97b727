"""Acceptance criteria 1-12, each under its time limit.

Every criterion prints one ``PASS`` or ``FAIL`` line with its elapsed time.
Run ``pytest tests/test_acceptance.py -v -s`` to see them, or execute this
file directly.
"""

from __future__ import annotations

import json
import random
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import pytest

from fhcert.certificate import build_certificate_z2_dihedral, verify_certificate
from fhcert.cli import main as cli_main
from fhcert.cohomology import GModule, check_annihilation, cohomology, cyclic_cohomology
from fhcert.cryst import (
    AffineElement,
    affine_is_equivariant,
    equivariant_affine,
    expansive_map,
    preset,
    projection_hom_z2,
    verify_expansive,
    word_ball,
)
from fhcert.lemmas import (
    check_cyclic_good,
    check_hyper_good,
    cyclic_table,
    section7_index_check,
    sweep_prime_power,
    sweep_rs_kills_v,
)
from fhcert.linalg import IntMatrix, RatVector, matrix_order_mod, smith_normal_form
from fhcert.simplicial import check_nerve_contraction, grid_box_cover, sample_close_pairs

try:
    from .matrices import finite_order_matrices, order_of
except ImportError:  # executed as a script
    from matrices import finite_order_matrices, order_of

MINUS = IntMatrix([[-1, 0], [0, -1]])


def _run(number: int, limit: float, check) -> tuple[bool, str]:
    start = time.perf_counter()
    try:
        ok, detail = check()
    except Exception as exc:  # noqa: BLE001 - a crash is a failed criterion
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - start
    within = elapsed < limit
    verdict = "PASS" if ok and within else "FAIL"
    note = "" if within else f" (over the {limit:.0f} s limit)"
    line = f"criterion {number:2d}: {verdict} {elapsed:7.2f} s / {limit:.0f} s{note}  {detail}"
    print(line, flush=True)
    return ok and within, line


def _report(capsys, number, limit, check):
    with capsys.disabled():
        ok, line = _run(number, limit, check)
    assert ok, line


# 1


def criterion_1():
    rng = random.Random(1)
    for _ in range(500):
        m, n = rng.randint(1, 6), rng.randint(1, 6)
        M = IntMatrix([[rng.randint(-100, 100) for _ in range(n)] for _ in range(m)])
        U, D, V = smith_normal_form(M)
        if U @ M @ V != D or abs(U.det()) != 1 or abs(V.det()) != 1:
            return False, f"bad factorization of {M.tolist()}"
        diag = [D[i, i] for i in range(min(m, n))]
        if any(D[i, j] for i in range(m) for j in range(n) if i != j) or any(x < 0 for x in diag):
            return False, f"not diagonal for {M.tolist()}"
        for a, b in zip(diag, diag[1:]):
            if (a == 0 and b != 0) or (a and b % a):
                return False, f"divisibility chain broken for {M.tolist()}"
    return True, "500 matrices"


# 2


def criterion_2():
    count = 0
    for n in (1, 2, 3):
        for T in finite_order_matrices(n):
            m0 = order_of(T)
            for m in range(m0, 13, m0):
                mod = GModule.cyclic(m, T)
                for k in (0, 1, 2):
                    H = cohomology(mod, k)
                    if H != cyclic_cohomology(m, T, k):
                        return False, f"mismatch at T={T.tolist()}, m={m}, k={k}"
                    if k and (H.free_rank or any(m % d for d in H.invariant_factors)):
                        return False, f"H^{k} not killed by {m} at T={T.tolist()}"
                    count += 1
                if n < 3 and not (check_annihilation(mod, 1) and check_annihilation(mod, 2)):
                    return False, f"check_annihilation false at T={T.tolist()}, m={m}"
    return True, f"{count} (module, degree) instances"


# 3


def criterion_3():
    rep = sweep_rs_kills_v(2, 3)
    c = rep.counts
    ok = rep.verdict == "holds" and c["matrices"] == 48 and c.get("counterexample", 0) == 0
    return ok, f"{c['matrices']} matrices, {c['instances']} instances, {c.get('holds', 0)} hold"


# 4


def _sample_gl2z(rng: random.Random) -> list[list[int]]:
    if rng.random() < 0.2:
        return [[rng.choice([1, -1])]]
    M = IntMatrix.identity(2)
    for _ in range(rng.randint(1, 4)):
        k = rng.randint(-3, 3)
        M = M @ (IntMatrix([[1, k], [0, 1]]) if rng.random() < 0.5 else IntMatrix([[1, 0], [k, 1]]))
    if rng.random() < 0.5:
        M = M @ IntMatrix([[0, 1], [1, 0]])
    return M.tolist()


def criterion_4():
    rng = random.Random(4)
    total = 0
    for s in (6, 15, 35):
        for _ in range(10):
            M = _sample_gl2z(rng)
            rep = sweep_prime_power(M, s)
            if rep.verdict != "holds" or rep.params["r_prime"] != matrix_order_mod(M, s):
                return False, f"M={M}, s={s}: {rep.counterexamples[:1]}"
            total += rep.counts["cyclic_subgroups"]
    return True, f"30 matrices, {total} cyclic subgroups"


# 5


CYCLIC_GOOD_N2 = ([[0, -1], [1, 0]], [[1, 1], [0, 1]], [[2, 1], [1, 1]], [[0, -1], [1, -1]], [[-1, 0], [0, 1]])


def criterion_5():
    rep = check_cyclic_good([[1]], 2, 3, 3, 5, "full")
    if rep.verdict != "holds" or rep.params["r"] != 15 * 8:
        return False, f"n=1: {rep.verdict}"
    total = rep.counts["cyclic_subgroups"]
    for M in CYCLIC_GOOD_N2:
        rep = check_cyclic_good(M, 2, 3, 3, 5, "reduced", list_subgroups=False)
        if rep.verdict != "holds" or rep.counts["failures"]:
            return False, f"M={M}: {rep.counterexamples[:1]}"
        total += rep.counts["cyclic_subgroups"]
    return True, f"{total} cyclic subgroups, 0 failures"


# 6


HYPER_GOOD_GROUPS = ([[1]], [[-1]], [[2]], [[-1, 0], [0, -1]], [[0, -1], [1, 0]], [[1, 1], [0, 1]])


def criterion_6():
    total = 0
    for M in HYPER_GOOD_GROUPS:
        r = 15 * matrix_order_mod(M, 15)
        rep = check_hyper_good(M, 2, 3, 15, r, 3, 5)
        if rep.verdict != "holds":
            return False, f"M={M}: {rep.counterexamples[:1]}"
        for row in rep.witness["subgroups"]:
            proof = row["proof"]
            if not proof["ok"]:
                return False, f"M={M}: proof route fails on {row}"
            if proof["route"] == "cap-l-group" and proof["k"] != {3: 5, 5: 3}[row["l"]]:
                return False, f"M={M}: k={proof['k']} for l={row['l']}"
        total += rep.counts["hyperelementary"]
    return True, f"{len(HYPER_GOOD_GROUPS)} groups, {total} hyperelementary subgroups"


# 7


def criterion_7():
    G = preset("Zn-minus-id:2")
    rng = random.Random(7)
    ball = list(word_ball(G, 4))
    pts = [[Fraction(1, 3), Fraction(-2, 5)], [Fraction(0), Fraction(0)], [Fraction(7, 2), Fraction(1)]]
    checked = 0
    for s in (3, 5, 7):
        for _ in range(20):
            u = RatVector([rng.randint(-10, 10), rng.randint(-10, 10)])
            target = [AffineElement(MINUS, u), AffineElement.translation([s, 0]),
                      AffineElement.translation([0, s])]
            phi = expansive_map(G, s, target)
            if phi.u != u or not verify_expansive(phi, G, 4):
                return False, f"phi_u fails for s={s}, u={u.to_json()}"
            scale, shift = equivariant_affine(phi, G)
            half = u.scale(Fraction(1, 2))
            if scale != s or shift != half or not affine_is_equivariant(phi, half, ball, pts):
                return False, f"x -> s x + u/2 not equivariant for s={s}, u={u.to_json()}"
            checked += 1
    return True, f"{checked} maps on a ball of {len(ball)} elements"


# 8


def criterion_8():
    checked = 0
    for p in (3, 5, 7, 11, 13):
        lines = [(1, t) for t in range(p)] + [(0, 1)]
        for c in lines:
            a, b = projection_hom_z2(p, c)
            kernel = {(x, y) for x in range(p) for y in range(p) if (a * x + b * y) % p == 0}
            span = {((k * c[0]) % p, (k * c[1]) % p) for k in range(p)}
            if kernel != span or a * a + b * b > 2 * p:
                return False, f"p={p}, C={c}: (a, b)=({a}, {b})"
            checked += 1
    return True, f"{checked} cyclic subgroups"


# 9


def criterion_9():
    cert = build_certificate_z2_dihedral(1, 2)
    if cert.primes != {"p": 3, "q": 5}:
        return False, f"primes {cert.primes}"
    rep = verify_certificate(cert, radius=6)
    need = ("alpha_surjective", "every_H_has_entry", "descriptor", "action", "stabilizers", "equivariance",
            "contraction")
    bad = [k for k in need if rep.clauses.get(k) is not True]
    if bad or not rep.ok:
        return False, f"failing clauses {bad}"
    for e in rep.entries:
        detail = e.get("contraction_detail")
        if detail and detail["analytic_bound_sq"] is not None:
            worst = Fraction(detail["max_displacement"])
            if worst * worst > Fraction(detail["analytic_bound_sq"]):
                return False, f"entry {e['index']} exceeds the analytic bound"
    return True, (f"{len(cert.entries)} entries, ball {rep.coverage['ball_size']}, "
                  f"max displacement {rep.clauses['max_displacement']}")


# 10


def criterion_10():
    rep = section7_index_check(cyclic_table(6), [1, -1, 1, -1, 1, -1], 5)
    if rep.params.get("s") != 7776:
        return False, f"s = {rep.params.get('s')}"
    c = rep.counts
    return rep.verdict == "holds", (f"{c['hyperelementary']} hyperelementary subgroups, "
                                    f"{c['failures']} failures")


# 11


def criterion_11():
    lo, hi, omega, N = Fraction(0), Fraction(10), Fraction(1), 3
    cover = grid_box_cover(lo, hi, Fraction(4), Fraction(2))
    pairs = sample_close_pairs(lo, hi, omega / (8 * N), 10_000, seed=0)
    rep = check_nerve_contraction(cover, omega, N, pairs, (lo, hi), 100)
    ok = rep.ok and rep.pairs_checked == 10_000 and rep.pairs_failed == 0
    return ok, f"{rep.pairs_checked} pairs, {rep.pairs_failed} failed, bound {rep.bound}"


# 12


def _two_runs(argv_for) -> bool:
    with tempfile.TemporaryDirectory() as d:
        outs = []
        for k in range(2):
            for argv in argv_for(Path(d), k):
                if cli_main(argv) != 0:
                    return False
            outs.append(sorted(Path(d).glob(f"*-{k}.json")))
        return all(a.read_bytes() == b.read_bytes() for a, b in zip(*outs)) and len(outs[0]) == len(outs[1])


def criterion_12():
    def cert_runs(d: Path, k: int):
        return [["build", "--group", "Zn-minus-id:2", "--R", "1", "--eps", "2", "--workers", "1",
                 "--out", str(d / f"cert-{k}.json")],
                ["verify", str(d / f"cert-{k}.json"), "--ball", "6", "--workers", "1",
                 "--out", str(d / f"verify-{k}.json")]]

    def section7_runs(d: Path, k: int):
        params = json.dumps({"m": 6, "w": [1, -1, 1, -1, 1, -1], "i": 5})
        return [["lemma", "section7", "--params", params, "--workers", "1", "--out", str(d / f"s7-{k}.json")]]

    a, b = _two_runs(cert_runs), _two_runs(section7_runs)
    return a and b, f"certificate reports identical: {a}, section7 reports identical: {b}"


CRITERIA = [
    (1, 10, criterion_1), (2, 60, criterion_2), (3, 30, criterion_3), (4, 120, criterion_4),
    (5, 120, criterion_5), (6, 60, criterion_6), (7, 30, criterion_7), (8, 30, criterion_8),
    (9, 300, criterion_9), (10, 300, criterion_10), (11, 60, criterion_11),
    # no limit of its own: two runs each of criteria 9 and 10
    (12, 1200, criterion_12),
]


@pytest.mark.parametrize("number,limit,check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_acceptance(capsys, number, limit, check):
    _report(capsys, number, limit, check)


if __name__ == "__main__":
    results = [_run(n, limit, check)[0] for n, limit, check in CRITERIA]
    raise SystemExit(0 if all(results) else 1)
