"""Build and verify Farrell-Hsiang certificates at a concrete ``(R, eps)``.

Every entry of a certificate describes, for one hyperelementary subgroup ``H``
of the finite quotient ``G / sA``, a map ``f_H(g) = (Lambda b_g - kappa) / s_H``
into a simplicial complex and an action of the preimage ``H-bar`` on it,
``h -> (x -> M'_h x + y_h)`` with ``y_h = (Lambda b_h - (I - M'_h) u) / s_H``.
Here ``u`` describes the affine map ``x -> s_H x + u`` that is equivariant for
the expansive map, and ``kappa`` is the offset actually used by ``f_H``; an
honest certificate has ``kappa = u``.

Complexes are the half-integer line (the barycentric subdivision of the
integer line), ``R^n`` with the unit cube grid subdivided once, or a point.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, gcd, isqrt, lcm

import numpy as np

from .cryst import (
    AffineElement,
    CrystGroup,
    conjugated_expansive_map,
    equivariant_affine,
    expansive_map,
    preset,
    projection_hom_z2,
    qi_constants,
    word_ball,
)
from .errors import BadResidue, FhCertError, TooLarge, Unsupported
from .groups import GroupElement, Lattice, Subgroup, closure, enumerate_hyperelementary_subgroups
from .linalg import IntMatrix, RatVector, format_rational, parse_rational, rank
from .numtheory import is_prime, least_prime_in_progressions, multiplicative_order, p_part
from .simplicial import CONVENTIONS, segment_l1_length

SCHEMA = "fh-cert/certificate"
SCHEMA_VERSION = 1
REPORT_SCHEMA = "fh-cert/verification"

SOUNDNESS_CAVEAT = (
    "Ball verification is evidence, not proof: every check below ran only on the "
    "stated ball and the pairs it contains, while the definition quantifies over the whole group."
)

FAMILY_TAGS = ("VCyc", "Finite", "FullGroupFamilyMember")
COMPLEX_KINDS = ("HalfIntegerLine", "EuclideanSimplicialRn", "Point")


def dirichlet_prime(a: int, m: int, floor: int = 2) -> int:
    """Least prime ``p >= floor`` with ``p = a mod m``."""
    if m < 1:
        raise BadResidue("modulus must be positive")
    if gcd(a, m) != 1:
        raise BadResidue(f"gcd({a}, {m}) != 1")
    return least_prime_in_progressions([(a % m, m)], floor)


def _conv_factor(convention: str) -> int:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown l1 convention {convention!r}")
    return 1 if convention == "unit-edge" else 2


def _ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _fr(x) -> str:
    return format_rational(Fraction(x))


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else parse_rational(str(x))


# ---------------------------------------------------------------------------
# certificate data


@dataclass
class Entry:
    """Data for one hyperelementary ``H`` of the quotient."""

    subgroup: dict
    prime: int
    complex: str
    family: str
    Lambda: list[list[int]]
    offset: list[Fraction]
    scale: int
    u: list[Fraction]
    point_action: dict[int, list[list[int]]]
    constants: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "subgroup": self.subgroup,
            "l": self.prime,
            "complex": {"kind": self.complex, "dim": len(self.Lambda)},
            "family": self.family,
            "map": {"Lambda": self.Lambda, "offset": [_fr(x) for x in self.offset], "scale": self.scale,
                    "composition": _composition(self.complex)},
            "action": {"kind": "expansive-preimage", "scale": self.scale, "u": [_fr(x) for x in self.u],
                       "point_action": {str(k): v for k, v in sorted(self.point_action.items())}},
            "constants": self.constants,
        }

    @classmethod
    def from_json(cls, payload: dict) -> Entry:
        return cls(
            subgroup=payload["subgroup"],
            prime=int(payload["l"]),
            complex=payload["complex"]["kind"],
            family=payload["family"],
            Lambda=[[int(x) for x in row] for row in payload["map"]["Lambda"]],
            offset=[_as_fraction(x) for x in payload["map"]["offset"]],
            scale=int(payload["map"]["scale"]),
            u=[_as_fraction(x) for x in payload["action"]["u"]],
            point_action={int(k): [[int(x) for x in row] for row in v]
                          for k, v in payload["action"]["point_action"].items()},
            constants=payload.get("constants", {}),
        )

    def evaluate(self, g: AffineElement) -> RatVector:
        """``f_H(g)`` exactly."""
        if not self.Lambda:
            return RatVector([])
        b = g.b
        return RatVector([(sum(Fraction(a) * x for a, x in zip(row, b)) - k) / self.scale
                          for row, k in zip(self.Lambda, self.offset)])


def _composition(kind: str) -> list[str]:
    if kind == "HalfIntegerLine":
        return ["ev", "linear r", "inverse affine a_{s,u}"]
    if kind == "EuclideanSimplicialRn":
        return ["ev", "identity", "inverse affine a_{s,u}"]
    return ["constant"]


@dataclass
class FHCertificate:
    group: CrystGroup
    R: Fraction
    eps: Fraction
    construction: str
    modulus: int
    primes: dict
    entries: list[Entry]
    constants: dict
    convention: str = "unit-edge"
    unhandled: list = field(default_factory=list)

    @property
    def dimension_bound(self) -> int:
        return max((len(e.Lambda) for e in self.entries if e.complex != "Point"), default=0)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "version": SCHEMA_VERSION,
            "construction": self.construction,
            "group": self.group.to_json(),
            "R": _fr(self.R),
            "eps": _fr(self.eps),
            "N": self.dimension_bound,
            "primes": self.primes,
            "quotient_map": {"kind": "reduction", "modulus": self.modulus,
                             "kernel": f"{self.modulus}A"},
            "metadata": {"l1_convention": self.convention, "l1_metric": "path metric of the complex",
                         "triangulation": ("unit cube grid of R^n, barycentrically subdivided once; "
                                           "vertices at half-integer points"),
                         "refinement_depth": 1},
            "constants": self.constants,
            "entries": [e.to_json() for e in self.entries],
            "unhandled": self.unhandled,
        }

    @classmethod
    def from_json(cls, payload: dict) -> FHCertificate:
        if payload.get("schema") != SCHEMA:
            raise ValueError("not a certificate document")
        if int(payload.get("version", -1)) != SCHEMA_VERSION:
            raise ValueError(f"unsupported certificate version {payload.get('version')}")
        return cls(
            group=CrystGroup.from_json(payload["group"]),
            R=_as_fraction(payload["R"]),
            eps=_as_fraction(payload["eps"]),
            construction=payload["construction"],
            modulus=int(payload["quotient_map"]["modulus"]),
            primes=payload["primes"],
            entries=[Entry.from_json(e) for e in payload["entries"]],
            constants=payload.get("constants", {}),
            convention=payload.get("metadata", {}).get("l1_convention", "unit-edge"),
            unhandled=payload.get("unhandled", []),
        )


def _subgroup_json(H: Subgroup) -> dict:
    return {"order": H.order(), "lattice": [list(r) for r in H.lattice.rows], "image": list(H.top),
            "generators": [{"v": list(g.v), "top": g.top} for g in H.generators()]}


def _point_actions(G: CrystGroup, dim: int, linear=None) -> dict[int, list[list[int]]]:
    if linear is None:
        return {i: m.tolist() for i, m in enumerate(G.point_group)}
    return {i: linear(m) for i, m in enumerate(G.point_group)}


def _qi(G: CrystGroup):
    qi = qi_constants(G, 2)
    if not qi.holds:
        raise FhCertError("quasi-isometry constants failed on the sample ball")
    return qi


# ---------------------------------------------------------------------------
# Z^2 x| {+-I}


def dihedral_primes(R, eps, C1=Fraction(1), C2=Fraction(0), convention: str = "unit-edge") -> tuple[int, int, Fraction]:
    """The two least distinct odd primes ``>= 8 c^2 (C1 R + C2)^2 / eps^2`` (``c`` the convention factor)."""
    R, eps = Fraction(R), Fraction(eps)
    c = _conv_factor(convention)
    bound = 8 * c * c * (C1 * R + C2) ** 2 / (eps * eps)
    p = max(3, _ceil_fraction(bound))
    while not is_prime(p):
        p += 1
    q = p + 1
    while not is_prime(q):
        q += 1
    return p, q, bound


def _line_entry(G: CrystGroup, Gs, H: Subgroup, l: int, ps: int, qi, X: Fraction, convention: str):
    """Half-integer-line entry through the projection ``r`` to ``Z`` and ``phi_u`` on ``D_infty``."""
    s = Gs.s
    C = Lattice.from_generators(2, ps, H.lattice.generators())
    if C.order() == ps * ps:
        return None, "H meets (Z/p)^2 in a non-cyclic subgroup"
    gens = C.generators()
    a, b = (1, 0) if not gens else projection_hom_z2(ps, gens[0])
    u = 0
    if 1 in H.top:
        v = H.section[1]
        u = a * v[0] + b * v[1]
    D = preset("Dinfty")
    target = [AffineElement.translation([a * x[0] + b * x[1]]) for x in H.lattice.generators()]
    target += [AffineElement.translation([a * s]), AffineElement.translation([b * s])]
    if 1 in H.top:
        target.append(AffineElement(IntMatrix([[-1]]), RatVector([u])))
    try:
        phi = expansive_map(D, ps, target=target)
    except FhCertError as exc:
        return None, f"no expansive map: {exc}"
    _, u_aff = equivariant_affine(phi, D)
    c = _conv_factor(convention)
    norm = a * a + b * b
    chain_sq = 8 * c * c * X * X / ps
    constants = {"r": [a, b], "r_norm_sq": norm, "r_norm_bound_sq": 2 * ps, "p_H": ps,
                 "phi_u": _fr(phi.u.entries[0]) if phi.u is not None else "0",
                 "analytic_bound_sq": _fr(chain_sq),
                 "pair_bound": "d_l1 <= 2 c |r| |ev g1 - ev g2| / p_H"}
    entry = Entry(_subgroup_json(H), l, "HalfIntegerLine", "VCyc", [[a, b]], [u_aff.entries[0]], ps,
                  [u_aff.entries[0]], _point_actions(G, 1, lambda m: [[m[0, 0]]]), constants)
    return entry, None


def build_certificate_z2_dihedral(R, eps, convention: str = "unit-edge", cap: int | None = None) -> FHCertificate:
    """Certificate for ``Z^2 x|_{-I} Z/2`` through the quotient mod ``p q``."""
    R, eps = Fraction(R), Fraction(eps)
    if R <= 0 or eps <= 0:
        raise ValueError("R and eps must be positive")
    G = preset("Zn-minus-id:2")
    qi = _qi(G)
    X = qi.C1 * R + qi.C2
    p, q, bound = dihedral_primes(R, eps, qi.C1, qi.C2, convention)
    s = p * q
    Gs = G.quotient(s)
    entries, unhandled = [], []
    for item in enumerate_hyperelementary_subgroups(Gs, cap):
        H, l = item.subgroup, item.witness.prime
        ps = p if l != p else q
        entry, why = _line_entry(G, Gs, H, l, ps, qi, X, convention)
        if entry is None:
            unhandled.append({"subgroup": _subgroup_json(H), "l": l, "reason": why})
        else:
            entries.append(entry)
    constants = {"C1": _fr(qi.C1), "C2": _fr(qi.C2), "C1_exact": qi.C1_exact,
                 "prime_bound": _fr(bound), "prime_bound_formula": "8 c^2 (C1 R + C2)^2 / eps^2",
                 "analytic_chain": "2 c sqrt(2) (C1 R + C2) / sqrt(p_H)"}
    return FHCertificate(G, R, eps, "z2-dihedral", s, {"p": p, "q": q}, entries, constants, convention, unhandled)


# ---------------------------------------------------------------------------
# split Z^n x| F


def _is_signed_permutation(m: IntMatrix) -> bool:
    rows = m.tolist()
    n = len(rows)
    for line in rows + [list(c) for c in zip(*rows)]:
        nz = [x for x in line if x]
        if len(nz) != 1 or abs(nz[0]) != 1:
            return False
    return len(rows) == n


def split_primes(G: CrystGroup, R, eps, C1, C2, convention: str = "unit-edge") -> dict:
    """``p = 1 mod l``, ``p = 3 mod 4`` above the triangulation bound, and ``r`` with ``p^r = 1 mod |F|``."""
    R, eps = Fraction(R), Fraction(eps)
    n = G.n
    order = G.holonomy_order
    l = order // p_part(order, 2)
    c = _conv_factor(convention)
    X = C1 * R + C2
    # d_l1 <= 2 c sqrt(n) d_euc on the subdivided grid, so delta = eps / (2 c sqrt n)
    need_sq = 4 * n * c * c * X * X / (eps * eps)
    lower = max(2, isqrt(_ceil_fraction(need_sq)))
    while lower * lower < need_sq:
        lower += 1
    bounds = {"triangulation_bound_sq": _fr(need_sq)}
    minus = (-IntMatrix.identity(n)).data
    line_ok = [m.data for m in G.point_group] == [IntMatrix.identity(n).data, minus] and n == 2
    if line_ok:
        line = 8 * c * c * X * X / (eps * eps)
        lower = max(lower, _ceil_fraction(line))
        bounds["line_bound"] = _fr(line)
    p = least_prime_in_progressions([(1, l), (3, 4)], lower)
    r = multiplicative_order(p, order) if order > 1 else 1
    return {"p": p, "r": r, "s": p**r, "l": l, "holonomy": order, "line_fallback": line_ok, **bounds}


def _complement_vector(Gs, H: Subgroup, order: int) -> list[int]:
    """``w`` with ``(I - M_q) w = v_q`` for all ``q``: ``w = |F|^-1 sum_q v_q``."""
    s = Gs.s
    inv = pow(order, -1, s)
    total = [0] * Gs.n
    for q in H.top:
        total = [(a + b) for a, b in zip(total, H.section[q])]
    return [(inv * x) % s for x in total]


def build_certificate_split_cryst(G: CrystGroup, R, eps, convention: str = "unit-edge",
                                  cap: int | None = None) -> FHCertificate:
    """Certificate for a split ``Z^n x| F`` with ``F`` acting by signed permutations."""
    R, eps = Fraction(R), Fraction(eps)
    if R <= 0 or eps <= 0:
        raise ValueError("R and eps must be positive")
    if not G.is_split:
        raise Unsupported("the rank-n construction needs a split group")
    if not all(_is_signed_permutation(m) for m in G.point_group):
        raise Unsupported("the cube triangulation is F-invariant only for signed permutation point groups")
    qi = _qi(G)
    X = qi.C1 * R + qi.C2
    plan = split_primes(G, R, eps, qi.C1, qi.C2, convention)
    p, s = plan["p"], plan["s"]
    Gs = G.quotient(s)
    full = tuple(range(G.holonomy_order))
    c = _conv_factor(convention)
    entries, unhandled = [], []
    for item in enumerate_hyperelementary_subgroups(Gs, cap):
        H, l = item.subgroup, item.witness.prime
        if H.top != full:
            entries.append(Entry(_subgroup_json(H), l, "Point", "FullGroupFamilyMember", [], [], s, [], {},
                                 {"reason": "image in F is proper"}))
            continue
        if H.lattice.is_zero():
            w = _complement_vector(Gs, H, G.holonomy_order)
            phi = conjugated_expansive_map(G, s, w)
            _, u = equivariant_affine(phi, G)
            ident = [[int(i == j) for j in range(G.n)] for i in range(G.n)]
            constants = {"w": w, "analytic_bound_sq": _fr(4 * G.n * c * c * X * X / (s * s)),
                         "pair_bound": "d_l1 <= 2 c sqrt(n) |ev g1 - ev g2| / s"}
            entries.append(Entry(_subgroup_json(H), l, "EuclideanSimplicialRn", "Finite", ident,
                                 list(u.entries), s, list(u.entries), _point_actions(G, G.n), constants))
            continue
        if plan["line_fallback"] and plan["r"] == 1:
            entry, why = _line_entry(G, Gs, H, l, p, qi, X, convention)
            if entry is not None:
                entries.append(entry)
                continue
        else:
            why = "H meets the translation subgroup nontrivially"
        unhandled.append({"subgroup": _subgroup_json(H), "l": l, "reason": why})
    constants = {"C1": _fr(qi.C1), "C2": _fr(qi.C2), "C1_exact": qi.C1_exact,
                 **{k: v for k, v in plan.items() if k not in ("p", "r", "s")}}
    return FHCertificate(G, R, eps, "split-cryst", s, {"p": p, "r": plan["r"]}, entries, constants,
                         convention, unhandled)


def build_certificate(group: str | CrystGroup, R, eps, convention: str = "unit-edge") -> FHCertificate:
    """Dispatch on the group: the dedicated builder for ``Zn-minus-id:2``, the rank-n one otherwise."""
    G = preset(group) if isinstance(group, str) else group
    if G.name == "Zn-minus-id:2":
        return build_certificate_z2_dihedral(R, eps, convention)
    return build_certificate_split_cryst(G, R, eps, convention)


def tamper_certificate(cert: FHCertificate, delta=1, index: int | None = None) -> FHCertificate:
    """Copy of ``cert`` with the map offset of one entry (or all) shifted by ``delta``."""
    out = copy.deepcopy(cert)
    for i, e in enumerate(out.entries):
        if e.offset and (index is None or i == index):
            e.offset = [e.offset[0] + Fraction(delta)] + e.offset[1:]
    return out


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    ok: bool
    ball_radius: int
    clauses: dict
    entries: list
    coverage: dict
    caveat: str = SOUNDNESS_CAVEAT

    def to_json(self) -> dict:
        return {"schema": REPORT_SCHEMA, "version": SCHEMA_VERSION, "ok": self.ok, "ball_radius": self.ball_radius,
                "clauses": self.clauses, "coverage": self.coverage, "entries": self.entries,
                "soundness_caveat": self.caveat}

    def failures(self) -> list[dict]:
        return [e for e in self.entries if not e["ok"]]


class _Ball:
    """Ball elements as arrays: point index, integral translation part, word length."""

    def __init__(self, G: CrystGroup, radius: int):
        ball = word_ball(G, radius)
        elems = list(ball)
        self.elements = elems
        self.q = np.array([G.point_index(g.M) for g in elems], dtype=np.int64)
        if any(x.denominator != 1 for g in elems for x in g.b):
            raise Unsupported("ball elements must have integral translations")
        self.b = np.array([[int(x) for x in g.b] for g in elems], dtype=np.int64).reshape(len(elems), G.n)
        self.length = np.array([ball[g] for g in elems], dtype=np.int64)


def _point_table(G: CrystGroup) -> np.ndarray:
    k = G.holonomy_order
    return np.array([[G.point_index(a @ b) for b in G.point_group] for a in G.point_group], dtype=np.int64)


def _membership(H: Subgroup, q: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean mask of ball elements whose image mod ``s`` lies in ``H``."""
    s = H.group.s
    row = np.full(H.group.top.order, -1, dtype=np.int64)
    for i, x in enumerate(H.top):
        row[x] = i
    rows = row[q]
    ok = rows >= 0
    sec = H.section_array()
    diff = np.zeros_like(b)
    diff[ok] = b[ok] - sec[rows[ok]]
    red = H.lattice.reduce_array(diff)
    return ok & ~red.any(axis=1)


def _entry_ints(entry: Entry, n: int):
    """Integer data: ``F(g) = K f_H(g)`` with ``F = D Lambda b - D kappa`` and ``K = D s_H``."""
    den = 1
    for x in list(entry.offset) + list(entry.u):
        den = lcm(den, Fraction(x).denominator)
    Lam = np.array(entry.Lambda, dtype=np.int64).reshape(len(entry.Lambda), n)
    kappa = np.array([int(Fraction(x) * den) for x in entry.offset], dtype=np.int64)
    uvec = np.array([int(Fraction(x) * den) for x in entry.u], dtype=np.int64)
    return den, Lam, kappa, uvec, den * entry.scale


def _l1_line(dF: np.ndarray, K: int, c: int) -> list[Fraction]:
    return [Fraction(2 * c * abs(int(x)), K) for x in dF]


def _check_entry(cert: FHCertificate, Gs, entry: Entry, ball: _Ball, pairs, table, pointmats) -> dict:
    G = cert.group
    n = G.n
    s = Gs.s
    out = {"subgroup_order": entry.subgroup.get("order"), "image": entry.subgroup.get("image"),
           "complex": entry.complex, "family": entry.family, "clauses": {}, "errors": []}
    cl = out["clauses"]
    gens = [GroupElement(tuple(x["v"]), int(x["top"])) for x in entry.subgroup["generators"]]
    H = closure(Gs, gens)
    cl["descriptor"] = (H.order() == entry.subgroup["order"] and [list(r) for r in H.lattice.rows]
                        == entry.subgroup["lattice"] and list(H.top) == entry.subgroup["image"])
    inside = _membership(H, ball.q, ball.b)
    hq, hb = ball.q[inside], ball.b[inside]
    out["Hbar_in_ball"] = int(inside.sum())
    if entry.complex == "Point":
        full = tuple(range(G.holonomy_order))
        cl["action"] = True
        cl["stabilizers"] = entry.family == "FullGroupFamilyMember" and tuple(H.top) != full
        cl["equivariance"] = True
        cl["contraction"] = True
        out["max_displacement"] = "0"
        out["ok"] = all(cl.values())
        return out
    m = len(entry.Lambda)
    den, Lam, kappa, uvec, K = _entry_ints(entry, n)
    Mp = {k: np.array(v, dtype=np.int64).reshape(m, m) for k, v in entry.point_action.items()}
    Mp_arr = np.stack([Mp[k] for k in range(G.holonomy_order)])
    eye = np.eye(m, dtype=np.int64)

    # (ii) point homomorphism, intertwining, cell preservation, homomorphism on H-bar cap ball
    P = list(H.top)
    point_hom = all(np.array_equal(Mp_arr[table[a, b]], Mp_arr[a] @ Mp_arr[b]) for a in P for b in P)
    intertwine = all(np.array_equal(Lam @ pointmats[a], Mp_arr[a] @ Lam) for a in P)
    signed = all(_is_signed_permutation(IntMatrix(Mp_arr[a].tolist())) for a in P)
    Y = den * (hb @ Lam.T) - np.einsum("hij,j->hi", eye[None] - Mp_arr[hq], uvec)
    integral = bool((Y % K == 0).all())
    hb2 = np.einsum("hij,kj->hki", pointmats[hq], hb) + hb[:, None, :]
    hq2 = table[hq][:, hq]
    Y2 = den * np.einsum("ij,hkj->hki", Lam, hb2) - np.einsum("hkij,j->hki", eye[None, None] - Mp_arr[hq2], uvec)
    composed = np.einsum("hij,kj->hki", Mp_arr[hq], Y) + Y[:, None, :]
    hom = bool((Y2 == composed).all())
    cl["action"] = point_hom and intertwine and signed and integral and hom
    out["action_detail"] = {"point_homomorphism": point_hom, "intertwines": intertwine,
                            "signed_permutation": signed, "integral_translations": integral,
                            "homomorphism_on_ball": hom, "pairs": int(len(hq) ** 2)}

    # (iii) stabilizers
    kernel_rank = n - rank(IntMatrix(entry.Lambda))
    allowed = {"VCyc": 1, "Finite": 0}.get(entry.family, -1)
    fixed_translations = (hq == 0) & ~Y.any(axis=1)
    sampled_ok = bool((hb[fixed_translations] @ Lam.T == 0).all())
    if allowed == 0:
        sampled_ok = sampled_ok and not (fixed_translations & hb.any(axis=1)).any()
    cl["stabilizers"] = 0 <= kernel_rank <= allowed and sampled_ok
    out["stabilizer_detail"] = {"translation_kernel_rank": kernel_rank,
                                "fixing_translations_sampled": int(fixed_translations.sum())}

    # (iv) equivariance on (H-bar cap ball) x ball
    Fg = den * (ball.b @ Lam.T) - kappa[None, :]
    bhg = np.einsum("hij,gj->hgi", pointmats[hq], ball.b) + hb[:, None, :]
    Fhg = den * np.einsum("ij,hgj->hgi", Lam, bhg) - kappa[None, None, :]
    rhs = np.einsum("hij,gj->hgi", Mp_arr[hq], Fg) + Y[:, None, :]
    eq = Fhg == rhs
    bad = np.argwhere(~eq.all(axis=2))
    cl["equivariance"] = len(bad) == 0
    out["equivariance_detail"] = {"pairs": int(eq.shape[0] * eq.shape[1]), "failures": int(len(bad))}
    if len(bad):
        h, g = bad[0]
        out["equivariance_detail"]["first_failure"] = {
            "h": {"point": int(hq[h]), "b": [int(x) for x in hb[h]]},
            "g": {"point": int(ball.q[g]), "b": [int(x) for x in ball.b[g]]}}

    # (v) contraction on pairs (g, g k) with |k| <= R
    i1, b2 = pairs
    F1 = Fg[i1]
    F2 = den * (b2 @ Lam.T) - kappa[None, :]
    dF = F2 - F1
    c = _conv_factor(cert.convention)
    eps = cert.eps
    if entry.complex == "HalfIntegerLine":
        dists = _l1_line(dF[:, 0], K, c)
        exact = True
    else:
        dists, exact = _rn_distances(F1, F2, K, c, cert.convention)
    worst = max(dists, default=Fraction(0))
    contraction = worst <= eps
    db = b2 - ball.b[i1]
    # line: |r . db| <= |r| |db|; R^n: d_l1 <= 2 c sqrt(n) d_euc
    factor = int((Lam * Lam).sum()) if entry.complex == "HalfIntegerLine" else m
    lhs_ok = True
    for d, row in zip(dists, db):
        if d * d * entry.scale ** 2 > 4 * c * c * factor * int((row * row).sum()):
            lhs_ok = False
            break
    analytic = entry.constants.get("analytic_bound_sq")
    analytic_sq = _as_fraction(analytic) if analytic is not None else None
    chain_ok = analytic_sq is None or (worst * worst <= analytic_sq and analytic_sq <= eps * eps)
    cl["contraction"] = contraction and lhs_ok and chain_ok
    out["contraction_detail"] = {"pairs": int(len(i1)), "max_displacement": _fr(worst), "exact": exact,
                                 "analytic_bound_sq": analytic, "per_pair_chain": lhs_ok,
                                 "eps": _fr(eps)}
    out["max_displacement"] = _fr(worst)
    out["ok"] = all(cl.values())
    return out


def _rn_distances(F1: np.ndarray, F2: np.ndarray, K: int, c: int, convention: str) -> tuple[list[Fraction], bool]:
    cache: dict = {}
    out = []
    exact = True
    for a, b in zip(F1.tolist(), F2.tolist()):
        x = [Fraction(v, K) for v in a]
        y = [Fraction(v, K) for v in b]
        base = [v.__floor__() for v in x]
        key = (tuple(v - f for v, f in zip(x, base)), tuple(v - f for v, f in zip(y, base)))
        hit = cache.get(key)
        if hit is None:
            hit = segment_l1_length(list(key[0]), list(key[1]), convention)
            cache[key] = hit
        out.append(hit[0])
        exact = exact and hit[1]
    return out, exact


def verify_certificate(cert: FHCertificate, radius: int | None = None, check_coverage: bool = True,
                       cap: int | None = None) -> VerificationReport:
    """Run all clauses on the ball of the given radius (default ``R + 4``)."""
    G = cert.group
    radius = int(ceil(cert.R)) + 4 if radius is None else int(radius)
    clauses: dict = {}
    entries_out: list = []
    coverage: dict = {"ball_radius": radius,
                      "pairs": f"(g, g k) with g in the ball and 1 <= |k| <= {_fr(cert.R)}; "
                               "by equivariance each pair stands for its H-bar orbit"}
    try:
        Gs = G.quotient(cert.modulus)
        gens = [G.reduce(g, cert.modulus) for g in G.generators]
        clauses["alpha_surjective"] = closure(Gs, gens).order() == Gs.order
    except Exception as exc:  # noqa: BLE001 - recorded, verification continues
        clauses["alpha_surjective"] = False
        clauses["alpha_error"] = str(exc)
        return VerificationReport(False, radius, clauses, entries_out, coverage)
    clauses["unhandled_subgroups"] = len(cert.unhandled)
    if check_coverage:
        try:
            listed = {tuple(map(tuple, e.subgroup["lattice"])) + (tuple(e.subgroup["image"]),) +
                      (tuple((tuple(x["v"]), x["top"]) for x in e.subgroup["generators"]),)
                      for e in cert.entries}
            expected = enumerate_hyperelementary_subgroups(Gs, cap)
            keys = set()
            for item in expected:
                H = item.subgroup
                keys.add(tuple(H.lattice.rows) + (tuple(H.top),) +
                         (tuple((g.v, g.top) for g in H.generators()),))
            clauses["every_H_has_entry"] = keys <= listed and not cert.unhandled
            coverage["hyperelementary_subgroups"] = len(keys)
        except TooLarge as exc:
            clauses["every_H_has_entry"] = False
            clauses["coverage_error"] = str(exc)
    coverage["entries"] = len(cert.entries)
    try:
        ball = _Ball(G, radius)
        small = word_ball(G, int(cert.R))
        ks = [k for k, d in small.items() if d >= 1]
        coverage["ball_size"] = len(ball.elements)
        coverage["step_elements"] = len(ks)
        index = {g: i for i, g in enumerate(ball.elements)}
        i1, b2 = [], []
        for g in ball.elements:
            for k in ks:
                i1.append(index[g])
                b2.append([int(x) for x in g.compose(k).b])
        pairs = (np.array(i1, dtype=np.int64), np.array(b2, dtype=np.int64).reshape(len(i1), G.n))
        coverage["contraction_pairs_per_entry"] = len(i1)
    except Exception as exc:  # noqa: BLE001
        clauses["ball_error"] = str(exc)
        return VerificationReport(False, radius, clauses, entries_out, coverage)
    table = _point_table(G)
    pointmats = np.array([m.tolist() for m in G.point_group], dtype=np.int64).reshape(-1, G.n, G.n)
    clause_names = ("descriptor", "action", "stabilizers", "equivariance", "contraction")
    summary = {k: True for k in clause_names}
    worst = Fraction(0)
    for i, entry in enumerate(cert.entries):
        try:
            res = _check_entry(cert, Gs, entry, ball, pairs, table, pointmats)
        except Exception as exc:  # noqa: BLE001 - per-entry failure, keep going
            res = {"ok": False, "clauses": {k: False for k in clause_names}, "errors": [repr(exc)]}
        res["index"] = i
        for k in clause_names:
            summary[k] = summary[k] and bool(res["clauses"].get(k, False))
        if "max_displacement" in res:
            worst = max(worst, _as_fraction(res["max_displacement"]))
        entries_out.append(res)
    clauses.update(summary)
    clauses["max_displacement"] = _fr(worst)
    ok = bool(clauses["alpha_surjective"]) and all(summary.values()) and clauses.get("every_H_has_entry", True) \
        and not cert.unhandled
    return VerificationReport(ok, radius, clauses, entries_out, coverage)
