"""Crystallographic groups as exact affine maps, word metrics and expansive maps."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

from .errors import BallTooLarge, GateFailed, NoSolution, NotFound, NoU, PreconditionFailed, Unsupported
from .groups import CyclicTop, FiniteSemidirect, GroupElement, TableTop
from .linalg import IntMatrix, RatVector, solve_rational

DEFAULT_BALL_CAP = 200_000


def sqrt_upper(x: Fraction) -> tuple[Fraction, bool]:
    """A rational ``y >= sqrt(x)``; the flag says whether ``y == sqrt(x)``."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("negative argument")
    num, den = x.numerator, x.denominator
    rn, rd = isqrt(num), isqrt(den)
    if rn * rn == num and rd * rd == den:
        return Fraction(rn, rd), True
    return Fraction(isqrt(num * den) + 1, den), False


@dataclass(frozen=True)
class AffineElement:
    """The affine map ``x -> M x + b``."""

    M: IntMatrix
    b: RatVector

    @classmethod
    def translation(cls, b: Sequence) -> AffineElement:
        b = RatVector(b)
        return cls(IntMatrix.identity(b.dim), b)

    @classmethod
    def linear(cls, M) -> AffineElement:
        M = M if isinstance(M, IntMatrix) else IntMatrix(M)
        return cls(M, RatVector.zeros(M.rows))

    @classmethod
    def identity(cls, n: int) -> AffineElement:
        return cls(IntMatrix.identity(n), RatVector.zeros(n))

    @property
    def n(self) -> int:
        return self.M.rows

    def compose(self, other: AffineElement) -> AffineElement:
        """``self o other``: ``(M1 M2, M1 b2 + b1)``."""
        return AffineElement(self.M @ other.M, (self.M @ other.b) + self.b)

    __mul__ = compose

    def inverse(self) -> AffineElement:
        n = self.n
        cols = [solve_rational(self.M, [int(i == j) for i in range(n)]) for j in range(n)]
        if any(x.denominator != 1 for c in cols for x in c):
            raise ValueError("linear part is not in GL_n(Z)")
        Minv = IntMatrix([[int(cols[j][i]) for j in range(n)] for i in range(n)])
        return AffineElement(Minv, -(Minv @ self.b))

    def apply(self, x: Sequence) -> RatVector:
        return (self.M @ RatVector(x)) + self.b

    def is_translation(self) -> bool:
        return self.M == IntMatrix.identity(self.n)

    def to_json(self) -> dict:
        return {"M": self.M.to_json(), "b": self.b.to_json()}

    @classmethod
    def from_json(cls, payload: dict) -> AffineElement:
        return cls(IntMatrix.from_json(payload["M"]), RatVector.from_json(payload["b"]))

    def sort_key(self):
        return (self.M.data, self.b.entries)


def evaluate(g: AffineElement) -> RatVector:
    """``g . 0``."""
    return g.b


@dataclass
class CrystGroup:
    """Crystallographic group given by a point group, a vector system and generators."""

    n: int
    point_group: list[IntMatrix]
    generators: list[AffineElement]
    generator_names: list[str]
    name: str = "custom"
    tau: dict[int, RatVector] = field(default_factory=dict)

    def __post_init__(self):
        ident = IntMatrix.identity(self.n)
        if not self.point_group or self.point_group[0] != ident:
            raise ValueError("point group must list the identity first")
        keys = {m.data for m in self.point_group}
        if len(keys) != len(self.point_group):
            raise ValueError("point group matrices must be distinct")
        for a in self.point_group:
            for b in self.point_group:
                if (a @ b).data not in keys:
                    raise ValueError("point group is not closed under products")
        for g in self.generators:
            if g.M.data not in keys:
                raise ValueError("generator linear part outside the point group")

    @property
    def is_split(self) -> bool:
        return all(all(x == 0 for x in v) for v in self.tau.values())

    @property
    def holonomy_order(self) -> int:
        return len(self.point_group)

    def point_index(self, M: IntMatrix) -> int:
        for i, m in enumerate(self.point_group):
            if m == M:
                return i
        raise ValueError("matrix is not in the point group")

    def centralizer_check(self) -> bool:
        """Translations form their own centralizer: no nontrivial ``M`` fixes all of ``A``."""
        ident = IntMatrix.identity(self.n)
        return all(m != ident for m in self.point_group[1:])

    def quotient(self, s: int) -> FiniteSemidirect:
        """``G / sA`` for split ``G``."""
        if not self.is_split:
            raise Unsupported("quotients are only built for split groups")
        if len(self.point_group) == 1:
            return FiniteSemidirect.cyclic(IntMatrix.identity(self.n), s, 1)
        if len(self.point_group) == 2:
            return FiniteSemidirect(self.n, s, CyclicTop(2, tuple(map(tuple, self.point_group[1].tolist())), s))
        top = TableTop.from_matrices([m.tolist() for m in self.point_group], s)
        return FiniteSemidirect(self.n, s, top)

    def reduce(self, g: AffineElement, s: int) -> GroupElement:
        """Image of ``g`` in ``G / sA``."""
        if any(x.denominator != 1 for x in g.b):
            raise ValueError("split group elements have integral translation part")
        return GroupElement(tuple(int(x) % s for x in g.b), self.point_index(g.M))

    def lift(self, x: GroupElement) -> AffineElement:
        return AffineElement(self.point_group[x.top], RatVector(x.v))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "point_group": [m.to_json() for m in self.point_group],
            "generators": [{"name": nm, **g.to_json()} for nm, g in zip(self.generator_names, self.generators)],
        }

    def to_json(self) -> dict:
        out = self.describe()
        out["tau"] = {str(k): v.to_json() for k, v in self.tau.items()}
        return out

    @classmethod
    def from_json(cls, payload: dict) -> CrystGroup:
        if isinstance(payload, str):
            return preset(payload)
        if "name" in payload and payload["name"] != "custom" and "point_group" not in payload and "F" not in payload:
            return preset(payload["name"])
        n = int(payload["n"])
        F = [IntMatrix.from_json(m) for m in payload.get("point_group", payload.get("F"))]
        gens = [AffineElement.from_json(g) for g in payload["generators"]]
        names = [g.get("name", f"g{i}") for i, g in enumerate(payload["generators"])]
        tau = {int(k): RatVector.from_json(v) for k, v in payload.get("tau", {}).items()}
        return cls(n, F, gens, names, payload.get("name", "custom"), tau)


def _unit(n: int, i: int) -> list[int]:
    return [int(j == i) for j in range(n)]


def preset(name: str) -> CrystGroup:
    """``Zn:n``, ``Zn-minus-id:n`` or ``Dinfty``."""
    if name == "Dinfty":
        g = preset("Zn-minus-id:1")
        g.name = "Dinfty"
        return g
    kind, _, rank = name.partition(":")
    if not rank.isdigit() or int(rank) < 1:
        raise ValueError(f"unknown group preset {name!r}")
    n = int(rank)
    ident = IntMatrix.identity(n)
    gens = [AffineElement.translation(_unit(n, i)) for i in range(n)]
    names = [f"e{i + 1}" for i in range(n)]
    if kind == "Zn":
        return CrystGroup(n, [ident], gens, names, name)
    if kind == "Zn-minus-id":
        gens.append(AffineElement.linear(-ident))
        return CrystGroup(n, [ident, -ident], gens, names + ["t"], name)
    raise ValueError(f"unknown group preset {name!r}")


def split_group(point_group: Sequence, name: str = "split") -> CrystGroup:
    """``Z^n x| F`` with generators ``e_i`` and a greedy generating set of ``F``."""
    mats = [m if isinstance(m, IntMatrix) else IntMatrix(m) for m in point_group]
    n = mats[0].rows
    ident = IntMatrix.identity(n)
    mats = [ident] + [m for m in mats if m != ident]
    closure = {ident.data}
    pgens: list[IntMatrix] = []
    for m in sorted(mats[1:], key=lambda m: m.data):
        if m.data in closure:
            continue
        pgens.append(m)
        frontier = list(closure)
        closure = set(closure)
        while frontier:
            nxt = []
            for x in frontier:
                for g in pgens:
                    y = (IntMatrix(x) @ g).data
                    if y not in closure:
                        closure.add(y)
                        nxt.append(y)
            frontier = nxt
    gens = [AffineElement.translation(_unit(n, i)) for i in range(n)] + [AffineElement.linear(m) for m in pgens]
    names = [f"e{i + 1}" for i in range(n)] + [f"f{j + 1}" for j in range(len(pgens))]
    return CrystGroup(n, mats, gens, names, name)


def symmetric_generators(G: CrystGroup) -> list[AffineElement]:
    """Generators followed by their inverses, duplicates removed, in a fixed order."""
    out, seen = [], set()
    for g in G.generators:
        for x in (g, g.inverse()):
            if x not in seen:
                seen.add(x)
                out.append(x)
    return out


def word_ball(G: CrystGroup, radius: int, cap: int = DEFAULT_BALL_CAP) -> dict[AffineElement, int]:
    """Elements within word distance ``radius`` of the identity, in BFS order."""
    gens = symmetric_generators(G)
    e = AffineElement.identity(G.n)
    dist = {e: 0}
    queue = deque([e])
    while queue:
        g = queue.popleft()
        d = dist[g]
        if d == radius:
            continue
        for s in gens:
            h = g.compose(s)
            if h not in dist:
                dist[h] = d + 1
                if len(dist) > cap:
                    raise BallTooLarge(f"ball of radius {radius} exceeds {cap} elements")
                queue.append(h)
    return dist


def word_distance(ball: dict[AffineElement, int], g: AffineElement, h: AffineElement) -> int | None:
    """``d(g, h) = |g^-1 h|`` when it is recorded in ``ball``."""
    return ball.get(g.inverse().compose(h))


@dataclass
class QIConstants:
    C1: Fraction
    C2: Fraction
    C1_exact: bool
    checked_pairs: int
    holds: bool

    def to_json(self) -> dict:
        from .linalg import format_rational

        return {"C1": format_rational(self.C1), "C2": format_rational(self.C2), "C1_exact": self.C1_exact,
                "checked_pairs": self.checked_pairs, "holds": self.holds}


def qi_constants(G: CrystGroup, radius: int) -> QIConstants:
    """``|ev g - ev h| <= C1 d(g, h) + C2`` with ``C1`` the largest generator displacement.

    The bound is re-checked on every pair of the ball in squared form.
    """
    disp = max((g.b.norm_squared() for g in G.generators), default=Fraction(0))
    C1, exact = sqrt_upper(disp)
    C2 = Fraction(0)
    ball = word_ball(G, radius)
    big = word_ball(G, 2 * radius)
    elems = list(ball)
    inverses = {g: g.inverse() for g in elems}
    holds, pairs = True, 0
    for g in elems:
        gi = inverses[g]
        for h in elems:
            d = big[gi.compose(h)]
            lhs = (g.b - h.b).norm_squared()
            rhs = C1 * d + C2
            pairs += 1
            if lhs > rhs * rhs:
                holds = False
    return QIConstants(C1, C2, exact, pairs, holds)


@dataclass
class ExpansiveMap:
    """``phi(M, b) = (M, L b + w_M)`` with claimed scale ``s``.

    ``cocycle`` maps point-group indices to vectors; missing entries are zero.
    """

    s: int
    L: IntMatrix
    cocycle: dict[int, RatVector]
    group: CrystGroup
    u: RatVector | None = None

    def __call__(self, g: AffineElement) -> AffineElement:
        idx = self.group.point_index(g.M)
        w = self.cocycle.get(idx)
        b = self.L @ g.b
        return AffineElement(g.M, b + w if w is not None else b)

    def generator_images(self) -> list[AffineElement]:
        return [self(g) for g in self.group.generators]

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "L": self.L.to_json(),
            "cocycle": {str(k): v.to_json() for k, v in sorted(self.cocycle.items())},
            "u": None if self.u is None else self.u.to_json(),
            "generator_images": [g.to_json() for g in self.generator_images()],
        }


def _targeted_u(G: CrystGroup, s: int, target: Sequence[AffineElement]) -> RatVector:
    minus = -IntMatrix.identity(G.n)
    translations = [g for g in target if g.is_translation()]
    reflections = sorted((g for g in target if g.M == minus), key=lambda g: g.b.entries)
    if len(translations) + len(reflections) != len(target):
        raise PreconditionFailed("target generators must be translations or of the form (-I, x)")

    def in_sA(v: RatVector) -> bool:
        return all(x.denominator == 1 and x.numerator % s == 0 for x in v)

    if not all(in_sA(g.b) for g in translations):
        raise PreconditionFailed("target meets A outside sA")
    if not reflections:
        return RatVector.zeros(G.n)
    u = reflections[0].b
    if not all(in_sA(g.b - u) for g in reflections[1:]):
        raise PreconditionFailed("target meets A outside sA")
    return u


def expansive_map(G: CrystGroup, s: int, target: Sequence[AffineElement] | None = None,
                  require_gate: bool = False) -> ExpansiveMap:
    """An ``s``-expansive endomorphism of ``G``.

    Without a target this is ``s`` on translations and the identity on the
    point group.  With a target (generators of a subgroup of ``Z^n x| {+-I}``
    meeting ``A`` inside ``sA``) it is ``phi_u``: ``x -> s x`` and ``t -> u t``,
    where ``u t`` is a reflection of the target, so the target lies in the image.
    """
    if not G.is_split:
        raise Unsupported("expansive maps are only constructed for split groups")
    if require_gate and (s - 1) % G.holonomy_order:
        raise GateFailed(f"s = {s} is not 1 mod |F| = {G.holonomy_order}")
    L = IntMatrix.identity(G.n).scale(s)
    if target is None:
        return ExpansiveMap(s, L, {}, G)
    minus = -IntMatrix.identity(G.n)
    if [m.data for m in G.point_group] != [IntMatrix.identity(G.n).data, minus.data]:
        raise Unsupported("targeted expansive maps need point group {I, -I}")
    u = _targeted_u(G, s, target)
    phi = ExpansiveMap(s, L, {1: u}, G, u=u)
    for g in target:
        if not in_image(phi, g):
            raise NoU("target is not contained in the image of phi_u")
    return phi


def conjugated_expansive_map(G: CrystGroup, s: int, w: Sequence) -> ExpansiveMap:
    """``phi(M, b) = (M, s b + (I - M) w)``; its image contains the complement ``w F w^-1``."""
    w = RatVector(w)
    ident = IntMatrix.identity(G.n)
    cocycle = {}
    for i, M in enumerate(G.point_group):
        c = (ident - M) @ w
        if any(x.denominator != 1 for x in c):
            raise ValueError("cocycle leaves the translation lattice")
        if any(c):
            cocycle[i] = c
    return ExpansiveMap(s, ident.scale(s), cocycle, G, u=w)


def in_image(phi: ExpansiveMap, g: AffineElement) -> AffineElement | None:
    """The preimage ``y`` with ``phi(y) = g`` (for ``L = s I``), or ``None``."""
    idx = phi.group.point_index(g.M)
    w = phi.cocycle.get(idx, RatVector.zeros(g.n))
    pre = [(x - c) / phi.s for x, c in zip(g.b, w)]
    if phi.L != IntMatrix.identity(g.n).scale(phi.s):
        raise Unsupported("preimages are computed for L = s I")
    if any(Fraction(x).denominator != 1 for x in pre):
        return None
    return AffineElement(g.M, RatVector(pre))


@dataclass
class ExpansiveCheck:
    ok: bool
    failures: list[str]
    checked: int

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "failures": self.failures[:20], "checked": self.checked}


def verify_expansive(phi: ExpansiveMap, G: CrystGroup, radius: int) -> ExpansiveCheck:
    """Check the expansive-map diagram on the ball of the given radius."""
    failures: list[str] = []
    ball = list(word_ball(G, radius))
    gens = symmetric_generators(G)
    checked = 0
    for g in ball:
        im = phi(g)
        checked += 1
        if im.M != g.M:
            failures.append(f"point part changed at {g.b.to_json()}")
        if g.is_translation() and im.b != g.b.scale(phi.s):
            failures.append(f"translation {g.b.to_json()} not multiplied by {phi.s}")
        if any(x.denominator != 1 for x in im.b):
            failures.append(f"image of {g.b.to_json()} leaves the group")
        for h in gens:
            if phi(g.compose(h)) != im.compose(phi(h)):
                failures.append(f"not multiplicative at {g.b.to_json()}")
    return ExpansiveCheck(not failures, failures, checked)


def equivariant_affine(phi: ExpansiveMap, G: CrystGroup, radius: int = 2) -> tuple[int, RatVector]:
    """Solve ``(I - M_g) u = v_phi(g) - s v_g`` over generators for ``a(x) = s x + u``."""
    n = G.n
    ident = IntMatrix.identity(n)
    if phi.L != ident.scale(phi.s):
        raise NoSolution("linear part on translations is not a scalar")
    rows, rhs = [], []
    for g in G.generators:
        A = ident - g.M
        b = phi(g).b - g.b.scale(phi.s)
        rows.extend(A.tolist())
        rhs.extend(b)
    u = solve_rational(rows, rhs) if rows else RatVector.zeros(n)
    samples = [RatVector.zeros(n)] + [RatVector([Fraction(i + 1, 3) if j == i else Fraction(-1, 2) for j in range(n)])
                                      for i in range(n)]
    for g in word_ball(G, radius):
        for x in samples:
            lhs = g.apply(x).scale(phi.s) + u
            rhs_ = phi(g).apply(x.scale(phi.s) + u)
            if lhs != rhs_:
                raise NoSolution("solution fails equivariance on the ball")
    return phi.s, u


def affine_is_equivariant(phi: ExpansiveMap, u: RatVector, elements: Iterable[AffineElement],
                          points: Iterable) -> bool:
    """``a(g x) = phi(g) a(x)`` for ``a(x) = s x + u`` on the given elements and points."""
    pts = [RatVector(p) for p in points]
    for g in elements:
        pg = phi(g)
        for x in pts:
            if g.apply(x).scale(phi.s) + u != pg.apply(x.scale(phi.s) + u):
                return False
    return True


def projection_hom_z2(p: int, C) -> tuple[int, int]:
    """``r(x, y) = a x + b y`` with ``ker(r mod p) = C`` and ``a^2 + b^2 <= 2p``.

    ``C`` is a generator of a nontrivial cyclic subgroup of ``(Z/p)^2``.  Among
    all admissible pairs the one minimizing ``(a^2 + b^2, -a, -b)`` is returned.
    """
    c = tuple(int(x) % p for x in C)
    if len(c) != 2 or c == (0, 0):
        raise PreconditionFailed("C must be a nontrivial subgroup of (Z/p)^2")
    bound = 2 * p
    m = isqrt(bound)
    best = None
    for a in range(-m, m + 1):
        for b in range(-m, m + 1):
            nrm = a * a + b * b
            if nrm > bound or (a % p == 0 and b % p == 0):
                continue
            if (a * c[0] + b * c[1]) % p:
                continue
            key = (nrm, -a, -b)
            if best is None or key < best:
                best = key
    if best is None:
        raise NotFound(f"no admissible homomorphism for p={p}, C={c}")
    return -best[1], -best[2]
