"""Group cohomology ``H^k(Q; A)`` for finite ``Q`` and for ``Q = Z``.

Finite groups use the normalized bar complex.  Torsion comes from the Smith
form of the incoming differential; ranks of the outgoing differential are
certified cheaply (see :func:`_certified_rank`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
import numpy as np

from .errors import InfiniteCohomology, TooLarge, Unsupported
from .linalg import FgAbelian, IntMatrix, cokernel, invariant_factors, kernel_basis, rank, solve_rational

MODULAR_PRIME = 2**31 - 1
DEFAULT_MAX_COCHAIN_DIM = 20000


@dataclass
class GModule:
    """``Z^n`` with an action of a finite group (multiplication table) or of ``Z``.

    For finite groups ``actions[g]`` is the matrix of every element ``g``; for
    ``Z`` the single matrix ``generator`` describes the action of ``1``.
    """

    n: int
    table: tuple[tuple[int, ...], ...] | None = None
    actions: tuple[IntMatrix, ...] = ()
    generator: IntMatrix | None = None
    kind: str = "finite"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "finite":
            if self.table is None:
                raise ValueError("finite module needs a multiplication table")
            q = len(self.table)
            if len(self.actions) != q:
                raise ValueError("one matrix per group element required")
            for a in range(q):
                for b in range(q):
                    if self.actions[a] @ self.actions[b] != self.actions[self.table[a][b]]:
                        raise ValueError("action is not a homomorphism on the table")
        elif self.kind == "Z":
            if self.generator is None or abs(self.generator.det()) != 1:
                raise ValueError("Z-module needs an invertible generator matrix")
        elif self.kind == "virtually-cyclic":
            pass
        else:
            raise ValueError(f"unknown group kind {self.kind!r}")

    @property
    def group_order(self) -> int | None:
        return len(self.table) if self.kind == "finite" else None

    @classmethod
    def from_generators(cls, table, gen_actions: dict[int, IntMatrix], n: int | None = None) -> GModule:
        """Extend an action given on generators to every element of the table."""
        table = tuple(tuple(int(x) for x in r) for r in table)
        gen_actions = {int(g): (m if isinstance(m, IntMatrix) else IntMatrix(m)) for g, m in gen_actions.items()}
        if n is None:
            n = next(iter(gen_actions.values())).rows if gen_actions else 0
        acts: dict[int, IntMatrix] = {0: IntMatrix.identity(n)}
        frontier = [0]
        while frontier:
            nxt = []
            for x in frontier:
                for g, m in sorted(gen_actions.items()):
                    y = table[x][g]
                    if y not in acts:
                        acts[y] = acts[x] @ m
                        nxt.append(y)
            frontier = nxt
        if len(acts) != len(table):
            raise ValueError("generators do not generate the group")
        return cls(n, table, tuple(acts[i] for i in range(len(table))))

    @classmethod
    def cyclic(cls, m: int, T) -> GModule:
        """``Z/m`` acting through powers of ``T`` (``T^m`` must be ``I``)."""
        T = T if isinstance(T, IntMatrix) else IntMatrix(T)
        table = [[(a + b) % m for b in range(m)] for a in range(m)]
        powers = [IntMatrix.identity(T.rows)]
        for _ in range(m - 1):
            powers.append(powers[-1] @ T)
        if powers[-1] @ T != IntMatrix.identity(T.rows):
            raise ValueError(f"T^{m} is not the identity")
        mod = cls(T.rows, tuple(map(tuple, table)), tuple(powers))
        mod.meta["cyclic_generator"] = T
        return mod

    @classmethod
    def trivial_group(cls, n: int) -> GModule:
        return cls(n, ((0,),), (IntMatrix.identity(n),))

    @classmethod
    def infinite_cyclic(cls, T) -> GModule:
        T = T if isinstance(T, IntMatrix) else IntMatrix(T)
        return cls(T.rows, generator=T, kind="Z")

    @classmethod
    def from_json(cls, payload: dict) -> GModule:
        action = payload["action"]
        group = payload.get("group_table", payload.get("group"))
        if group == "Z":
            (mat,) = action.values()
            return cls.infinite_cyclic(IntMatrix(mat))
        if group in ("virtually-cyclic", "VCyc"):
            return cls(0, kind="virtually-cyclic")
        return cls.from_generators(group, {int(k): IntMatrix(v) for k, v in action.items()})


def _non_identity(q: int) -> list[int]:
    return list(range(1, q))


def bar_differential(mod: GModule, k: int) -> np.ndarray:
    """Matrix of ``d^k : C^k -> C^{k+1}`` on normalized cochains (int64).

    Columns are indexed by (k-tuple of non-identity elements, coordinate) and
    rows by ((k+1)-tuple, coordinate), both in lexicographic order.
    """
    q, n = mod.group_order, mod.n
    elems = _non_identity(q)
    m = q - 1
    table = mod.table
    acts = [np.array(a.tolist(), dtype=np.int64) for a in mod.actions]
    src = {t: i for i, t in enumerate(itertools.product(elems, repeat=k))}
    rows = m ** (k + 1)
    D = np.zeros((rows * n, len(src) * n), dtype=np.int64)
    eye = np.eye(n, dtype=np.int64)
    for r, tup in enumerate(itertools.product(elems, repeat=k + 1)):
        r0 = r * n

        def add(face, mat):
            c = src.get(face)
            if c is not None:
                D[r0:r0 + n, c * n:(c + 1) * n] += mat

        add(tup[1:], acts[tup[0]])
        for i in range(k):
            prod_ = table[tup[i]][tup[i + 1]]
            if prod_ == 0:
                continue  # degenerate face of a normalized cochain
            face = tup[:i] + (prod_,) + tup[i + 2:]
            add(face, eye if i % 2 else -eye)
        add(tup[:k], eye if (k + 1) % 2 == 0 else -eye)
    return D


def _rank_mod_p(A: np.ndarray, p: int = MODULAR_PRIME) -> int:
    """Rank over ``F_p`` by row echelon elimination (entries stay below ``2^62``)."""
    A = A % p
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(A[r:, c])[0]
        if len(nz) == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            A[[r, piv]] = A[[piv, r]]
        inv = pow(int(A[r, c]), p - 2, p)
        pivot_row = (A[r, c:] * inv) % p
        below = A[r + 1:, c]
        hit = np.nonzero(below)[0] + r + 1
        if len(hit):
            A[hit, c:] = (A[hit, c:] - (A[hit, c][:, None] * pivot_row[None, :]) % p) % p
        r += 1
    return r


def _gram(D: np.ndarray) -> np.ndarray:
    """``D^T D`` (or ``D D^T``, whichever is smaller), exactly."""
    X = D.T if D.shape[0] > D.shape[1] else D
    bound = int(np.abs(X).max()) ** 2 * X.shape[1]
    if bound < 2**52:
        Xf = X.astype(np.float64)
        return np.rint(Xf @ Xf.T).astype(np.int64)
    return X @ X.T


def _certified_rank(D: np.ndarray, upper: int) -> int:
    """Exact rank of an integer matrix known to have rank at most ``upper``.

    ``rank_p(D^T D) <= rank_Q(D^T D) = rank_Q(D) <= upper``; when the modular
    rank already reaches ``upper`` it is exact.  Otherwise fall back to exact
    integer elimination.
    """
    if D.size == 0 or upper == 0:
        return 0
    r = _rank_mod_p(_gram(D))
    if r == upper:
        return r
    return rank(D.tolist())


def _check_limits(mod: GModule, k: int, cap: int) -> None:
    dim = mod.n * (mod.group_order - 1) ** (k + 1)
    if dim > cap:
        raise TooLarge(f"cochain space of dimension {dim} exceeds {cap}", count=dim)


def cohomology(mod: GModule, k: int, cap: int = DEFAULT_MAX_COCHAIN_DIM) -> FgAbelian:
    """``H^k(Q; A)`` in invariant-factor form."""
    if k < 0:
        raise ValueError("degree must be non-negative")
    if mod.kind == "virtually-cyclic":
        raise Unsupported("cohomology of infinite non-cyclic groups is not computed")
    if mod.kind == "Z":
        return _cohomology_z(mod, k)
    n = mod.n
    if mod.group_order == 1:
        return FgAbelian((), n) if k == 0 else FgAbelian()
    _check_limits(mod, k, cap)
    out_d = bar_differential(mod, k)
    if k == 0:
        return FgAbelian((), n - rank(out_d.tolist()))
    in_d = bar_differential(mod, k - 1)
    if np.any(out_d @ in_d):
        raise AssertionError("bar differentials do not compose to zero")
    factors = invariant_factors(in_d.tolist())
    rank_in = len(factors)
    dim = out_d.shape[1]
    rank_out = _certified_rank(out_d, dim - rank_in)
    return FgAbelian.from_diagonal(factors, extra_free=dim - rank_out - rank_in)


def _cohomology_z(mod: GModule, k: int) -> FgAbelian:
    T = mod.generator
    n = T.rows
    delta = T - IntMatrix.identity(n)
    if k == 0:
        return FgAbelian((), n - rank(delta))
    if k == 1:
        return cokernel(delta)
    return FgAbelian()  # Z has cohomological dimension one


def _quotient_in_basis(K: IntMatrix, vectors: list[tuple[int, ...]]) -> FgAbelian:
    """``span(K) / span(vectors)`` where every vector lies in ``span(K)``."""
    d = K.cols
    if d == 0:
        return FgAbelian()
    coords = []
    for v in vectors:
        x = solve_rational(K, list(v))
        if any(c.denominator != 1 for c in x):
            raise AssertionError("vector outside the saturated sublattice")
        coords.append([int(c) for c in x])
    if not coords:
        return FgAbelian((), d)
    return cokernel(IntMatrix(list(zip(*coords))))


def cyclic_cohomology(m: int, T, k: int) -> FgAbelian:
    """Closed form for ``Z/m`` acting through ``T``.

    ``H^0 = A^Q``, ``H^{2i} = A^Q / N A`` and ``H^{2i+1} = ker N / (T - 1) A``
    with ``N = 1 + T + ... + T^{m-1}``.
    """
    T = T if isinstance(T, IntMatrix) else IntMatrix(T)
    n = T.rows
    I = IntMatrix.identity(n)
    N = IntMatrix.zeros(n, n)
    P = I
    for _ in range(m):
        N = N + P
        P = P @ T
    tm1 = T - I
    if k == 0:
        return FgAbelian((), kernel_basis(tm1).cols)
    if k % 2 == 0:
        return _quotient_in_basis(kernel_basis(tm1), [N.column(j) for j in range(n)])
    return _quotient_in_basis(kernel_basis(N), [tm1.column(j) for j in range(n)])


def check_annihilation(mod: GModule, k: int) -> bool:
    """True iff ``|Q|`` kills ``H^k(Q; A)``."""
    if mod.kind != "finite":
        raise Unsupported("annihilation is stated for finite groups")
    H = cohomology(mod, k)
    q = mod.group_order
    return H.free_rank == 0 and all(q % d == 0 for d in H.invariant_factors)


def splitting_modulus_gate(mod: GModule, s: int) -> bool:
    """True iff ``s = 1 mod |H^2(Q; A)|``."""
    if mod.kind == "virtually-cyclic":
        raise Unsupported("virtually cyclic groups are rejected by the gate")
    H = cohomology(mod, 2)
    if H.free_rank:
        raise InfiniteCohomology(f"H^2 = {H} is infinite")
    order = H.order()
    return (s - 1) % order == 0


def cohomology_report(mod: GModule, degrees=(0, 1, 2)) -> dict:
    out = {}
    for k in degrees:
        H = cohomology(mod, k)
        out[str(k)] = {"group": str(H), **H.to_json()}
    if mod.kind == "finite":
        out["annihilated"] = {str(k): check_annihilation(mod, k) for k in degrees if k >= 1}
        out["group_order"] = mod.group_order
    return out


__all__ = [
    "GModule",
    "bar_differential",
    "check_annihilation",
    "cohomology",
    "cohomology_report",
    "cyclic_cohomology",
    "splitting_modulus_gate",
]
