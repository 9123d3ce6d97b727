"""Finite semidirect products ``(Z/s)^n x| T`` and their subgroups.

``T`` is either a cyclic group ``Z/r`` acting through powers of one matrix, or
a small finite group given by a multiplication table and one matrix per
element.  Subgroups are stored structurally: the intersection ``B`` with the
abelian part (a lattice between ``sZ^n`` and ``Z^n`` in Hermite normal form),
the image ``P`` in ``T`` and a section ``q -> v_q`` modulo ``B``.  That form is
canonical, so it doubles as the dedup key; sorted element lists are
materialized only on request.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from math import gcd
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import TooLarge
from .linalg import IntMatrix
from .numtheory import divisors, p_part, prime_divisors

DEFAULT_MAX_ENUM = 10**6

Vec = tuple[int, ...]
Mat = tuple[tuple[int, ...], ...]


def max_enum() -> int:
    """Enumeration cap, overridable through ``FH_CERT_MAX_ENUM``."""
    raw = os.environ.get("FH_CERT_MAX_ENUM")
    return int(raw) if raw else DEFAULT_MAX_ENUM


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def _mat_vec(m: Mat, v: Sequence[int], s: int) -> Vec:
    return tuple(sum(a * b for a, b in zip(row, v)) % s for row in m)


def _mat_mul(a: Mat, b: Mat, s: int) -> Mat:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, c)) % s for c in cols) for row in a)


def _identity(n: int) -> Mat:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def _mat_pow(m: Mat, k: int, s: int) -> Mat:
    out, base = _identity(len(m)), m
    out = tuple(tuple(x % s for x in r) for r in out)
    while k:
        if k & 1:
            out = _mat_mul(out, base, s)
        base = _mat_mul(base, base, s)
        k >>= 1
    return out


def _mat_add(a: Mat, b: Mat, s: int) -> Mat:
    return tuple(tuple((x + y) % s for x, y in zip(r, t)) for r, t in zip(a, b))


def geometric_sum(m: Mat, k: int, s: int) -> tuple[Mat, Mat]:
    """Return ``(I + m + ... + m^(k-1), m^k)`` mod ``s`` in ``O(log k)`` products."""
    n = len(m)
    if k == 0:
        zero = tuple((0,) * n for _ in range(n))
        return zero, tuple(tuple(x % s for x in r) for r in _identity(n))
    if k % 2:
        total, power = geometric_sum(m, k - 1, s)
        # S_k = I + m S_{k-1}
        total = _mat_add(tuple(tuple(x % s for x in r) for r in _identity(n)), _mat_mul(m, total, s), s)
        return total, _mat_mul(m, power, s)
    half, power = geometric_sum(m, k // 2, s)
    return _mat_add(half, _mat_mul(power, half, s), s), _mat_mul(power, power, s)


def vector_order(v: Sequence[int], s: int) -> int:
    g = s
    for x in v:
        g = gcd(g, x)
    return s // g


# ---------------------------------------------------------------------------
# sublattices of Z^n containing sZ^n, i.e. subgroups of (Z/s)^n


class Lattice:
    """Subgroup of ``(Z/s)^n`` stored as the row HNF of its preimage in ``Z^n``.

    Rows are upper triangular with diagonal entries ``d_i | s`` and entries
    ``0 <= rows[i][j] < d_j`` above the diagonal.
    """

    __slots__ = ("n", "s", "rows", "_elements")

    def __init__(self, n: int, s: int, rows: Sequence[Sequence[int]]):
        self.n, self.s = n, s
        self.rows: Mat = tuple(tuple(int(x) for x in r) for r in rows)
        self._elements = None

    @classmethod
    def zero(cls, n: int, s: int) -> Lattice:
        return cls(n, s, [[s if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def full(cls, n: int, s: int) -> Lattice:
        return cls(n, s, _identity(n))

    @classmethod
    def from_generators(cls, n: int, s: int, gens: Iterable[Sequence[int]]) -> Lattice:
        rows = [[s if i == j else 0 for j in range(n)] for i in range(n)]
        for v in gens:
            v = [x % s for x in v]
            for i in range(n):
                if v[i] == 0:
                    continue
                h = rows[i]
                g, a, b = _egcd(h[i], v[i])
                hi, vi = h[i] // g, v[i] // g
                new = [(a * h[k] + b * v[k]) for k in range(n)]
                v = [(vi * h[k] - hi * v[k]) % s for k in range(n)]
                new = [0] * i + [g] + [x % s for x in new[i + 1:]]
                rows[i] = new
        for j in range(n):
            d = rows[j][j]
            for k in range(j):
                q = rows[k][j] // d
                if q:
                    rows[k] = [
                        x - q * y if m <= j else (x - q * y) % s
                        for m, (x, y) in enumerate(zip(rows[k], rows[j]))
                    ]
        return cls(n, s, rows)

    @property
    def diagonal(self) -> tuple[int, ...]:
        return tuple(self.rows[i][i] for i in range(self.n))

    def order(self) -> int:
        out = self.s**self.n
        for d in self.diagonal:
            out //= d
        return out

    def index(self) -> int:
        out = 1
        for d in self.diagonal:
            out *= d
        return out

    def is_zero(self) -> bool:
        return all(d == self.s for d in self.diagonal)

    def reduce(self, v: Sequence[int]) -> Vec:
        """Canonical representative of ``v`` in ``(Z/s)^n / self``."""
        s = self.s
        v = [x % s for x in v]
        for i, row in enumerate(self.rows):
            q = v[i] // row[i]
            if q:
                for k in range(i, self.n):
                    v[k] = (v[k] - q * row[k]) % s if k > i else v[k] - q * row[k]
        return tuple(v)

    def reduce_array(self, arr: np.ndarray) -> np.ndarray:
        """Row-wise :meth:`reduce` of an ``(m, n)`` integer array."""
        s = self.s
        v = np.mod(np.asarray(arr, dtype=np.int64), s)
        for i, row in enumerate(self.rows):
            q = v[:, i] // row[i]
            v -= q[:, None] * np.array(row, dtype=np.int64)[None, :]
            v[:, i + 1:] %= s
        return v

    def contains(self, v: Sequence[int]) -> bool:
        return not any(self.reduce(v))

    def contains_lattice(self, other: Lattice) -> bool:
        return all(self.contains(r) for r in other.rows)

    def is_invariant(self, m: Mat) -> bool:
        return all(self.contains(_mat_vec(m, r, self.s)) for r in self.rows)

    def generators(self) -> list[Vec]:
        """Rows that are nonzero mod ``s``."""
        return [tuple(x % self.s for x in r) for i, r in enumerate(self.rows) if r[i] != self.s]

    def elements(self) -> np.ndarray:
        """All elements as an ``(order, n)`` int64 array, in a fixed order."""
        if self._elements is None:
            s = self.s
            acc = np.zeros((1, self.n), dtype=np.int64)
            for i, row in enumerate(self.rows):
                mult = s // row[i]
                steps = (np.arange(mult, dtype=np.int64)[:, None] * np.array(row, dtype=np.int64)[None, :]) % s
                acc = ((acc[None, :, :] + steps[:, None, :]) % s).reshape(-1, self.n)
            self._elements = acc
        return self._elements

    def transversal(self) -> np.ndarray:
        """Canonical coset representatives of ``(Z/s)^n / self``: the box ``prod [0, d_i)``."""
        grids = np.meshgrid(*[np.arange(d, dtype=np.int64) for d in self.diagonal], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1) if self.n else np.zeros((1, 0), dtype=np.int64)

    def __eq__(self, other) -> bool:
        return isinstance(other, Lattice) and (self.n, self.s, self.rows) == (other.n, other.s, other.rows)

    def __hash__(self) -> int:
        return hash((self.n, self.s, self.rows))

    def __repr__(self) -> str:
        return f"Lattice(n={self.n}, s={self.s}, rows={self.rows})"


def all_lattices(n: int, s: int) -> list[Lattice]:
    """Every subgroup of ``(Z/s)^n``, enumerated over the HNF parameter space."""
    divs = divisors(s)
    out = []

    def contains_s_basis(rows) -> bool:
        for i in range(n):
            v = [s if k == i else 0 for k in range(n)]
            for k in range(n):
                if v[k] % rows[k][k]:
                    return False
                q = v[k] // rows[k][k]
                if q:
                    v = [a - q * b for a, b in zip(v, rows[k])]
        return True

    def rec(i: int, rows: list, diag: list):
        if i < 0:
            if contains_s_basis(rows):
                out.append(Lattice(n, s, rows))
            return
        for d in divs:
            ranges = [range(diag[j - i - 1]) for j in range(i + 1, n)]
            for tail in itertools.product(*ranges):
                row = [0] * i + [d] + list(tail)
                rec(i - 1, [row] + rows, [d] + diag)

    rec(n - 1, [], [])
    out.sort(key=lambda lat: lat.rows)
    return out


# ---------------------------------------------------------------------------
# top groups


class TopGroup:
    """Finite group acting on ``(Z/s)^n``; element ``0`` is the identity."""

    order: int
    s: int
    n: int

    def mul(self, a: int, b: int) -> int:
        raise NotImplementedError

    def inv(self, a: int) -> int:
        raise NotImplementedError

    def action(self, a: int) -> Mat:
        raise NotImplementedError

    def element_order(self, a: int) -> int:
        k, x = 1, a
        while x != 0:
            x = self.mul(x, a)
            k += 1
        return k

    def power(self, a: int, k: int) -> int:
        out, base = 0, a
        k %= self.element_order(a)
        while k:
            if k & 1:
                out = self.mul(out, base)
            base = self.mul(base, base)
            k >>= 1
        return out

    def closure(self, gens: Iterable[int]) -> tuple[int, ...]:
        gens = [g for g in gens if g != 0]
        seen = {0}
        frontier = [0]
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = self.mul(x, g)
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        return tuple(sorted(seen))

    def subgroups(self) -> list[tuple[int, ...]]:
        cyclic = sorted({self.closure([a]) for a in range(self.order)})
        found = set(cyclic)
        frontier = list(cyclic)
        while frontier:
            nxt = []
            for h in frontier:
                for c in cyclic:
                    if not set(c) <= set(h):
                        j = self.closure(list(h[1:]) + list(c[1:]))
                        if j not in found:
                            found.add(j)
                            nxt.append(j)
            frontier = nxt
        return sorted(found, key=lambda h: (len(h), h))

    def generating_set(self, elements: Sequence[int]) -> list[int]:
        """Greedy generating set of the subgroup with these elements."""
        key = tuple(sorted(elements))
        cache = self.__dict__.setdefault("_gen_cache", {})
        if key not in cache:
            gens: list[int] = []
            current = {0}
            for a in key:
                if a not in current:
                    gens.append(a)
                    current = set(self.closure(gens))
            cache[key] = gens
        return list(cache[key])

    def describe(self) -> dict:
        raise NotImplementedError


class CyclicTop(TopGroup):
    """``Z/r`` acting through ``j -> M^j``."""

    def __init__(self, r: int, M: Mat, s: int):
        self.order, self.r, self.s, self.n = r, r, s, len(M)
        self.M = tuple(tuple(x % s for x in row) for row in M)
        if _mat_pow(self.M, r, s) != tuple(tuple(x % s for x in row) for row in _identity(self.n)):
            raise ValueError(f"M^{r} is not the identity mod {s}")
        self._cache: dict[int, Mat] = {}

    def mul(self, a: int, b: int) -> int:
        return (a + b) % self.r

    def inv(self, a: int) -> int:
        return (-a) % self.r

    def action(self, a: int) -> Mat:
        m = self._cache.get(a)
        if m is None:
            m = _mat_pow(self.M, a, self.s)
            self._cache[a] = m
        return m

    def element_order(self, a: int) -> int:
        return self.r // gcd(a, self.r)

    def power(self, a: int, k: int) -> int:
        return (a * k) % self.r

    def closure(self, gens: Iterable[int]) -> tuple[int, ...]:
        g = self.r
        for x in gens:
            g = gcd(g, x)
        return tuple(range(0, self.r, g))

    def subgroups(self) -> list[tuple[int, ...]]:
        return sorted((tuple(range(0, self.r, d)) for d in divisors(self.r)), key=lambda h: (len(h), h))

    def generating_set(self, elements: Sequence[int]) -> list[int]:
        g = self.r
        for x in elements:
            g = gcd(g, x)
        return [] if g == self.r else [g]

    def describe(self) -> dict:
        return {"kind": "cyclic", "r": self.r, "M": [list(r) for r in self.M]}


class TableTop(TopGroup):
    """Finite group from a multiplication table, with one matrix per element."""

    def __init__(self, table: Sequence[Sequence[int]], actions: Sequence[Mat], s: int, labels: Sequence | None = None):
        self.table = tuple(tuple(int(x) for x in row) for row in table)
        self.order = len(self.table)
        self.s = s
        self.actions = tuple(tuple(tuple(x % s for x in row) for row in m) for m in actions)
        self.n = len(self.actions[0]) if self.actions else 0
        self.labels = list(labels) if labels is not None else None
        if any(self.table[0][a] != a or self.table[a][0] != a for a in range(self.order)):
            raise ValueError("element 0 must be the identity")
        self._inv = []
        for a in range(self.order):
            inv = [b for b in range(self.order) if self.table[a][b] == 0]
            if len(inv) != 1:
                raise ValueError("table is not a group")
            self._inv.append(inv[0])
        for a in range(self.order):
            for b in range(self.order):
                if _mat_mul(self.actions[a], self.actions[b], s) != self.actions[self.table[a][b]]:
                    raise ValueError("action is not a homomorphism")

    @classmethod
    def from_matrices(cls, mats: Sequence, s: int) -> TableTop:
        """Point group given by matrices (identity first), closed under product mod ``s``."""
        mats = [tuple(tuple(int(x) % s for x in row) for row in m) for m in mats]
        index = {m: i for i, m in enumerate(mats)}
        if len(index) != len(mats):
            raise ValueError("point group matrices are not distinct mod s")
        table = [[index[_mat_mul(a, b, s)] for b in mats] for a in mats]
        return cls(table, mats, s)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, a: int) -> int:
        return self._inv[a]

    def action(self, a: int) -> Mat:
        return self.actions[a]

    def describe(self) -> dict:
        out = {"kind": "table", "order": self.order, "table": [list(r) for r in self.table],
               "actions": [[list(r) for r in m] for m in self.actions]}
        if self.labels is not None:
            out["labels"] = self.labels
        return out


# ---------------------------------------------------------------------------
# the semidirect product


class GroupElement(NamedTuple):
    v: Vec
    top: int


class FiniteSemidirect:
    """``(Z/s)^n x| T`` with ``(v1, q1)(v2, q2) = (v1 + M_q1 v2, q1 q2)``."""

    def __init__(self, n: int, s: int, top: TopGroup):
        if top.s != s or top.n != n:
            raise ValueError("top group acts on a different module")
        self.n, self.s, self.top = n, s, top
        self._norm_cache: dict[int, Mat] = {}
        self._power_cache: dict[int, tuple[list[int], np.ndarray]] = {}
        self._arrays = None

    @classmethod
    def cyclic(cls, M, s: int, r: int) -> FiniteSemidirect:
        M = M.tolist() if isinstance(M, IntMatrix) else M
        return cls(len(M), s, CyclicTop(r, tuple(map(tuple, M)), s))

    @classmethod
    def abelian(cls, n: int, s: int) -> FiniteSemidirect:
        return cls.cyclic(_identity(n), s, 1)

    @classmethod
    def point_group(cls, mats, s: int) -> FiniteSemidirect:
        mats = [m.tolist() if isinstance(m, IntMatrix) else m for m in mats]
        top = TableTop.from_matrices(mats, s)
        return cls(top.n, s, top)

    @property
    def order(self) -> int:
        return self.s**self.n * self.top.order

    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.n, 0)

    def element(self, v: Sequence[int], top: int = 0) -> GroupElement:
        return GroupElement(tuple(int(x) % self.s for x in v), int(top) % self.top.order)

    def mul(self, g: GroupElement, h: GroupElement) -> GroupElement:
        s = self.s
        mv = _mat_vec(self.top.action(g.top), h.v, s)
        return GroupElement(tuple((a + b) % s for a, b in zip(g.v, mv)), self.top.mul(g.top, h.top))

    def inv(self, g: GroupElement) -> GroupElement:
        qi = self.top.inv(g.top)
        mv = _mat_vec(self.top.action(qi), g.v, self.s)
        return GroupElement(tuple((-x) % self.s for x in mv), qi)

    def conjugate(self, x: GroupElement, g: GroupElement) -> GroupElement:
        """``g x g^-1``."""
        return self.mul(self.mul(g, x), self.inv(g))

    def norm_matrix(self, q: int) -> Mat:
        """``N_q = sum_{i < ord q} M_q^i``; ``(v, q)^{ord q} = (N_q v, 1)``."""
        m = self._norm_cache.get(q)
        if m is None:
            m, _ = geometric_sum(self.top.action(q), self.top.element_order(q), self.s)
            self._norm_cache[q] = m
        return m

    def power_sums(self, q: int) -> tuple[list[int], np.ndarray]:
        """``([q^i], [S_i])`` for ``i < ord q`` with ``S_i = sum_{k<i} M_q^k``, so ``(x, q)^i = (S_i x, q^i)``."""
        hit = self._power_cache.get(q)
        if hit is None:
            n, s = self.n, self.s
            m = np.array(self.top.action(q), dtype=np.int64).reshape(n, n)
            k = self.top.element_order(q)
            tops, sums = [0], np.zeros((k, n, n), dtype=np.int64)
            power = np.eye(n, dtype=np.int64)
            for i in range(1, k):
                sums[i] = (sums[i - 1] + power) % s
                power = (m @ power) % s
                tops.append(self.top.mul(tops[-1], q))
            hit = (tops, sums)
            self._power_cache[q] = hit
        return hit

    def top_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Element orders of ``T`` and the stacked norm matrices ``N_q``."""
        if self._arrays is None:
            T = self.top
            orders = np.array([T.element_order(q) for q in range(T.order)], dtype=np.int64)
            norms = np.array([self.norm_matrix(q) for q in range(T.order)], dtype=np.int64).reshape(T.order, self.n, self.n)
            self._arrays = (orders, norms)
        return self._arrays

    def power(self, g: GroupElement, k: int) -> GroupElement:
        """Closed form ``(v, q)^k = (sum_{i<k} M_q^i v, q^k)`` for ``k >= 0``."""
        if k < 0:
            return self.power(self.inv(g), -k)
        total, _ = geometric_sum(self.top.action(g.top), k, self.s)
        return GroupElement(_mat_vec(total, g.v, self.s), self.top.power(g.top, k))

    def power_naive(self, g: GroupElement, k: int) -> GroupElement:
        if k < 0:
            return self.power_naive(self.inv(g), -k)
        out = self.identity()
        for _ in range(k):
            out = self.mul(out, g)
        return out

    def element_order(self, g: GroupElement) -> int:
        oq = self.top.element_order(g.top)
        return oq * vector_order(_mat_vec(self.norm_matrix(g.top), g.v, self.s), self.s)

    def elements(self) -> Iterable[GroupElement]:
        """All elements in lexicographic order of ``(v, top)``."""
        for v in itertools.product(range(self.s), repeat=self.n):
            for q in range(self.top.order):
                yield GroupElement(v, q)

    def describe(self) -> dict:
        return {"n": self.n, "s": self.s, "twist": self.top.describe(), "r": self.top.order}

    def __repr__(self) -> str:
        return f"FiniteSemidirect(n={self.n}, s={self.s}, top={self.top.describe()['kind']}, |T|={self.top.order})"


# ---------------------------------------------------------------------------
# subgroups


class Subgroup:
    """Structural subgroup ``H = {(v_q + b, q) : q in P, b in B}``.

    Only the section values at the canonical generators of ``P`` are needed
    to pin ``H`` down; the full section is derived lazily.
    """

    __slots__ = ("group", "lattice", "top", "_section", "_gen_section", "_array", "_gens", "_elements")

    def __init__(self, group: FiniteSemidirect, lattice: Lattice, top: Sequence[int],
                 section: dict[int, Vec] | None = None, gens=None, gen_section: dict[int, Vec] | None = None):
        self.group = group
        self.lattice = lattice
        self.top = tuple(sorted(top))
        pgens = group.top.generating_set(self.top)
        if section is not None:
            self._section = {q: lattice.reduce(section[q]) for q in self.top}
            self._gen_section = tuple(self._section[q] for q in pgens)
        else:
            self._section = None
            self._gen_section = tuple(lattice.reduce(gen_section[q]) for q in pgens)
        self._array = None
        self._gens = list(gens) if gens is not None else None
        self._elements = None

    @property
    def key(self):
        return (self.lattice.rows, self.top, self._gen_section)

    def sort_key(self):
        return (self.order(), self.key)

    def __eq__(self, other) -> bool:
        return isinstance(other, Subgroup) and self.group is other.group and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return f"Subgroup(order={self.order()}, |B|={self.lattice.order()}, P={self.top})"

    def order(self) -> int:
        return self.lattice.order() * len(self.top)

    def section_array(self) -> np.ndarray:
        """``(|P|, n)`` array of reduced section values, rows aligned with ``self.top``."""
        if self._array is None:
            G = self.group
            if self._section is not None:
                arr = np.array([self._section[q] for q in self.top], dtype=np.int64).reshape(len(self.top), G.n)
            else:
                pgens = G.top.generating_set(self.top)
                if not pgens:
                    arr = np.zeros((1, G.n), dtype=np.int64)
                elif len(pgens) == 1:
                    tops, sums = G.power_sums(pgens[0])
                    x = np.array(self._gen_section[0], dtype=np.int64)
                    vals = self.lattice.reduce_array((sums @ x) % G.s)
                    arr = vals[np.argsort(np.array(tops))]
                else:
                    H = closure(G, self.generators())
                    arr = H.section_array()
            self._array = arr
        return self._array

    @property
    def section(self) -> dict[int, Vec]:
        if self._section is None:
            arr = self.section_array()
            self._section = {q: tuple(int(x) for x in arr[i]) for i, q in enumerate(self.top)}
        return self._section

    def contains(self, g: GroupElement) -> bool:
        v = self.section.get(g.top)
        if v is None:
            return False
        return self.lattice.contains(tuple(a - b for a, b in zip(g.v, v)))

    def generators(self) -> list[GroupElement]:
        if self._gens is not None:
            return list(self._gens)
        G = self.group
        gens = [GroupElement(v, 0) for v in self.lattice.generators()]
        gens += [GroupElement(v, q) for q, v in zip(G.top.generating_set(self.top), self._gen_section)]
        return gens

    def element_array(self) -> np.ndarray:
        """``(|P|, |B|, n)`` array: entry ``[i, j]`` is ``v_{P[i]} + b_j``."""
        return (self.section_array()[:, None, :] + self.lattice.elements()[None, :, :]) % self.group.s

    def elements(self, cap: int | None = None) -> list[GroupElement]:
        """Sorted element list (lexicographic on ``(v, top)``)."""
        if self._elements is None:
            cap = max_enum() if cap is None else cap
            if self.order() > cap:
                raise TooLarge(f"subgroup of order {self.order()} exceeds cap {cap}", count=self.order())
            arr = self.element_array()
            out = []
            for i, q in enumerate(self.top):
                out.extend(GroupElement(tuple(int(x) for x in row), q) for row in arr[i])
            out.sort()
            self._elements = out
        return self._elements

    def intersection_with_abelian(self) -> Subgroup:
        return Subgroup(self.group, self.lattice, (0,), {0: (0,) * self.group.n})

    def image_in_top(self) -> tuple[int, ...]:
        return self.top

    def is_cyclic_top(self) -> bool:
        return isinstance(self.group.top, CyclicTop)

    def to_json(self) -> dict:
        out = self.group.describe()
        out["generators"] = [{"v": list(g.v), "top": g.top} for g in self.generators()]
        out["lattice"] = [list(r) for r in self.lattice.rows]
        out["image"] = list(self.top)
        out["order"] = self.order()
        return out


def closure(G: FiniteSemidirect, gens: Iterable[GroupElement]) -> Subgroup:
    """Subgroup generated by ``gens`` (Schreier generators give ``H cap A``)."""
    gens = [G.element(g.v, g.top) for g in gens]
    transversal = {0: G.identity()}
    order = [0]
    schreier: list[Vec] = []
    i = 0
    while i < len(order):
        q = order[i]
        i += 1
        x = transversal[q]
        for g in gens:
            y = G.mul(x, g)
            if y.top in transversal:
                z = transversal[y.top]
                schreier.append(tuple(a - b for a, b in zip(y.v, z.v)))
            else:
                transversal[y.top] = y
                order.append(y.top)
    lattice = Lattice.from_generators(G.n, G.s, schreier)
    return Subgroup(G, lattice, transversal.keys(), {q: e.v for q, e in transversal.items()}, gens=gens)


def subgroup_image_and_intersection(H: Subgroup) -> tuple[Subgroup, tuple[int, ...]]:
    """``(H cap A_s, pr(H))``; the image is returned as a sorted tuple of top elements."""
    return H.intersection_with_abelian(), H.image_in_top()


def element_power(G: FiniteSemidirect, g: GroupElement, k: int) -> GroupElement:
    return G.power(g, k)


# ---------------------------------------------------------------------------
# enumeration


def cyclic_powers(G: FiniteSemidirect, g: GroupElement) -> tuple[np.ndarray, np.ndarray]:
    """All powers ``g^i`` for ``i < ord g`` as ``(vectors, tops)`` arrays.

    With ``o = ord(q)`` and ``u = N_q v`` one has ``g^(a o + b) = (a u + S_b v, q^b)``.
    """
    tops, sums = G.power_sums(g.top)
    o = len(tops)
    v = np.array(g.v, dtype=np.int64)
    base = (sums @ v) % G.s
    u = np.array(_mat_vec(G.norm_matrix(g.top), g.v, G.s), dtype=np.int64)
    reps = G.element_order(g) // o
    vecs = (np.arange(reps, dtype=np.int64)[:, None, None] * u[None, None, :] + base[None, :, :]) % G.s
    return vecs.reshape(-1, G.n), np.tile(np.array(tops, dtype=np.int64), reps)


def element_index(G: FiniteSemidirect, vecs: np.ndarray, tops: np.ndarray) -> np.ndarray:
    """Position of elements in the lexicographic order of :meth:`FiniteSemidirect.elements`."""
    weights = np.array([G.s ** (G.n - 1 - i) for i in range(G.n)], dtype=np.int64)
    return (vecs @ weights) * G.top.order + tops


def iter_cyclic_generators(G: FiniteSemidirect, cap: int | None = None) -> Iterable[tuple[GroupElement, int]]:
    """Yield ``(g, ord g)`` once per cyclic subgroup, ``g`` its lexicographically least generator."""
    cap = max_enum() if cap is None else cap
    if G.order > cap:
        raise TooLarge(f"group of order {G.order} exceeds enumeration cap {cap}", count=G.order)
    seen = np.zeros(G.order, dtype=bool)
    T = G.top.order
    for idx in range(G.order):
        if seen[idx]:
            continue
        q, rest = idx % T, idx // T
        v = []
        for _ in range(G.n):
            v.append(rest % G.s)
            rest //= G.s
        g = GroupElement(tuple(reversed(v)), q)
        vecs, tops = cyclic_powers(G, g)
        k = len(tops)
        units = np.gcd(np.arange(k), k) == 1
        seen[element_index(G, vecs[units], tops[units])] = True
        yield g, k


def enumerate_cyclic_subgroups(G: FiniteSemidirect, cap: int | None = None) -> list[Subgroup]:
    """Every cyclic subgroup once, keyed by its lexicographically least generator."""
    return [closure(G, [g]) for g, _ in iter_cyclic_generators(G, cap)]


def _sections_for(G: FiniteSemidirect, lattice: Lattice, P: tuple[int, ...], budget: list[int]):
    """Yield every subgroup with intersection ``lattice`` and image ``P``."""
    top = G.top
    s = G.s
    gens = top.generating_set(P)
    lattice_gens = [GroupElement(v, 0) for v in lattice.generators()]
    if not gens:
        yield Subgroup(G, lattice, P, {0: (0,) * G.n})
        return
    reps = lattice.transversal()
    budget[0] -= len(reps) ** len(gens)
    if budget[0] < 0:
        raise TooLarge("structural subgroup enumeration exceeds the configured cap",
                       count=budget[1] - budget[0])
    if len(gens) == 1:
        # (x, q0) generates a complement to B over <q0> iff N_{q0} x lies in B
        q0 = gens[0]
        N = np.array(G.norm_matrix(q0), dtype=np.int64)
        images = lattice.reduce_array((reps @ N.T) % s)
        for idx in np.nonzero(~images.any(axis=1))[0]:
            yield Subgroup(G, lattice, P, gen_section={q0: tuple(int(a) for a in reps[idx])})
        return
    rep_tuples = [tuple(int(a) for a in r) for r in reps]
    for choice in itertools.product(rep_tuples, repeat=len(gens)):
        H = closure(G, lattice_gens + [GroupElement(x, q) for x, q in zip(choice, gens)])
        if H.lattice == lattice and H.top == P:
            yield H


def enumerate_subgroups(G: FiniteSemidirect, cap: int | None = None) -> list[Subgroup]:
    """All subgroups, via invariant sublattices and sections over top subgroups."""
    limit = max_enum() if cap is None else cap
    budget = [limit, limit]
    lattices = all_lattices(G.n, G.s)
    out = []
    for P in G.top.subgroups():
        pgens = G.top.generating_set(P)
        for lat in lattices:
            if not all(lat.is_invariant(G.top.action(q)) for q in pgens):
                continue
            out.extend(_sections_for(G, lat, P, budget))
    out.sort(key=Subgroup.sort_key)
    return out


@dataclass(frozen=True)
class HyperWitness:
    """``H`` is ``prime``-hyperelementary with normal cyclic ``cyclic`` of order prime to ``prime``."""

    prime: int
    cyclic: Subgroup
    generator: GroupElement

    def to_json(self) -> dict:
        return {"l": self.prime, "C_order": self.cyclic.order(),
                "C_generator": {"v": list(self.generator.v), "top": self.generator.top}}


@dataclass(frozen=True)
class Hyperelementary:
    subgroup: Subgroup
    witness: HyperWitness


def element_orders(H: Subgroup) -> tuple[np.ndarray, np.ndarray]:
    """Orders of all elements of ``H`` as a ``(|P|, |B|)`` array, plus the element array."""
    G = H.group
    s = G.s
    orders_t, norms = G.top_arrays()
    idx = np.array(H.top, dtype=np.int64)
    E = H.element_array()
    W = np.einsum("pij,pbj->pbi", norms[idx], E) % s
    g = np.gcd.reduce(W, axis=2) if G.n else np.zeros(W.shape[:2], dtype=np.int64)
    g = np.gcd(g, s)
    return orders_t[idx][:, None] * (s // g), E


def is_hyperelementary(H: Subgroup) -> HyperWitness | None:
    """Return a witness ``(l, C)`` or ``None``.

    ``H`` is ``l``-hyperelementary exactly when its ``l'``-elements form a
    cyclic subgroup, which then is the normal cyclic ``C`` with ``H/C`` an
    ``l``-group.  This is tested by counting ``l'``-elements and looking for
    one of order ``|H|_{l'}``.
    """
    G = H.group
    order = H.order()
    primes = prime_divisors(order) if order > 1 else [2]
    orders, E = element_orders(H)
    for l in primes:
        target = order // p_part(order, l)
        if int((orders % l != 0).sum()) != target:
            continue
        hits = np.argwhere(orders == target)
        if len(hits):
            i, j = hits[0]
            found = GroupElement(tuple(int(x) for x in E[i, j]), H.top[i])
            return HyperWitness(l, closure(G, [found]), found)
    return None


def enumerate_hyperelementary_subgroups(G: FiniteSemidirect, cap: int | None = None) -> list[Hyperelementary]:
    """All hyperelementary subgroups with witnesses, in canonical order."""
    out = []
    for H in enumerate_subgroups(G, cap):
        w = is_hyperelementary(H)
        if w is not None:
            out.append(Hyperelementary(H, w))
    return out


def sylow_subgroup(H: Subgroup, p: int) -> Subgroup:
    """A Sylow ``p``-subgroup of ``H`` (grown inside normalizers)."""
    G = H.group
    target = p_part(H.order(), p)
    P = closure(G, [])
    if target == 1:
        return P
    elements = H.elements()
    p_elements = [x for x in elements if p_part(G.element_order(x), p) == G.element_order(x)]
    while P.order() < target:
        gens = P.generators()
        for x in p_elements:
            if P.contains(x):
                continue
            if all(P.contains(G.conjugate(y, x)) for y in gens):
                P = closure(G, gens + [x])
                break
        else:  # pragma: no cover - impossible by Sylow theory
            raise RuntimeError("no p-element in the normalizer")
    return P


def conjugacy_classes(G: FiniteSemidirect, subgroups: Sequence[Subgroup]) -> list[dict]:
    """Group ``subgroups`` up to conjugacy, recording a conjugator for every member."""
    gens = [GroupElement(tuple(int(i == j) for j in range(G.n)), 0) for i in range(G.n)]
    gens += [GroupElement((0,) * G.n, q) for q in G.top.generating_set(range(G.top.order))]
    index = {H.key: H for H in subgroups}
    assigned: set = set()
    classes = []
    for H in subgroups:
        if H.key in assigned:
            continue
        members = {H.key: G.identity()}
        frontier = [(H, G.identity())]
        while frontier:
            nxt = []
            for K, c in frontier:
                for g in gens:
                    J = closure(G, [G.conjugate(x, g) for x in K.generators()])
                    if J.key not in members:
                        members[J.key] = G.mul(g, c)
                        nxt.append((J, G.mul(g, c)))
            frontier = nxt
        assigned.update(k for k in members if k in index)
        classes.append({"representative": H,
                        "members": [(index.get(k, k), c) for k, c in sorted(members.items())]})
    return classes
