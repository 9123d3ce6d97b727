"""Exact integer and rational linear algebra.

Everything here works on Python ints and :class:`fractions.Fraction`, so no
entry can overflow.  Matrices are immutable row-major tuples.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd, prod
from typing import Iterable, Sequence

from sympy import factorint

from .errors import NoSolution, NotInvertibleMod


class IntMatrix:
    """Immutable integer matrix with arbitrary-precision entries."""

    __slots__ = ("rows", "cols", "_data")

    def __init__(self, entries: Iterable[Iterable[int]]):
        data = tuple(tuple(int(x) for x in row) for row in entries)
        cols = len(data[0]) if data else 0
        if any(len(row) != cols for row in data):
            raise ValueError("ragged matrix")
        self._data = data
        self.rows = len(data)
        self.cols = cols

    @classmethod
    def identity(cls, n: int) -> IntMatrix:
        return cls([[int(i == j) for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> IntMatrix:
        return cls([[0] * cols for _ in range(rows)])

    @classmethod
    def diagonal(cls, values: Sequence[int], rows: int | None = None, cols: int | None = None) -> IntMatrix:
        rows = len(values) if rows is None else rows
        cols = len(values) if cols is None else cols
        out = [[0] * cols for _ in range(rows)]
        for i, v in enumerate(values):
            out[i][i] = v
        return cls(out)

    @property
    def data(self) -> tuple[tuple[int, ...], ...]:
        return self._data

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def tolist(self) -> list[list[int]]:
        return [list(row) for row in self._data]

    def __getitem__(self, idx):
        i, j = idx
        return self._data[i][j]

    def row(self, i: int) -> tuple[int, ...]:
        return self._data[i]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(row[j] for row in self._data)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntMatrix) and self._data == other._data

    def __hash__(self) -> int:
        return hash(self._data)

    def __repr__(self) -> str:
        return f"IntMatrix({self.tolist()!r})"

    def __lt__(self, other: IntMatrix) -> bool:
        return self._data < other._data

    @property
    def T(self) -> IntMatrix:
        return IntMatrix(zip(*self._data)) if self.rows else IntMatrix.zeros(self.cols, 0)

    def __add__(self, other: IntMatrix) -> IntMatrix:
        self._check_shape(other)
        return IntMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self._data, other._data)])

    def __sub__(self, other: IntMatrix) -> IntMatrix:
        self._check_shape(other)
        return IntMatrix([[a - b for a, b in zip(r, s)] for r, s in zip(self._data, other._data)])

    def __neg__(self) -> IntMatrix:
        return IntMatrix([[-a for a in r] for r in self._data])

    def scale(self, k: int) -> IntMatrix:
        return IntMatrix([[k * a for a in r] for r in self._data])

    def _check_shape(self, other: IntMatrix) -> None:
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            if self.cols != other.rows:
                raise ValueError("shape mismatch")
            cols = list(zip(*other._data)) if other.rows else [()] * other.cols
            return IntMatrix([[sum(a * b for a, b in zip(r, c)) for c in cols] for r in self._data])
        vec = tuple(other.entries) if isinstance(other, RatVector) else tuple(other)
        if len(vec) != self.cols:
            raise ValueError("shape mismatch")
        out = tuple(sum(a * b for a, b in zip(r, vec)) for r in self._data)
        return RatVector(out) if isinstance(other, RatVector) else out

    def mod(self, s: int) -> IntMatrix:
        return IntMatrix([[a % s for a in r] for r in self._data])

    def mul_mod(self, other: IntMatrix, s: int) -> IntMatrix:
        return (self @ other).mod(s)

    def pow_mod(self, k: int, s: int) -> IntMatrix:
        """``self**k`` reduced mod ``s`` (``k >= 0``)."""
        self._require_square()
        result = IntMatrix.identity(self.rows).mod(s)
        base = self.mod(s)
        while k:
            if k & 1:
                result = result.mul_mod(base, s)
            base = base.mul_mod(base, s)
            k >>= 1
        return result

    def det(self) -> int:
        """Determinant by fraction-free Bareiss elimination."""
        self._require_square()
        n = self.rows
        if n == 0:
            return 1
        a = [list(r) for r in self._data]
        sign, prev = 1, 1
        for k in range(n - 1):
            if a[k][k] == 0:
                swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
                if swap is None:
                    return 0
                a[k], a[swap] = a[swap], a[k]
                sign = -sign
            for i in range(k + 1, n):
                for j in range(k + 1, n):
                    a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
            prev = a[k][k]
        return sign * a[n - 1][n - 1]

    def _require_square(self) -> None:
        if not self.is_square:
            raise ValueError("square matrix required")

    def to_json(self) -> list[list[str]]:
        return [[str(a) for a in r] for r in self._data]

    @classmethod
    def from_json(cls, payload) -> IntMatrix:
        return cls([[int(a) for a in r] for r in payload])


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, an integer, or a finite decimal string exactly."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    return Fraction(str(text).strip())


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


class RatVector:
    """Immutable vector of reduced fractions."""

    __slots__ = ("entries",)

    def __init__(self, entries: Iterable):
        self.entries = tuple(parse_rational(x) for x in entries)

    @classmethod
    def zeros(cls, n: int) -> RatVector:
        return cls([0] * n)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __eq__(self, other) -> bool:
        if isinstance(other, RatVector):
            return self.entries == other.entries
        if isinstance(other, (tuple, list)):
            return self.entries == tuple(Fraction(x) for x in other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.entries)

    def __repr__(self) -> str:
        return "RatVector([" + ", ".join(str(x) for x in self.entries) + "])"

    def __add__(self, other) -> RatVector:
        return RatVector(a + b for a, b in zip(self.entries, other))

    def __sub__(self, other) -> RatVector:
        return RatVector(a - b for a, b in zip(self.entries, other))

    def __neg__(self) -> RatVector:
        return RatVector(-a for a in self.entries)

    def scale(self, k) -> RatVector:
        return RatVector(k * a for a in self.entries)

    def norm_squared(self) -> Fraction:
        return sum((a * a for a in self.entries), Fraction(0))

    def to_json(self) -> list[str]:
        return [format_rational(a) for a in self.entries]

    @classmethod
    def from_json(cls, payload) -> RatVector:
        return cls(parse_rational(a) for a in payload)


@dataclass(frozen=True)
class FgAbelian:
    """Finitely generated abelian group ``Z/d1 + ... + Z/dk + Z^free_rank``."""

    invariant_factors: tuple[int, ...] = ()
    free_rank: int = 0

    def __post_init__(self):
        factors = tuple(int(d) for d in self.invariant_factors)
        if any(d < 2 for d in factors):
            raise ValueError("invariant factors must be >= 2")
        if any(b % a for a, b in zip(factors, factors[1:])):
            raise ValueError("invariant factors must form a divisibility chain")
        if self.free_rank < 0:
            raise ValueError("negative free rank")
        object.__setattr__(self, "invariant_factors", factors)

    @classmethod
    def from_diagonal(cls, diagonal: Iterable[int], extra_free: int = 0) -> FgAbelian:
        """Build from SNF diagonal entries of a relation matrix."""
        torsion, free = [], extra_free
        for d in diagonal:
            d = abs(d)
            if d == 0:
                free += 1
            elif d > 1:
                torsion.append(d)
        return cls(tuple(sorted(torsion)), free)

    @property
    def is_finite(self) -> bool:
        return self.free_rank == 0

    @property
    def is_trivial(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    def order(self) -> int | None:
        """Group order, or ``None`` when the group is infinite."""
        return prod(self.invariant_factors) if self.free_rank == 0 else None

    def exponent(self) -> int | None:
        if self.free_rank:
            return None
        return self.invariant_factors[-1] if self.invariant_factors else 1

    def __str__(self) -> str:
        parts = [f"Z/{d}" for d in self.invariant_factors]
        if self.free_rank:
            parts.append("Z" if self.free_rank == 1 else f"Z^{self.free_rank}")
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"invariant_factors": list(self.invariant_factors), "free_rank": self.free_rank}


def _as_rows(M) -> list[list[int]]:
    if isinstance(M, IntMatrix):
        return M.tolist()
    return [list(map(int, r)) for r in M]


def _smith_core(a: list[list[int]], m: int, n: int, track: bool):
    """In-place SNF of ``a``; returns (U, V) row/column transforms if tracked."""
    U = [[int(i == j) for j in range(m)] for i in range(m)] if track else None
    V = [[int(i == j) for j in range(n)] for i in range(n)] if track else None

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        if track:
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        if track:
            for row in V:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):
        # row_dst -= q * row_src
        rs, rd = a[src], a[dst]
        for k in range(n):
            if rs[k]:
                rd[k] -= q * rs[k]
        if track:
            us, ud = U[src], U[dst]
            for k in range(m):
                if us[k]:
                    ud[k] -= q * us[k]

    def add_col(dst, src, q):
        for row in a:
            if row[src]:
                row[dst] -= q * row[src]
        if track:
            for row in V:
                if row[src]:
                    row[dst] -= q * row[src]

    for t in range(min(m, n)):
        while True:
            best = None
            for i in range(t, m):
                row = a[i]
                for j in range(t, n):
                    x = row[j]
                    if x and (best is None or abs(x) < best[0]):
                        best = (abs(x), i, j)
                        if best[0] == 1:
                            break
                if best is not None and best[0] == 1:
                    break
            if best is None:
                return U, V
            _, pi, pj = best
            if pi != t:
                swap_rows(t, pi)
            if pj != t:
                swap_cols(t, pj)
            p = a[t][t]
            clean = True
            for i in range(t + 1, m):
                if a[i][t]:
                    add_row(i, t, a[i][t] // p)
                    if a[i][t]:
                        clean = False
            for j in range(t + 1, n):
                if a[t][j]:
                    add_col(j, t, a[t][j] // p)
                    if a[t][j]:
                        clean = False
            if not clean:
                continue
            bad = next(
                (i for i in range(t + 1, m) if any(a[i][j] % p for j in range(t + 1, n))),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, -1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            if track:
                U[t] = [-x for x in U[t]]
    return U, V


def smith_normal_form(M) -> tuple[IntMatrix, IntMatrix, IntMatrix]:
    """Return ``(U, D, V)`` with ``U @ M @ V == D`` and ``U``, ``V`` unimodular.

    Pivots are chosen as the entry of least nonzero absolute value in the
    active block, ties broken by row-major position, so the output is
    deterministic.
    """
    a = _as_rows(M)
    m = len(a)
    n = len(a[0]) if m else (M.cols if isinstance(M, IntMatrix) else 0)
    U, V = _smith_core(a, m, n, track=True)
    return IntMatrix(U) if m else IntMatrix([]), IntMatrix(a) if m else IntMatrix([]), IntMatrix(V) if n else IntMatrix([])


def smith_diagonal(M) -> list[int]:
    """Diagonal of the Smith normal form (length ``min(rows, cols)``)."""
    a = _as_rows(M)
    m = len(a)
    n = len(a[0]) if m else 0
    _smith_core(a, m, n, track=False)
    return [a[i][i] for i in range(min(m, n))]


def invariant_factors(M) -> tuple[int, ...]:
    """Invariant factors of ``M``: nonzero SNF diagonal entries (ones included)."""
    return tuple(d for d in smith_diagonal(M) if d)


def rank(M) -> int:
    return len(invariant_factors(M))


def cokernel(M) -> FgAbelian:
    """``Z^rows / (column span of M)``."""
    a = _as_rows(M)
    rows = len(a)
    diag = smith_diagonal(a) if rows else []
    return FgAbelian.from_diagonal(diag, extra_free=rows - len(diag))


def kernel_basis(M) -> IntMatrix:
    """Columns form a basis of the integer kernel of ``M`` (a saturated lattice)."""
    a = _as_rows(M)
    m = len(a)
    n = len(a[0]) if m else (M.cols if isinstance(M, IntMatrix) else 0)
    if m == 0:
        return IntMatrix.identity(n)
    _, D, V = smith_normal_form(a)
    r = sum(1 for i in range(min(m, n)) if D[i, i])
    cols = [V.column(j) for j in range(r, n)]
    return IntMatrix(zip(*cols)) if cols else IntMatrix([[] for _ in range(n)])


def _factor(s: int) -> dict[int, int]:
    return {int(p): int(k) for p, k in factorint(s).items()}


def matrix_order_mod(M: IntMatrix, s: int) -> int:
    """Least ``k >= 1`` with ``M**k == I`` mod ``s``."""
    if not isinstance(M, IntMatrix):
        M = IntMatrix(M)
    M._require_square()
    if s == 1:
        return 1
    if gcd(M.det(), s) != 1:
        raise NotInvertibleMod(f"det {M.det()} is not a unit mod {s}")
    ident = IntMatrix.identity(M.rows).mod(s)
    # the order divides |GL_n(Z/s)|; strip prime factors while possible
    order = gl_order(M.rows, s)
    for p, k in _factor(order).items():
        for _ in range(k):
            if M.pow_mod(order // p, s) == ident:
                order //= p
            else:
                break
    return order


def gl_order_prime_power(n: int, p: int, k: int) -> int:
    """``|GL_n(Z/p^k)| = p^((k-1) n^2) * prod_{i<n} (p^n - p^i)``."""
    return p ** ((k - 1) * n * n) * prod(p**n - p**i for i in range(n))


def gl_order(n: int, s: int) -> int:
    """``|GL_n(Z/s)|`` via the Chinese remainder theorem."""
    if n < 1 or s < 1:
        raise ValueError("need n >= 1 and s >= 1")
    return prod(gl_order_prime_power(n, p, k) for p, k in _factor(s).items())


def solve_rational(A, b) -> RatVector:
    """Exact solution of ``A x = b``; free coordinates are set to zero."""
    rows = [[Fraction(x) for x in r] for r in _as_rows(A)]
    rhs = [parse_rational(x) for x in b]
    m = len(rows)
    n = len(rows[0]) if m else (A.cols if isinstance(A, IntMatrix) else 0)
    if len(rhs) != m:
        raise ValueError("shape mismatch")
    aug = [r + [c] for r, c in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if aug[i][c] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        lead = aug[r][c]
        aug[r] = [x / lead for x in aug[r]]
        for i in range(m):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    if any(aug[i][n] != 0 for i in range(r, m)):
        raise NoSolution("inconsistent linear system")
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = aug[i][n]
    return RatVector(x)
