"""Finite simplicial complexes, l1 metrics, subdivision and nerve maps.

Distances use the convention that adjacent vertices are at distance 1, i.e.
half the sum of absolute barycentric differences inside a simplex.  The raw
sum (twice as large) is available as ``convention="raw"``.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Hashable, Iterable, Mapping, Sequence

from .errors import Disconnected, HypothesisFailed, NotCovered

CONVENTIONS = ("unit-edge", "raw")


def _scale(value: Fraction, convention: str) -> Fraction:
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    return value * 2 if convention == "raw" else value


class SimplicialComplex:
    """Abstract simplicial complex on hashable, sortable vertex ids."""

    def __init__(self, simplices: Iterable[Iterable[Hashable]] = ()):
        faces: set[tuple] = set()
        for s in simplices:
            s = tuple(sorted(set(s)))
            if not s:
                continue
            for k in range(1, len(s) + 1):
                faces.update(itertools.combinations(s, k))
        self.simplices: tuple[tuple, ...] = tuple(sorted(faces, key=lambda f: (len(f), f)))
        self._set = faces
        self.vertices: tuple = tuple(sorted(f[0] for f in faces if len(f) == 1))
        self._adj = None

    @property
    def dimension(self) -> int:
        return max((len(s) - 1 for s in self.simplices), default=-1)

    def __contains__(self, simplex) -> bool:
        return tuple(sorted(simplex)) in self._set

    def __len__(self) -> int:
        return len(self.simplices)

    def f_vector(self) -> list[int]:
        out = [0] * (self.dimension + 1)
        for s in self.simplices:
            out[len(s) - 1] += 1
        return out

    def adjacency(self) -> dict:
        if self._adj is None:
            adj = {v: set() for v in self.vertices}
            for s in self.simplices:
                if len(s) == 2:
                    adj[s[0]].add(s[1])
                    adj[s[1]].add(s[0])
            self._adj = adj
        return self._adj

    def to_json(self) -> dict:
        return {"simplices": [list(s) for s in self.simplices]}


@dataclass(frozen=True)
class ComplexPoint:
    """Point of a simplicial complex in barycentric coordinates."""

    weights: tuple[tuple[Hashable, Fraction], ...]

    @classmethod
    def of(cls, weights: Mapping) -> ComplexPoint:
        w = {k: Fraction(v) for k, v in weights.items() if Fraction(v) != 0}
        if any(v < 0 for v in w.values()) or sum(w.values()) != 1:
            raise ValueError("barycentric weights must be non-negative and sum to 1")
        return cls(tuple(sorted(w.items())))

    @classmethod
    def vertex(cls, v) -> ComplexPoint:
        return cls(((v, Fraction(1)),))

    def as_dict(self) -> dict:
        return dict(self.weights)

    @property
    def support(self) -> tuple:
        return tuple(k for k, _ in self.weights)


def _half_sum(x: Mapping, y: Mapping) -> Fraction:
    keys = set(x) | set(y)
    return sum((abs(x.get(k, 0) - y.get(k, 0)) for k in keys), Fraction(0)) / 2


def global_l1(x: ComplexPoint, y: ComplexPoint, convention: str = "unit-edge") -> Fraction:
    """Inclusion-invariant metric ``sum_v |x_v - y_v|`` (scaled by the convention)."""
    return _scale(_half_sum(x.as_dict(), y.as_dict()), convention)


def _graph_dist(K: SimplicialComplex, sources: dict, targets: dict) -> Fraction | None:
    """Multi-source shortest path with unit edges; ``sources``/``targets`` map vertex -> offset."""
    adj = K.adjacency()
    best = None
    dist: dict = {}
    heap = [(d, i, v) for i, (v, d) in enumerate(sorted(sources.items()))]
    heapq.heapify(heap)
    counter = len(heap)
    while heap:
        d, _, v = heapq.heappop(heap)
        if v in dist:
            continue
        dist[v] = d
        if v in targets:
            cand = d + targets[v]
            if best is None or cand < best:
                best = cand
        if best is not None and d >= best:
            break
        for w in sorted(adj[v]):
            if w not in dist:
                counter += 1
                heapq.heappush(heap, (d + 1, counter, w))
    return best


def l1_distance(K: SimplicialComplex, x: ComplexPoint, y: ComplexPoint,
                convention: str = "unit-edge") -> tuple[Fraction, bool]:
    """Path-metric distance and whether it is exact.

    Exact when the supports span a common simplex, and on complexes of
    dimension at most one.  Otherwise the value is the length of the best
    path through the 1-skeleton, an upper bound.
    """
    xs, ys = x.as_dict(), y.as_dict()
    for pt in (xs, ys):
        if tuple(sorted(pt)) not in K:
            raise ValueError("point support is not a simplex of the complex")
    union = tuple(sorted(set(xs) | set(ys)))
    if union in K:
        return _scale(_half_sum(xs, ys), convention), True
    # distance from a point to a vertex of its own simplex is 1 - weight
    sources = {v: 1 - w for v, w in xs.items()}
    targets = {v: 1 - w for v, w in ys.items()}
    d = _graph_dist(K, sources, targets)
    if d is None:
        raise Disconnected("points lie in different components")
    return _scale(d, convention), K.dimension <= 1


def barycentric_subdivide(K: SimplicialComplex) -> tuple[SimplicialComplex, dict]:
    """Barycentric subdivision; vertices of the result are simplices of ``K``.

    The returned map sends each new vertex to the simplex whose barycenter it is.
    """
    if not K.simplices:
        return SimplicialComplex(), {}
    chains = []
    maximal = [s for s in K.simplices if not any(set(s) < set(t) for t in K.simplices if len(t) == len(s) + 1)]
    for top in maximal:
        for perm in itertools.permutations(top):
            chains.append([tuple(sorted(perm[: k + 1])) for k in range(len(perm))])
    sub = SimplicialComplex(chains)
    return sub, {v: v for v in sub.vertices}


def to_subdivision(x: ComplexPoint) -> ComplexPoint:
    """Coordinates of ``x`` in the barycentric subdivision.

    With weights sorted decreasingly ``l_0 >= l_1 >= ...``, the face spanned by
    the first ``k + 1`` vertices gets weight ``(k + 1)(l_k - l_{k+1})``.
    """
    items = sorted(x.weights, key=lambda kv: (-kv[1], kv[0]))
    out: dict = {}
    for k in range(len(items)):
        nxt = items[k + 1][1] if k + 1 < len(items) else Fraction(0)
        w = (k + 1) * (items[k][1] - nxt)
        if w:
            out[tuple(sorted(v for v, _ in items[: k + 1]))] = w
    return ComplexPoint.of(out)


def _random_point(rng: random.Random, vertices: Sequence[int], max_support: int, denom: int) -> ComplexPoint:
    size = rng.randint(1, max_support)
    support = rng.sample(list(vertices), size)
    raw = [rng.randint(1, denom) for _ in support]
    total = sum(raw)
    return ComplexPoint.of({v: Fraction(r, total) for v, r in zip(support, raw)})


@dataclass
class DNEstimate:
    N: int
    estimate: Fraction
    samples: int
    witness: tuple | None
    consistent: bool

    def to_json(self) -> dict:
        return {"N": self.N, "estimate": f"{self.estimate.numerator}/{self.estimate.denominator}",
                "samples": self.samples, "consistent": self.consistent,
                "witness": None if self.witness is None else [
                    {str(k): str(v) for k, v in p.weights} for p in self.witness]}


def estimate_DN(N: int, sample_count: int, seed: int = 0, denom: int = 12) -> DNEstimate:
    """Empirical ``max d_X / d_X'`` over pairs in ``N``-faces of ``Delta_{2N+1}``.

    Both distances are the global l1 metric, on ``Delta_{2N+1}`` and on its
    barycentric subdivision; that metric is unchanged by passing to
    subcomplexes, so pairs in any ``N``-dimensional ``X`` are covered.
    """
    if N < 0 or N > 3:
        raise ValueError("N must be between 0 and 3")
    rng = random.Random(seed)
    vertices = list(range(2 * N + 2))
    pairs = [(ComplexPoint.vertex(0), ComplexPoint.vertex(1))]
    for _ in range(sample_count):
        pairs.append((_random_point(rng, vertices, N + 1, denom), _random_point(rng, vertices, N + 1, denom)))
    best, witness = Fraction(1), None
    ratios = []
    for x, y in pairs:
        dx = global_l1(x, y)
        if dx == 0:
            continue
        dsub = global_l1(to_subdivision(x), to_subdivision(y))
        r = dx / dsub
        ratios.append((dx, dsub))
        if r > best or witness is None:
            best, witness = max(best, r), (x, y)
    consistent = all(dx <= best * dsub for dx, dsub in ratios)
    return DNEstimate(N, best, len(pairs), witness, consistent)


# ---------------------------------------------------------------------------
# nerve maps for covers by open axis-aligned boxes


@dataclass(frozen=True)
class Box:
    """Open box ``prod (lo_i, hi_i)`` with rational corners."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    @classmethod
    def of(cls, lo: Sequence, hi: Sequence) -> Box:
        return cls(tuple(Fraction(x) for x in lo), tuple(Fraction(x) for x in hi))

    def margin(self, x: Sequence[Fraction]) -> Fraction:
        """Distance from ``x`` to the complement (zero outside)."""
        m = min(min(xi - a, b - xi) for xi, a, b in zip(x, self.lo, self.hi))
        return m if m > 0 else Fraction(0)

    def to_json(self) -> dict:
        return {"lo": [str(v) for v in self.lo], "hi": [str(v) for v in self.hi]}


def boxes_intersect(boxes: Sequence[Box]) -> bool:
    dim = len(boxes[0].lo)
    return all(max(b.lo[i] for b in boxes) < min(b.hi[i] for b in boxes) for i in range(dim))


def nerve(cover: Sequence[Box], max_size: int | None = None) -> SimplicialComplex:
    """Nerve of the cover, up to simplices with ``max_size`` vertices."""
    max_size = len(cover) if max_size is None else max_size
    simplices = []
    for k in range(1, max_size + 1):
        found = False
        for combo in itertools.combinations(range(len(cover)), k):
            if boxes_intersect([cover[i] for i in combo]):
                simplices.append(combo)
                found = True
        if not found:
            break
    return SimplicialComplex(simplices)


def nerve_map(cover: Sequence[Box], x: Sequence) -> ComplexPoint:
    """``beta(x)_W = a_W(x) / sum_W a_W(x)`` with ``a_W`` the margin of ``x`` in ``W``."""
    x = tuple(Fraction(v) for v in x)
    a = [b.margin(x) for b in cover]
    total = sum(a)
    if total == 0:
        raise NotCovered(f"point {[str(v) for v in x]} is not covered")
    pt = ComplexPoint.of({i: w / total for i, w in enumerate(a) if w})
    if not boxes_intersect([cover[i] for i in pt.support]):  # pragma: no cover - margins are positive inside
        raise AssertionError("support is not a nerve simplex")
    return pt


def grid_box_cover(lo: Fraction, hi: Fraction, cell: Fraction, margin: Fraction) -> list[Box]:
    """Open squares of side ``cell + 2 margin`` around a grid of cells covering ``[lo, hi]^2``."""
    lo, hi, cell, margin = map(Fraction, (lo, hi, cell, margin))
    boxes = []
    starts = []
    t = lo
    while t < hi:
        starts.append(t)
        t += cell
    for a in starts:
        for b in starts:
            boxes.append(Box.of((a - margin, b - margin), (a + cell + margin, b + cell + margin)))
    return boxes


@dataclass
class NerveReport:
    ok: bool
    dimension: int
    dimension_ok: bool
    containment_ok: bool
    containment_witness: list | None
    pairs_checked: int
    pairs_failed: int
    max_ratio_squared: Fraction | None
    bound: Fraction
    exact_pairs: int
    convention: str

    def to_json(self) -> dict:
        fr = lambda v: None if v is None else f"{v.numerator}/{v.denominator}"
        return {"ok": self.ok, "nerve_dimension": self.dimension, "dimension_ok": self.dimension_ok,
                "containment_ok": self.containment_ok, "containment_witness": self.containment_witness,
                "pairs_checked": self.pairs_checked, "pairs_failed": self.pairs_failed,
                "max_ratio_squared": fr(self.max_ratio_squared), "bound": fr(self.bound),
                "exact_pairs": self.exact_pairs, "convention": self.convention}


def check_ball_containment(cover: Sequence[Box], omega: Fraction, lo, hi, grid: int = 100):
    """Every grid point of ``[lo, hi]^2`` has its ``omega``-ball inside some box."""
    lo, hi, omega = Fraction(lo), Fraction(hi), Fraction(omega)
    step = (hi - lo) / (grid - 1)
    for i in range(grid):
        for j in range(grid):
            x = (lo + i * step, lo + j * step)
            if not any(b.margin(x) >= omega for b in cover):
                return False, [str(x[0]), str(x[1])]
    return True, None


def sample_close_pairs(lo, hi, radius: Fraction, count: int, seed: int = 0, denom: int = 1000):
    """Deterministic pairs ``(x, y)`` in ``[lo, hi]^2`` with ``|x - y| <= radius``."""
    rng = random.Random(seed)
    lo, hi, radius = Fraction(lo), Fraction(hi), Fraction(radius)
    width = hi - lo
    # offsets with |dx|, |dy| <= radius * 7/10 keep |x - y| <= radius
    r = radius * Fraction(7, 10)
    pairs = []
    while len(pairs) < count:
        x = (lo + width * Fraction(rng.randint(0, denom), denom), lo + width * Fraction(rng.randint(0, denom), denom))
        d = (r * Fraction(rng.randint(-denom, denom), denom), r * Fraction(rng.randint(-denom, denom), denom))
        y = (x[0] + d[0], x[1] + d[1])
        if all(lo <= c <= hi for c in y):
            pairs.append((x, y))
    return pairs


def check_nerve_contraction(cover: Sequence[Box], omega, N: int, pairs: Sequence, domain=(0, 10),
                            grid: int = 100, convention: str = "unit-edge") -> NerveReport:
    """``d(beta x, beta y) <= (64 N^2 / omega) d(x, y)`` for pairs with ``d <= omega / (8N)``.

    Raises :class:`HypothesisFailed` when some grid point has no ``omega``-ball
    inside a cover set.
    """
    omega = Fraction(omega)
    K = nerve(cover, N + 2)
    dim_ok = K.dimension <= N
    cont_ok, witness = check_ball_containment(cover, omega, domain[0], domain[1], grid)
    if not cont_ok:
        raise HypothesisFailed("omega-ball containment fails", witness=witness)
    const = Fraction(64 * N * N) / omega
    close = (omega / (8 * N)) ** 2
    checked = failed = exact = 0
    worst = None
    for x, y in pairs:
        d2 = sum((Fraction(a) - Fraction(b)) ** 2 for a, b in zip(x, y))
        if d2 > close:
            continue
        checked += 1
        bx, by = nerve_map(cover, x), nerve_map(cover, y)
        dist, is_exact = l1_distance(K, bx, by, convention)
        exact += is_exact
        if dist * dist > const * const * d2:
            failed += 1
        if d2:
            ratio = dist * dist / d2
            worst = ratio if worst is None or ratio > worst else worst
    ok = dim_ok and failed == 0
    return NerveReport(ok, K.dimension, dim_ok, cont_ok, witness, checked, failed, worst, const * const,
                       exact, convention)


# ---------------------------------------------------------------------------
# the cubical grid of R^n with one barycentric subdivision


def cube_simplex(x: Sequence[Fraction]) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
    """Cube corner, signs and coordinate order describing a simplex containing ``x``."""
    corner = tuple(floor(v) for v in x)
    centre = [c + Fraction(1, 2) for c in corner]
    signs = tuple(1 if v >= c else -1 for v, c in zip(x, centre))
    dist = [abs(v - c) for v, c in zip(x, centre)]
    order = tuple(sorted(range(len(x)), key=lambda i: (-dist[i], i)))
    return corner, signs, order


def cube_coordinates(x: Sequence[Fraction], simplex=None) -> dict[tuple[int, ...], Fraction]:
    """Barycentric coordinates of ``x`` in the subdivided cube grid.

    Vertices are barycenters of cube faces, keyed by twice their coordinates.
    ``simplex`` (from :func:`cube_simplex`) fixes the simplex; ``x`` must lie
    in its closure.
    """
    x = [Fraction(v) for v in x]
    corner, signs, order = simplex if simplex is not None else cube_simplex(x)
    n = len(x)
    centre = [c + Fraction(1, 2) for c in corner]
    d = [sg * (v - c) for v, c, sg in zip(x, centre, signs)]
    ranked = [d[i] for i in order] + [Fraction(0)]
    out: dict = {}
    # face with the j largest coordinates pinned to the corner on their sign side
    head = 1 - 2 * ranked[0]
    vert = tuple(2 * c + 1 for c in corner)
    if head:
        out[vert] = head
    for j in range(1, n + 1):
        w = 2 * (ranked[j - 1] - ranked[j])
        if w:
            key = list(vert)
            for i in order[:j]:
                key[i] = 2 * corner[i] + (2 if signs[i] > 0 else 0)
            out[tuple(key)] = out.get(tuple(key), 0) + w
    return out


def segment_l1_length(x: Sequence, y: Sequence, convention: str = "unit-edge") -> tuple[Fraction, bool]:
    """l1 length of the straight segment from ``x`` to ``y`` in the subdivided grid.

    The segment is cut where it changes simplex; inside each piece the length
    is the half-sum of barycentric changes.  The total bounds the path metric
    from above; the flag is true when the segment stays in one simplex.
    """
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    n = len(x)
    delta = [b - a for a, b in zip(x, y)]
    if not any(delta):
        return Fraction(0), True
    cuts = {Fraction(0), Fraction(1)}
    for i in range(n):
        if delta[i]:
            lo, hi = sorted((2 * x[i], 2 * y[i]))
            for k in range(floor(lo), floor(hi) + 1):
                t = (Fraction(k, 2) - x[i]) / delta[i]
                if 0 < t < 1:
                    cuts.add(t)
    cuts = sorted(cuts)
    refined = set(cuts)
    point = lambda t: [a + t * d for a, d in zip(x, delta)]
    for a, b in zip(cuts, cuts[1:]):
        corner, signs, _ = cube_simplex(point((a + b) / 2))
        centre = [c + Fraction(1, 2) for c in corner]
        # d_i(t) = sg_i (x_i + t delta_i - centre_i); ties d_i = d_j
        for i in range(n):
            for j in range(i + 1, n):
                ci = signs[i] * (x[i] - centre[i])
                cj = signs[j] * (x[j] - centre[j])
                si, sj = signs[i] * delta[i], signs[j] * delta[j]
                if si != sj:
                    t = (cj - ci) / (si - sj)
                    if a < t < b:
                        refined.add(t)
    pieces = sorted(refined)
    total = Fraction(0)
    for a, b in zip(pieces, pieces[1:]):
        simplex = cube_simplex(point((a + b) / 2))
        pa = cube_coordinates(point(a), simplex)
        pb = cube_coordinates(point(b), simplex)
        total += _half_sum(pa, pb)
    return _scale(total, convention), len(pieces) == 2
