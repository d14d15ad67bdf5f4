"""Exact detection of regular simplices and median-hyperplane flags.

Both searches work on the integer class matrix of a
:class:`~looseembed.metric.DistanceClassification`, with point sets held as
int bitmasks. Ties are broken toward the lexicographically smallest witness.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import IndexOutOfRange
from .metric import TOL_CLASS, DistanceClassification, FiniteMetricSpace

DEFAULT_BUDGET = 10**7


@dataclass(frozen=True)
class SimplexCertificate:
    vertices: tuple[int, ...]
    class_id: int | None

    @property
    def size(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class FlagCertificate:
    pairs: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.pairs)

    def points(self) -> tuple[int, ...]:
        return tuple(x for pq in self.pairs for x in pq)


@dataclass(frozen=True)
class ObstructionReport:
    best_simplex: SimplexCertificate
    best_flag: FlagCertificate
    dim_lower_bound: int
    budget_exhausted: bool = False
    nodes: int = 0


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _color_bound(mask: int, adj: list[int]) -> int:
    """Number of colors in a greedy coloring of ``mask``; bounds its clique number."""
    colors = 0
    uncolored = mask
    while uncolored:
        colors += 1
        avail = uncolored
        while avail:
            low = avail & -avail
            v = low.bit_length() - 1
            uncolored ^= low
            avail &= ~adj[v] & ~low
    return colors


def _max_clique(adj: list[int], n: int) -> list[int]:
    best: list[int] = []
    current: list[int] = []

    def expand(cand: int) -> None:
        nonlocal best
        if len(current) > len(best):
            best = current[:]
        if not cand or len(current) + _color_bound(cand, adj) <= len(best):
            return
        for v in _bits(cand):
            rest = cand >> v << v
            if len(current) + rest.bit_count() <= len(best):
                return
            current.append(v)
            expand(adj[v] & rest & ~(1 << v))
            current.pop()

    expand((1 << n) - 1)
    return best


def max_regular_simplex(classification: DistanceClassification) -> SimplexCertificate:
    """Largest vertex set whose pairwise distances all lie in one class."""
    n = classification.n
    best = SimplexCertificate((0,), None)
    for c, members in enumerate(classification.classes):
        if len(members) < best.size * (best.size - 1) // 2:
            continue
        adj = [0] * n
        for i, j in members:
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        clique = _max_clique(adj, n)
        if len(clique) > best.size:
            best = SimplexCertificate(tuple(clique), c)
    return best


class _BudgetExhausted(Exception):
    pass


def search_median_flag(classification: DistanceClassification, budget: int = DEFAULT_BUDGET):
    """Depth-first search for a longest flag.

    Returns ``(pairs, nodes, exhausted)``; when ``exhausted`` is true the pairs
    are only a lower bound on the optimum.
    """
    n = classification.n
    cls = classification.class_of.tolist()
    # eq[a][b]: points z with d(z, a) = d(z, b); never contains a or b
    eq = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            m = 0
            for z in range(n):
                if cls[z][a] == cls[z][b]:
                    m |= 1 << z
            eq[a][b] = eq[b][a] = m

    best: list[tuple[int, int]] = []
    seq: list[tuple[int, int]] = []
    nodes = 0

    def dfs(cand: int) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > budget:
            raise _BudgetExhausted
        if len(seq) > len(best):
            best = seq[:]
        if len(seq) + cand.bit_count() // 2 <= len(best):
            return
        for a in _bits(cand):
            for b in _bits(cand >> (a + 1) << (a + 1)):
                seq.append((a, b))
                dfs(cand & eq[a][b])
                seq.pop()

    exhausted = False
    try:
        dfs((1 << n) - 1)
    except _BudgetExhausted:
        exhausted = True
        nodes = budget
    return tuple(best), nodes, exhausted


def max_median_flag(classification: DistanceClassification, budget: int = DEFAULT_BUDGET) -> FlagCertificate:
    pairs, _, _ = search_median_flag(classification, budget)
    return FlagCertificate(pairs)


def dimension_lower_bound(simplex: SimplexCertificate, flag: FlagCertificate) -> int:
    """No loose embedding into R^N exists for N below this value.

    A regular simplex on k vertices needs k - 1 dimensions; an n-flag gives n
    pairwise orthogonal median-hyperplane normals in any loose image.
    """
    return max(simplex.size - 1, flag.length)


def obstruct(classification: DistanceClassification, budget: int = DEFAULT_BUDGET) -> ObstructionReport:
    simplex = max_regular_simplex(classification)
    pairs, nodes, exhausted = search_median_flag(classification, budget)
    flag = FlagCertificate(pairs)
    return ObstructionReport(simplex, flag, dimension_lower_bound(simplex, flag), exhausted, nodes)


def _equal(a, b, exact: bool, tol: float) -> bool:
    if exact:
        return a == b
    return abs(float(a) - float(b)) < tol


def verify_certificate(space: FiniteMetricSpace, certificate, tol: float = TOL_CLASS) -> bool:
    """Re-check a certificate directly against the distance matrix.

    Exact spaces are compared with rational arithmetic; float spaces with the
    absolute tolerance ``tol``.
    """
    d = space.dist
    if isinstance(certificate, SimplexCertificate):
        vs = certificate.vertices
        _check_indices(space, vs)
        if len(set(vs)) != len(vs):
            return False
        ds = [d[i, j] for k, i in enumerate(vs) for j in vs[k + 1:]]
        if any(x == 0 for x in ds):
            return False
        if not space.exact and ds:
            return max(ds) - min(ds) < tol
        return all(_equal(x, ds[0], space.exact, tol) for x in ds)

    pairs = certificate.pairs
    _check_indices(space, [x for pq in pairs for x in pq])
    for p, q in pairs:
        if d[p, q] == 0 or (not space.exact and d[p, q] < tol):
            return False
    for i, (pi, qi) in enumerate(pairs):
        for ps, qs in pairs[:i]:
            for z in (pi, qi):
                if not _equal(d[z, ps], d[z, qs], space.exact, tol):
                    return False
    pts = certificate.points()
    assert len(set(pts)) == len(pts), "accepted flag reuses a point"
    return True


def _check_indices(space: FiniteMetricSpace, idx) -> None:
    for i in idx:
        if not 0 <= int(i) < space.n:
            raise IndexOutOfRange(f"index {i} out of range for {space.n} points")


def certificate_to_dict(report: ObstructionReport, classification: DistanceClassification) -> dict:
    """Plain-data form of a report for the CLI."""
    def val(c):
        if c is None:
            return None
        v = classification.values[c]
        return str(v) if isinstance(v, Fraction) else float(v)

    return {
        "simplex": {
            "vertices": list(report.best_simplex.vertices),
            "size": report.best_simplex.size,
            "class_id": report.best_simplex.class_id,
            "class_value": val(report.best_simplex.class_id),
        },
        "flag": {
            "pairs": [list(pq) for pq in report.best_flag.pairs],
            "length": report.best_flag.length,
        },
        "dim_lower_bound": report.dim_lower_bound,
        "budget_exhausted": report.budget_exhausted,
        "nodes": report.nodes,
    }
