"""Finite metric spaces: validation, distance classes, subspaces and text I/O.

Exact inputs (integers, rationals) are carried as ``fractions.Fraction`` in an
object array; everything else is ``float64``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AmbiguousClusteringError,
    AsymmetryError,
    EmptySubsetError,
    IndexOutOfRange,
    IndistinctPointsError,
    MetricError,
    NegativeDistanceError,
    NonzeroDiagonalError,
    ParseError,
    TriangleViolation,
)

TOL_METRIC = 1e-9
TOL_CLASS = 1e-9


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: np.ndarray
    exact: bool

    def __post_init__(self):
        self.dist.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.labels)

    def __len__(self):
        return self.n

    @property
    def diameter(self):
        if self.n < 2:
            return Fraction(0) if self.exact else 0.0
        return self.dist.max()

    def as_float(self) -> np.ndarray:
        return np.asarray(self.dist, dtype=float)

    def scaled(self, factor) -> "FiniteMetricSpace":
        if self.exact and isinstance(factor, (int, Fraction)):
            return FiniteMetricSpace(self.labels, self.dist * Fraction(factor), True)
        return FiniteMetricSpace(self.labels, self.as_float() * float(factor), False)

    def __eq__(self, other):
        if not isinstance(other, FiniteMetricSpace):
            return NotImplemented
        return (self.labels == other.labels and self.exact == other.exact
                and self.dist.shape == other.dist.shape
                and bool(np.all(self.dist == other.dist)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DistanceClassification:
    """Partition of the unordered pairs ``i < j`` into equal-distance blocks.

    ``class_of[i, j]`` is the block index of pair ``{i, j}`` (``-1`` on the
    diagonal); blocks are numbered by increasing representative value.
    """

    n: int
    classes: tuple[tuple[tuple[int, int], ...], ...]
    values: tuple
    class_of: np.ndarray = field(repr=False)
    exact: bool
    tol_class: float

    def __post_init__(self):
        self.class_of.flags.writeable = False

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def block_structure(self):
        return self.classes


def _is_exact_entry(x) -> bool:
    if isinstance(x, (bool, np.bool_)):
        return False
    return isinstance(x, (Rational, np.integer))


def _coerce(matrix):
    rows = [list(r) for r in matrix]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("distance matrix must be square")
    flat = [x for r in rows for x in r]
    if flat and all(_is_exact_entry(x) for x in flat):
        arr = np.empty((n, n), dtype=object)
        for i, r in enumerate(rows):
            for j, x in enumerate(r):
                arr[i, j] = Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x)
        return arr, True
    return np.array(rows, dtype=float).reshape(n, n), False


def find_violations(dist: np.ndarray, exact: bool, tol_metric: float = TOL_METRIC) -> list[MetricError]:
    """All axiom violations of ``dist``; empty when it is a metric."""
    n = dist.shape[0]
    tol = 0 if exact else tol_metric
    out: list[MetricError] = []
    for i in range(n):
        if dist[i, i] != 0:
            out.append(NonzeroDiagonalError(i))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(dist[i, j] - dist[j, i]) > tol:
                out.append(AsymmetryError(i, j))
            for a, b in ((i, j), (j, i)):
                if dist[a, b] < 0:
                    out.append(NegativeDistanceError(a, b))
            if dist[i, j] == 0 or dist[j, i] == 0:
                out.append(IndistinctPointsError(i, j))
    if exact:
        for i in range(n):
            for k in range(i + 1, n):
                for j in range(n):
                    if j != i and j != k and dist[i, k] > dist[i, j] + dist[j, k]:
                        out.append(TriangleViolation(i, k, j))
    else:
        d = np.asarray(dist, dtype=float)
        # excess[i, k, j] = d[i,k] - d[i,j] - d[j,k]; looped over j to keep memory O(n^2)
        for j in range(n):
            excess = d - d[:, j][:, None] - d[j, :][None, :]
            bad = np.argwhere(np.triu(excess > tol, 1))
            for i, k in bad:
                if j != i and j != k:
                    out.append(TriangleViolation(int(i), int(k), j))
    return out


def validate_metric(matrix, tol_metric: float = TOL_METRIC, labels: Sequence[str] | None = None) -> FiniteMetricSpace:
    """Build a :class:`FiniteMetricSpace`, raising on any axiom violation.

    The raised error is the first violation; ``err.violations`` lists all.
    """
    dist, exact = _coerce(matrix)
    n = dist.shape[0]
    if labels is None:
        labels = tuple(f"p{i}" for i in range(n))
    labels = tuple(str(s) for s in labels)
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} points")
    violations = find_violations(dist, exact, tol_metric)
    if violations:
        err = violations[0]
        err.violations = violations
        raise err
    return FiniteMetricSpace(labels, dist, exact)


def classify_distances(space: FiniteMetricSpace, tol_class: float = TOL_CLASS) -> DistanceClassification:
    """Group pairs into distance classes by the gap rule.

    Sorted distances are split wherever consecutive values differ by at least
    ``tol_class``. Exact spaces always use literal equality and ignore the
    tolerance.
    """
    if tol_class < 0:
        raise ValueError("tol_class must be >= 0")
    n = space.n
    iu, ju = np.triu_indices(n, 1)
    pairs = list(zip(iu.tolist(), ju.tolist()))
    vals = [space.dist[i, j] for i, j in pairs]
    order = sorted(range(len(pairs)), key=lambda t: (vals[t], pairs[t]))

    blocks: list[list[int]] = []
    for t in order:
        if blocks:
            prev = vals[blocks[-1][-1]]
            if space.exact or tol_class == 0:
                same = vals[t] == prev
            else:
                same = vals[t] - prev < tol_class
            if same:
                blocks[-1].append(t)
                continue
        blocks.append([t])

    values = []
    for b in blocks:
        if space.exact:
            values.append(vals[b[0]])
        else:
            bv = [vals[t] for t in b]
            if tol_class > 0 and max(bv) - min(bv) >= tol_class / 2:
                raise AmbiguousClusteringError(
                    f"class spread {max(bv) - min(bv):.3g} >= tol_class/2 around {bv[0]!r}")
            values.append(float(np.mean(bv)) if len(bv) > 1 else float(bv[0]))

    class_of = np.full((n, n), -1, dtype=np.int64)
    classes = []
    for c, b in enumerate(blocks):
        members = tuple(sorted(pairs[t] for t in b))
        classes.append(members)
        for i, j in members:
            class_of[i, j] = class_of[j, i] = c
    return DistanceClassification(n, tuple(classes), tuple(values), class_of,
                                  space.exact, 0.0 if space.exact else tol_class)


def restrict(space: FiniteMetricSpace, subset: Iterable[int]) -> FiniteMetricSpace:
    idx = [int(i) for i in subset]
    if not idx:
        raise EmptySubsetError("subset is empty")
    for i in idx:
        if not 0 <= i < space.n:
            raise IndexOutOfRange(f"index {i} out of range for {space.n} points")
    if len(set(idx)) != len(idx):
        raise ValueError("subset contains repeated indices")
    sub = space.dist[np.ix_(idx, idx)].copy()
    return FiniteMetricSpace(tuple(space.labels[i] for i in idx), sub, space.exact)


# --- text documents --------------------------------------------------------

def _format_entry(x, exact: bool) -> str:
    if exact:
        return str(x)
    return repr(float(x))


def dumps(space: FiniteMetricSpace, comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"points {space.n}")
    lines.append("labels " + " ".join(space.labels))
    for row in space.dist:
        lines.append(" ".join(_format_entry(x, space.exact) for x in row))
    return "\n".join(lines) + "\n"


def _parse_entry(tok: str, line: int, col: int):
    try:
        if any(c in tok for c in ".eEn"):
            return float(tok)
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad matrix entry {tok!r}", line=line, field=col) from None


def parse_document(text: str) -> tuple[tuple[str, ...], list[list]]:
    """Parse a metric-space document into labels and a raw matrix."""
    content = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].strip()
        if s:
            content.append((lineno, s.split()))
    if not content:
        raise ParseError("empty document")
    lineno, toks = content[0]
    if toks[0] != "points" or len(toks) != 2:
        raise ParseError("expected header 'points <n>'", line=lineno, field=1)
    try:
        n = int(toks[1])
    except ValueError:
        raise ParseError(f"bad point count {toks[1]!r}", line=lineno, field=2) from None
    if n < 1:
        raise ParseError("point count must be positive", line=lineno, field=2)
    if len(content) < 2 or content[1][1][0] != "labels":
        ln = content[1][0] if len(content) > 1 else lineno
        raise ParseError("expected 'labels ...' line", line=ln, field=1)
    lineno, toks = content[1]
    labels = tuple(toks[1:])
    if len(labels) != n:
        raise ParseError(f"expected {n} labels, got {len(labels)}", line=lineno)
    rows = content[2:]
    if len(rows) != n:
        ln = rows[-1][0] if rows else lineno
        raise ParseError(f"expected {n} matrix rows, got {len(rows)}", line=ln)
    matrix = []
    for lineno, toks in rows:
        if len(toks) != n:
            raise ParseError(f"expected {n} entries, got {len(toks)}", line=lineno)
        matrix.append([_parse_entry(t, lineno, c) for c, t in enumerate(toks, 1)])
    if any(isinstance(x, float) for r in matrix for x in r):
        matrix = [[float(x) for x in r] for r in matrix]
    return labels, matrix


def loads(text: str, tol_metric: float = TOL_METRIC) -> FiniteMetricSpace:
    labels, matrix = parse_document(text)
    return validate_metric(matrix, tol_metric, labels)


def read_space(path, tol_metric: float = TOL_METRIC) -> FiniteMetricSpace:
    return loads(Path(path).read_text(), tol_metric)


def write_space(space: FiniteMetricSpace, path, comments: Sequence[str] = ()) -> None:
    Path(path).write_text(dumps(space, comments))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def parse_point_cloud(text: str) -> tuple[tuple[str, ...], np.ndarray]:
    """CSV rows of coordinates, optionally with a leading label column and a header."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    rows = [[c.strip() for c in r] for r in rows if not r[0].lstrip().startswith("#")]
    if rows and not any(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ParseError("no points in CSV")
    labelled = not _is_number(rows[0][0])
    labels, coords = [], []
    width = None
    for lineno, r in enumerate(rows, 1):
        vals = r[1:] if labelled else r
        if width is None:
            width = len(vals)
        if len(vals) != width or width == 0:
            raise ParseError(f"expected {width} coordinates", line=lineno)
        try:
            coords.append([float(v) for v in vals])
        except ValueError:
            raise ParseError("non-numeric coordinate", line=lineno) from None
        labels.append(r[0] if labelled else f"p{lineno - 1}")
    return tuple(labels), np.array(coords)


def space_from_points(coords, labels=None, metric: str = "euclidean",
                      tol_metric: float = TOL_METRIC) -> FiniteMetricSpace:
    if metric != "euclidean":
        raise ValueError(f"unsupported metric {metric!r}")
    x = np.asarray(coords, dtype=float)
    diff = x[:, None, :] - x[None, :, :]
    return validate_metric(np.sqrt((diff ** 2).sum(-1)), tol_metric, labels)


def read_point_cloud(path, metric: str = "euclidean", tol_metric: float = TOL_METRIC) -> FiniteMetricSpace:
    labels, coords = parse_point_cloud(Path(path).read_text())
    return space_from_points(coords, labels, metric, tol_metric)
