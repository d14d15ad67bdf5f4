"""Exception hierarchy shared by all modules."""


class LooseEmbedError(Exception):
    pass


# --- metric validation -----------------------------------------------------

class MetricError(LooseEmbedError, ValueError):
    """A metric-space axiom is violated.

    ``validate_metric`` raises the first violation found and attaches the
    complete list as ``violations``.
    """

    violations: list = []


class AsymmetryError(MetricError):
    def __init__(self, i, j):
        self.i, self.j = i, j
        super().__init__(f"dist[{i}][{j}] != dist[{j}][{i}]")


class NegativeDistanceError(MetricError):
    def __init__(self, i, j):
        self.i, self.j = i, j
        super().__init__(f"dist[{i}][{j}] < 0")


class NonzeroDiagonalError(MetricError):
    def __init__(self, i):
        self.i = i
        super().__init__(f"dist[{i}][{i}] != 0")


class IndistinctPointsError(MetricError):
    def __init__(self, i, j):
        self.i, self.j = i, j
        super().__init__(f"points {i} and {j} are at distance 0")


class TriangleViolation(MetricError):
    """``dist[i][k] > dist[i][j] + dist[j][k]`` beyond tolerance."""

    def __init__(self, i, k, j):
        self.i, self.k, self.j = i, k, j
        super().__init__(f"d({i},{k}) > d({i},{j}) + d({j},{k})")

    @property
    def triple(self):
        return (self.i, self.k, self.j)


class AmbiguousClusteringError(LooseEmbedError, ValueError):
    pass


class EmptySubsetError(LooseEmbedError, ValueError):
    pass


class IndexOutOfRange(LooseEmbedError, IndexError):
    pass


class ParseError(LooseEmbedError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line, self.field = line, field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


# --- solver ----------------------------------------------------------------

class InvalidDimension(LooseEmbedError, ValueError):
    pass


class DimensionMismatch(LooseEmbedError, ValueError):
    pass


# --- manifolds -------------------------------------------------------------

class ModelMismatch(LooseEmbedError, ValueError):
    pass


class AmbiguousGeodesic(LooseEmbedError, ValueError):
    """Minimizing geodesic is not unique (antipodal or tied wrap)."""


class UnsupportedModel(LooseEmbedError, ValueError):
    pass


class DegeneratePair(LooseEmbedError, ValueError):
    pass


class CoincidentPoints(LooseEmbedError, ValueError):
    pass


class StageFailure(LooseEmbedError):
    """A net-limit stage did not embed; carries the stage index and outcome."""

    def __init__(self, stage, outcome, report=None):
        self.stage, self.outcome, self.report = stage, outcome, report
        super().__init__(f"stage {stage}: {outcome.verdict}")
