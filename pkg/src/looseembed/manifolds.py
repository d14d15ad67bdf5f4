"""Model Riemannian manifolds with closed-form geodesic distance.

Point representations:

* ``Circle``      -- an angle ``theta`` (float)
* ``Sphere``      -- an ambient 3-vector of norm ``radius``
* ``FlatTorus``   -- ``(u, v)`` reduced modulo the periods
* ``TriangulatedMesh`` -- a :class:`MeshPoint` (face index, barycentric coords)

Distances on a mesh are shortest paths through the vertex graph, with a
straight segment inside the face for the first and last legs. That is an
upper bound on the surface geodesic, but an exact metric on the samples.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .errors import AmbiguousGeodesic, ModelMismatch, ParseError, UnsupportedModel
from .metric import FiniteMetricSpace, validate_metric

TWO_PI = 2.0 * math.pi
# pairs within this fraction of a half-period are treated as tied
TIE_TOL = 1e-12


def _wrap(delta, period):
    """Signed representative of ``delta`` in ``[-period/2, period/2)``."""
    return (np.asarray(delta) + period / 2.0) % period - period / 2.0


class Circle:
    kind = "circle"
    closed_form = True
    chart_dim = 1

    def __init__(self, radius: float = 1.0):
        if not radius > 0:
            raise ValueError("radius must be > 0")
        self.radius = float(radius)

    def __repr__(self):
        return f"Circle(radius={self.radius!r})"

    @property
    def diameter(self) -> float:
        return math.pi * self.radius

    def check(self, p) -> float:
        if np.ndim(p) != 0:
            raise ModelMismatch(f"circle point must be an angle, got shape {np.shape(p)}")
        return float(p)

    def check_many(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        if P.ndim != 1:
            raise ModelMismatch("circle points must be a 1-d array of angles")
        return P

    def distance(self, p, q) -> float:
        d = abs(self.check(p) - self.check(q)) % TWO_PI
        return self.radius * min(d, TWO_PI - d)

    def pairwise(self, P) -> np.ndarray:
        P = self.check_many(P)
        d = np.abs(P[:, None] - P[None, :]) % TWO_PI
        return self.radius * np.minimum(d, TWO_PI - d)

    def sample(self, n, rng) -> np.ndarray:
        return rng.uniform(0.0, TWO_PI, n)

    def _signed(self, p, q) -> float:
        delta = float(_wrap(self.check(q) - self.check(p), TWO_PI))
        if abs(abs(delta) - math.pi) <= TIE_TOL * math.pi:
            raise AmbiguousGeodesic("antipodal points on the circle")
        return delta

    def log(self, z, p) -> np.ndarray:
        """Signed arclength from ``z`` to ``p`` as a 1-vector."""
        return np.array([self.radius * self._signed(z, p)])

    def exp(self, z, v) -> float:
        return float((self.check(z) + float(np.ravel(v)[0]) / self.radius) % TWO_PI)

    def trace(self, p, q, t) -> float:
        delta = self._signed(p, q)
        return self.exp(p, [math.copysign(t, delta)])

    def to_params(self, P) -> np.ndarray:
        return self.check_many(P).reshape(-1, 1).copy()

    def from_params(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float).reshape(-1) % TWO_PI

    chart_scale = property(lambda self: self.radius)


class Sphere:
    kind = "sphere"
    closed_form = True
    chart_dim = 2

    def __init__(self, radius: float = 1.0):
        if not radius > 0:
            raise ValueError("radius must be > 0")
        self.radius = float(radius)

    def __repr__(self):
        return f"Sphere(radius={self.radius!r})"

    @property
    def diameter(self) -> float:
        return math.pi * self.radius

    def check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (3,):
            raise ModelMismatch(f"sphere point must be a 3-vector, got shape {p.shape}")
        if abs(np.linalg.norm(p) - self.radius) > 1e-9 * self.radius:
            raise ModelMismatch("sphere point is off the sphere")
        return p

    def check_many(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[1] != 3:
            raise ModelMismatch("sphere points must have shape (n, 3)")
        return P

    def point(self, v) -> np.ndarray:
        """Project a nonzero ambient vector onto the sphere."""
        v = np.asarray(v, dtype=float)
        return self.radius * v / np.linalg.norm(v)

    def distance(self, p, q) -> float:
        p, q = self.check(p), self.check(q)
        # atan2 form keeps full relative precision at small and near-antipodal angles
        return self.radius * math.atan2(np.linalg.norm(np.cross(p, q)), float(p @ q))

    def pairwise(self, P) -> np.ndarray:
        P = self.check_many(P)
        cross = np.linalg.norm(np.cross(P[:, None, :], P[None, :, :]), axis=-1)
        dot = P @ P.T
        D = self.radius * np.arctan2(cross, dot)
        np.fill_diagonal(D, 0.0)
        return D

    def sample(self, n, rng) -> np.ndarray:
        g = rng.standard_normal((n, 3))
        return self.radius * g / np.linalg.norm(g, axis=1, keepdims=True)

    def tangent_basis(self, z) -> np.ndarray:
        """Orthonormal basis (2, 3) of the tangent plane at ``z``."""
        n = self.check(z) / self.radius
        a = np.eye(3)[int(np.argmin(np.abs(n)))]
        e1 = a - (a @ n) * n
        e1 /= np.linalg.norm(e1)
        return np.array([e1, np.cross(n, e1)])

    def _direction(self, z, p):
        """Unit tangent at ``z`` toward ``p`` and the angle between them."""
        z, p = self.check(z), self.check(p)
        angle = math.atan2(np.linalg.norm(np.cross(z, p)), float(z @ p))
        if math.pi - angle <= 1e-9:
            raise AmbiguousGeodesic("antipodal points on the sphere")
        u = p - (z @ p) / self.radius ** 2 * z
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return np.zeros(3), 0.0
        return u / nu, angle

    def log(self, z, p) -> np.ndarray:
        """Tangent vector at ``z`` (ambient components) of length d(z, p) toward ``p``."""
        u, angle = self._direction(z, p)
        return self.radius * angle * u

    def exp(self, z, v) -> np.ndarray:
        z = self.check(z)
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return z.copy()
        a = nv / self.radius
        return math.cos(a) * z + self.radius * math.sin(a) * (v / nv)

    def trace(self, p, q, t) -> np.ndarray:
        u, _ = self._direction(p, q)
        return self.exp(p, t * u)

    def to_params(self, P) -> np.ndarray:
        P = self.check_many(P) / self.radius
        polar = np.arccos(np.clip(P[:, 2], -1.0, 1.0))
        azimuth = np.arctan2(P[:, 1], P[:, 0])
        return np.column_stack([polar, azimuth])

    def from_params(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        th, ph = X[:, 0], X[:, 1]
        return self.radius * np.column_stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    chart_scale = property(lambda self: self.radius)


class FlatTorus:
    kind = "torus"
    closed_form = True
    chart_dim = 2
    chart_scale = 1.0

    def __init__(self, a: float = 1.0, b: float = 1.0):
        if not (a > 0 and b > 0):
            raise ValueError("periods must be > 0")
        self.periods = np.array([float(a), float(b)])

    def __repr__(self):
        return f"FlatTorus(a={self.periods[0]!r}, b={self.periods[1]!r})"

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.periods / 2.0))

    def check(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape != (2,):
            raise ModelMismatch(f"torus point must be (u, v), got shape {p.shape}")
        return p % self.periods

    def check_many(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2:
            raise ModelMismatch("torus points must have shape (n, 2)")
        return P % self.periods

    def distance(self, p, q) -> float:
        diff = self.check(q) - self.check(p)
        offsets = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)]) * self.periods
        return float(np.sqrt(((diff + offsets) ** 2).sum(1)).min())

    def pairwise(self, P) -> np.ndarray:
        P = self.check_many(P)
        d = np.abs(P[:, None, :] - P[None, :, :])
        d = np.minimum(d, self.periods - d)
        return np.sqrt((d ** 2).sum(-1))

    def sample(self, n, rng) -> np.ndarray:
        return rng.uniform(0.0, 1.0, (n, 2)) * self.periods

    def log(self, z, p) -> np.ndarray:
        delta = _wrap(self.check(p) - self.check(z), self.periods)
        if np.any(np.abs(np.abs(delta) - self.periods / 2.0) <= TIE_TOL * self.periods):
            raise AmbiguousGeodesic("tied wrap on the torus")
        return delta

    def exp(self, z, v) -> np.ndarray:
        return (self.check(z) + np.asarray(v, dtype=float)) % self.periods

    def trace(self, p, q, t) -> np.ndarray:
        delta = self.log(p, q)
        nd = np.linalg.norm(delta)
        if nd == 0.0:
            return self.check(p)
        return self.exp(p, t * delta / nd)

    def tangent_basis(self, z) -> np.ndarray:
        return np.eye(2)

    def to_params(self, P) -> np.ndarray:
        return self.check_many(P).copy()

    def from_params(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float).reshape(-1, 2) % self.periods


class MeshPoint(NamedTuple):
    face: int
    bary: tuple[float, float, float]


class TriangulatedMesh:
    kind = "mesh"
    closed_form = False

    def __init__(self, vertices, faces):
        V = np.asarray(vertices, dtype=float)
        F = np.asarray(faces, dtype=np.intp)
        if V.ndim != 2 or F.ndim != 2 or F.shape[1] != 3 or len(F) == 0:
            raise ValueError("need (nv, d) vertices and (nf, 3) faces")
        if F.min() < 0 or F.max() >= len(V):
            raise ValueError("face references a missing vertex")
        self.vertices, self.faces = V, F
        self._validate()
        self.vertex_dist = dijkstra(self._graph(), directed=False)

    def __repr__(self):
        return f"TriangulatedMesh({len(self.vertices)} vertices, {len(self.faces)} faces)"

    def _validate(self):
        V, F = self.vertices, self.faces
        edge_faces: dict[tuple[int, int], int] = {}
        for f in F:
            if len(set(f.tolist())) != 3:
                raise ValueError(f"degenerate face {f.tolist()}")
            a, b, c = (np.linalg.norm(V[f[i]] - V[f[(i + 1) % 3]]) for i in range(3))
            if min(a, b, c) <= 0:
                raise ValueError("zero-length edge")
            if not (a < b + c and b < a + c and c < a + b):
                raise ValueError(f"face {f.tolist()} violates the triangle inequality")
            for i in range(3):
                e = tuple(sorted((int(f[i]), int(f[(i + 1) % 3]))))
                edge_faces[e] = edge_faces.get(e, 0) + 1
        if max(edge_faces.values()) > 2:
            raise ValueError("non-manifold edge shared by more than two faces")
        self.edges = np.array(sorted(edge_faces))
        used = np.unique(F)
        if len(used) != len(V):
            raise ValueError("mesh has unreferenced vertices")
        ncomp, _ = connected_components(self._graph(), directed=False)
        if ncomp != 1:
            raise ValueError("mesh is not connected")

    def _graph(self):
        E = self.edges
        w = np.linalg.norm(self.vertices[E[:, 0]] - self.vertices[E[:, 1]], axis=1)
        nv = len(self.vertices)
        return coo_matrix((w, (E[:, 0], E[:, 1])), shape=(nv, nv)).tocsr()

    @property
    def edge_lengths(self) -> np.ndarray:
        E = self.edges
        return np.linalg.norm(self.vertices[E[:, 0]] - self.vertices[E[:, 1]], axis=1)

    @property
    def diameter(self) -> float:
        return float(self.vertex_dist.max())

    def check(self, p) -> MeshPoint:
        if not isinstance(p, MeshPoint):
            try:
                p = MeshPoint(int(p[0]), tuple(float(x) for x in p[1]))
            except (TypeError, IndexError, ValueError):
                raise ModelMismatch("mesh point must be (face, (b0, b1, b2))") from None
        if not 0 <= p.face < len(self.faces) or len(p.bary) != 3:
            raise ModelMismatch("mesh point has a bad face index or barycentric triple")
        return p

    def check_many(self, P):
        return [self.check(p) for p in P]

    def vertex_point(self, v: int) -> MeshPoint:
        f = int(np.flatnonzero((self.faces == v).any(1))[0])
        bary = tuple(1.0 if x == v else 0.0 for x in self.faces[f])
        return MeshPoint(f, bary)

    def position(self, p) -> np.ndarray:
        p = self.check(p)
        return np.asarray(p.bary) @ self.vertices[self.faces[p.face]]

    def _legs(self, p):
        pos = self.position(p)
        corners = self.faces[p.face]
        return pos, corners, np.linalg.norm(self.vertices[corners] - pos, axis=1)

    def distance(self, p, q) -> float:
        p, q = self.check(p), self.check(q)
        xp, cp, lp = self._legs(p)
        xq, cq, lq = self._legs(q)
        via = (lp[:, None] + self.vertex_dist[np.ix_(cp, cq)] + lq[None, :]).min()
        if p.face == q.face:
            via = min(via, float(np.linalg.norm(xp - xq)))
        return float(via)

    def pairwise(self, P) -> np.ndarray:
        P = self.check_many(P)
        n = len(P)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = self.distance(P[i], P[j])
        return D

    def sample(self, n, rng):
        V, F = self.vertices, self.faces
        e1 = V[F[:, 1]] - V[F[:, 0]]
        e2 = V[F[:, 2]] - V[F[:, 0]]
        if V.shape[1] == 3:
            area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
        else:
            area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        faces = rng.choice(len(F), size=n, p=area / area.sum())
        r1 = np.sqrt(rng.random(n))
        r2 = rng.random(n)
        return [MeshPoint(int(f), (float(1 - a), float(a * (1 - b)), float(a * b)))
                for f, a, b in zip(faces, r1, r2)]

    def _unsupported(self, *_, **__):
        raise UnsupportedModel("operation needs a closed-form model; meshes support distances only")

    trace = log = exp = to_params = from_params = _unsupported

    @classmethod
    def icosahedron(cls, radius: float = 1.0) -> "TriangulatedMesh":
        t = (1.0 + math.sqrt(5.0)) / 2.0
        V = np.array([(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
                      (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)], float)
        V *= radius / np.linalg.norm(V[0])
        F = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
        return cls(V, F)

    @classmethod
    def grid(cls, nx: int = 4, ny: int = 4, dx: float = 1.0, dy: float = 1.0) -> "TriangulatedMesh":
        """Flat rectangular patch split into right triangles."""
        V = [(i * dx, j * dy, 0.0) for j in range(ny + 1) for i in range(nx + 1)]
        F = []
        for j in range(ny):
            for i in range(nx):
                a = j * (nx + 1) + i
                b, c, d = a + 1, a + nx + 1, a + nx + 2
                F += [(a, b, d), (a, d, c)]
        return cls(V, F)


def parse_mesh(text: str) -> TriangulatedMesh:
    """Indexed triangle text: ``v x y z`` lines and 1-based ``f i j k`` lines."""
    V, F = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.split("#", 1)[0].split()
        if not s:
            continue
        tag, rest = s[0], s[1:]
        try:
            if tag == "v":
                V.append([float(x) for x in rest])
            elif tag == "f":
                if len(rest) != 3:
                    raise ParseError("faces must be triangles", line=lineno)
                F.append([int(x.split("/")[0]) - 1 for x in rest])
            else:
                raise ParseError(f"unknown record {tag!r}", line=lineno, field=1)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), line=lineno) from None
    if not V or not F:
        raise ParseError("mesh needs vertices and faces")
    if len({len(v) for v in V}) != 1:
        raise ParseError("vertices have inconsistent dimension")
    try:
        return TriangulatedMesh(V, F)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def read_mesh(path) -> TriangulatedMesh:
    return parse_mesh(Path(path).read_text())


def dump_mesh(mesh: TriangulatedMesh) -> str:
    lines = ["v " + " ".join(repr(float(x)) for x in v) for v in mesh.vertices]
    lines += ["f " + " ".join(str(int(i) + 1) for i in f) for f in mesh.faces]
    return "\n".join(lines) + "\n"


# --- module-level oracle API -----------------------------------------------

def geodesic_distance(model, p, q) -> float:
    return model.distance(p, q)


def pairwise_distances(model, points) -> np.ndarray:
    return model.pairwise(points)


def geodesic_trace(model, p, q, t: float):
    """Point at arclength ``t`` along the minimizing geodesic from ``p`` to ``q``."""
    if not model.closed_form:
        raise UnsupportedModel("geodesic_trace needs a closed-form model")
    d = model.distance(p, q)
    if not -1e-12 * max(d, 1.0) <= t <= d + 1e-12 * max(d, 1.0):
        raise ValueError(f"t={t} outside [0, {d}]")
    return model.trace(p, q, t)


def squared_distance_eta(model, p, q) -> float:
    return model.distance(p, q) ** 2


def squared_distance_gradient(model, z, p) -> np.ndarray:
    """Gradient at ``z`` of ``x -> d(x, p)**2``: ``-2 d(z, p)`` times the unit tangent toward ``p``.

    Components are in the model's chart: arclength for the circle, ambient
    tangent-plane vectors for the sphere, the flat chart for the torus.
    """
    if not model.closed_form:
        raise UnsupportedModel("squared_distance_gradient needs a closed-form model")
    # log(z, p) is d(z, p) times the unit tangent toward p
    return -2.0 * np.atleast_1d(model.log(z, p))


def median_residual(model, x, p0, q0) -> float:
    """``d(x, p0)**2 - d(x, q0)**2``; zero exactly on the equidistant locus."""
    return model.distance(x, p0) ** 2 - model.distance(x, q0) ** 2


def sample(model, n: int, rng_seed: int):
    """``n`` uniform points and the induced metric space; redraws near-collisions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    thresh = 1e-9 * model.diameter
    pts = model.sample(n, rng)
    for _ in range(1000):
        D = model.pairwise(pts)
        iu = np.triu_indices(n, 1)
        close = sorted({int(j) for i, j, dij in zip(*iu, D[iu]) if dij < thresh})
        if not close:
            break
        fresh = model.sample(len(close), rng)
        if isinstance(pts, list):
            for k, j in enumerate(close):
                pts[j] = fresh[k]
        else:
            pts[close] = fresh
    else:
        raise RuntimeError("could not draw distinct points")
    labels = [f"p{i}" for i in range(n)]
    return pts, validate_metric(D, labels=labels)


def subset_points(points, idx):
    if isinstance(points, list):
        return [points[i] for i in idx]
    return np.asarray(points)[list(idx)]


def space_of(model, points, tol_metric: float = 1e-9) -> FiniteMetricSpace:
    D = model.pairwise(points)
    return validate_metric(D, tol_metric, labels=[f"p{i}" for i in range(len(D))])


def make_model(kind: str, radius: float = 1.0, periods=(1.0, 1.0), mesh_path=None):
    kind = kind.lower()
    if kind == "circle":
        return Circle(radius)
    if kind == "sphere":
        return Sphere(radius)
    if kind in ("torus", "flat-torus", "flattorus"):
        return FlatTorus(*periods)
    if kind == "mesh":
        if mesh_path is None:
            return TriangulatedMesh.icosahedron(radius)
        return read_mesh(mesh_path)
    raise ValueError(f"unknown model {kind!r}")


def model_to_dict(model) -> dict:
    if isinstance(model, (Circle, Sphere)):
        return {"model": model.kind, "radius": model.radius}
    if isinstance(model, FlatTorus):
        return {"model": "torus", "periods": model.periods.tolist()}
    return {"model": "mesh", "vertices": len(model.vertices), "faces": len(model.faces)}
