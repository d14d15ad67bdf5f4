"""Numerical search for loose embeddings into R^N, and the two verifiers.

The objective works on squared image distances ``s_ij = |x_i - x_j|^2``::

    E = sum_c sum_{ij in c} (s_ij - m_c)^2                 # constant on classes
      + sum_k hinge(delta - (m_(k+1) - m_(k)))^2           # sorted class means apart
      + sum_ij hinge(delta - s_ij)^2                       # points apart

"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvalidDimension
from .metric import TOL_CLASS, DistanceClassification, FiniteMetricSpace, classify_distances
from .obstruction import DEFAULT_BUDGET, ObstructionReport, obstruct

log = logging.getLogger(__name__)

TOL_EQ_REL = 1e-9
TOL_SEP_REL = 1e-6


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 20
    max_iterations: int = 5000
    armijo: float = 1e-4
    shrink: float = 0.5
    grad_tol: float = 1e-10
    margin: float | None = None      # delta; derived from the class values when None
    rng_seed: int = 0
    tol_eq: float | None = None      # absolute; relative to image diameter when None
    tol_sep: float | None = None
    tol_class: float = TOL_CLASS
    budget: int = DEFAULT_BUDGET
    check_every: int = 10

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.margin is not None and self.margin <= 0:
            raise ValueError("margin must be > 0")


@dataclass(frozen=True, eq=False)
class EmbeddingCandidate:
    coords: np.ndarray
    tol_eq: float
    tol_sep: float

    def __post_init__(self):
        if not self.tol_eq < self.tol_sep:
            raise ValueError("need tol_eq < tol_sep")

    @property
    def N(self) -> int:
        return self.coords.shape[1]

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def image_diameter(coords) -> float:
    x = np.asarray(coords, dtype=float)
    if len(x) < 2:
        return 0.0
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def make_candidate(coords, tol_eq: float | None = None, tol_sep: float | None = None) -> EmbeddingCandidate:
    """Wrap coordinates; missing tolerances default to 1e-9 / 1e-6 of the image diameter."""
    x = np.array(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    diam = image_diameter(x) or 1.0
    if tol_eq is None:
        tol_eq = TOL_EQ_REL * diam
    if tol_sep is None:
        tol_sep = TOL_SEP_REL * diam
    return EmbeddingCandidate(x, tol_eq, tol_sep)


@dataclass(frozen=True)
class SolveOutcome:
    verdict: str                              # "Embedded" | "Obstructed" | "Inconclusive"
    candidate: EmbeddingCandidate | None = None
    report: ObstructionReport | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return {"Embedded": 0, "Obstructed": 3, "Inconclusive": 4}[self.verdict]


class _Problem:
    """Index arrays describing a classification, shared by penalty and gradient."""

    def __init__(self, classification: DistanceClassification):
        self.n = classification.n
        self.C = classification.num_classes
        pairs = [(i, j) for members in classification.classes for (i, j) in members]
        self.I = np.array([p[0] for p in pairs], dtype=np.intp)
        self.J = np.array([p[1] for p in pairs], dtype=np.intp)
        self.cidx = np.repeat(np.arange(self.C), [len(m) for m in classification.classes])
        self.sizes = np.array([len(m) for m in classification.classes], dtype=float)
        P = len(pairs)
        self.onehot = np.zeros((P, self.C))
        self.onehot[np.arange(P), self.cidx] = 1.0
        self.incidence = np.zeros((self.n, P))
        self.incidence[self.I, np.arange(P)] = 1.0
        self.incidence[self.J, np.arange(P)] = -1.0

    def energy(self, X, delta, with_grad=False):
        diff = X[:, self.I, :] - X[:, self.J, :]
        s = (diff ** 2).sum(-1)
        m = (s @ self.onehot) / self.sizes
        r = s - m[:, self.cidx]
        hi = np.maximum(0.0, delta - s)
        E = (r ** 2).sum(1) + (hi ** 2).sum(1)
        if self.C > 1:
            order = np.argsort(m, axis=1, kind="stable")
            ms = np.take_along_axis(m, order, axis=1)
            h = np.maximum(0.0, delta - np.diff(ms, axis=1))
            E = E + (h ** 2).sum(1)
        if not with_grad:
            return E
        w = 2.0 * r - 2.0 * hi
        if self.C > 1:
            gs = np.zeros_like(m)
            gs[:, :-1] += 2.0 * h
            gs[:, 1:] -= 2.0 * h
            gm = np.empty_like(m)
            np.put_along_axis(gm, order, gs, axis=1)
            w = w + (gm / self.sizes)[:, self.cidx]
        G = np.einsum("np,rpk->rnk", self.incidence, 2.0 * w[..., None] * diff)
        return E, G


def default_margin(classification: DistanceClassification) -> float:
    """Separation target delta for squared image distances.

    A quarter of the smallest squared gap between class values, and never
    below ``1e-4 * diameter**2`` so that a zero-penalty image also clears the
    default verification tolerances.
    """
    vals = [float(v) for v in classification.values]
    diam = max(vals) if vals else 1.0
    floor = 1e-4 * diam ** 2
    if len(vals) < 2:
        return max(1e-4, floor)
    gap = min(b - a for a, b in zip(vals, vals[1:]))
    return max(0.25 * gap ** 2, floor)


def penalty(coords, classification: DistanceClassification, delta: float) -> float:
    X = np.asarray(coords, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if classification.n < 2:
        return 0.0
    return float(_Problem(classification).energy(X[None], delta)[0])


def penalty_gradient(coords, classification: DistanceClassification, delta: float) -> np.ndarray:
    """Analytic gradient of :func:`penalty`, flattened to length ``n * N``."""
    X = np.asarray(coords, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if classification.n < 2:
        return np.zeros(X.size)
    _, G = _Problem(classification).energy(X[None], delta, with_grad=True)
    return G[0].ravel()


def _class_image_stats(dists: np.ndarray, classification: DistanceClassification):
    spreads, reps = [], []
    for members in classification.classes:
        idx = tuple(np.array(members).T)
        v = dists[idx]
        spreads.append(v.max() - v.min())
        reps.append(v.mean())
    return np.array(spreads), np.array(reps)


def _image_dists(candidate: EmbeddingCandidate, space: FiniteMetricSpace) -> np.ndarray:
    if candidate.n != space.n:
        raise DimensionMismatch(f"candidate has {candidate.n} points, space has {space.n}")
    x = candidate.coords
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def _points_separated(D: np.ndarray, tol_sep: float) -> bool:
    iu = np.triu_indices(len(D), 1)
    return bool(np.all(D[iu] > tol_sep))


def verify_loose_embedding(space: FiniteMetricSpace, candidate: EmbeddingCandidate,
                           classification: DistanceClassification | None = None) -> bool:
    """Equal source distances stay equal, unequal ones stay apart, points stay distinct."""
    D = _image_dists(candidate, space)
    if space.n < 2:
        return True
    if classification is None:
        classification = classify_distances(space)
    spreads, reps = _class_image_stats(D, classification)
    if np.any(spreads >= candidate.tol_eq):
        return False
    reps = np.sort(reps)
    if np.any(np.diff(reps) <= candidate.tol_sep):
        return False
    return _points_separated(D, candidate.tol_sep)


def verify_weak_le(space: FiniteMetricSpace, candidate: EmbeddingCandidate,
                   classification: DistanceClassification | None = None) -> bool:
    """Equal source distances stay equal and points stay distinct; nothing else."""
    D = _image_dists(candidate, space)
    if space.n < 2:
        return True
    if classification is None:
        classification = classify_distances(space)
    spreads, _ = _class_image_stats(D, classification)
    if np.any(spreads >= candidate.tol_eq):
        return False
    return _points_separated(D, candidate.tol_sep)


def random_starts(n: int, N: int, restarts: int, radius: float, seed: int) -> np.ndarray:
    """Uniform points in the radius ball of R^N, one child RNG per restart."""
    X = np.empty((restarts, n, N))
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(child)
        g = rng.standard_normal((n, N))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        X[r] = g * (radius * rng.random((n, 1)) ** (1.0 / N))
    return X


def descend(X0: np.ndarray, classification: DistanceClassification, delta: float,
            config: SolverConfig, first_only: bool = True):
    """Gradient descent with backtracking (Armijo) line search from each start.

    Starts run in index order; with ``first_only`` the loop stops at the first
    verified restart. Returns ``(X, E, verified, iterations)`` arrays covering
    the restarts actually run.
    """
    problem = _Problem(classification)
    args = (problem.I, problem.J, problem.cidx, problem.sizes, problem.C, float(delta),
            config.max_iterations, config.armijo, config.shrink, config.grad_tol,
            config.check_every, True,
            TOL_EQ_REL if config.tol_eq is None else config.tol_eq,
            TOL_SEP_REL if config.tol_sep is None else config.tol_sep,
            config.tol_eq is None, config.tol_sep is None)
    Xs, Es, oks, its = [], [], [], []
    for x0 in np.asarray(X0, dtype=float):
        x, E, ok, it = _kernels.descend_one(np.ascontiguousarray(x0), *args)
        Xs.append(x)
        Es.append(E)
        oks.append(ok)
        its.append(it)
        if ok and first_only:
            break
    return np.array(Xs), np.array(Es), np.array(oks, dtype=bool), np.array(its)


def solve(space: FiniteMetricSpace, N: int, config: SolverConfig = SolverConfig()) -> SolveOutcome:
    """Obstruction check first, then multi-start descent; never claims non-existence without a certificate."""
    if N <= 0:
        raise InvalidDimension(f"dimension must be >= 1, got {N}")
    classification = classify_distances(space, config.tol_class)
    report = obstruct(classification, config.budget)
    if report.dim_lower_bound > N:
        return SolveOutcome("Obstructed", report=report, diagnostics={"seed": config.rng_seed})
    if space.n == 1:
        cand = make_candidate(np.zeros((1, N)))
        return SolveOutcome("Embedded", cand, report, {"seed": config.rng_seed, "restart": 0})

    delta = config.margin if config.margin is not None else default_margin(classification)
    radius = float(max(classification.values))
    X0 = random_starts(space.n, N, config.restarts, radius, config.rng_seed)
    X, E, verified, iters = descend(X0, classification, delta, config)
    diag = {
        "seed": config.rng_seed,
        "restarts": config.restarts,
        "restarts_used": len(E),
        "delta": delta,
        "best_residual": float(E.min()),
    }
    if verified.any():
        r = int(np.flatnonzero(verified)[0])
        cand = make_candidate(X[r], config.tol_eq, config.tol_sep)
        assert verify_loose_embedding(space, cand, classification)
        diag.update(restart=r, residual=float(E[r]), iterations=int(iters[r]))
        return SolveOutcome("Embedded", cand, report, diag)
    log.debug("no restart verified; best residual %g", E.min())
    return SolveOutcome("Inconclusive", report=report, diagnostics=diag)


def outcome_to_dict(outcome: SolveOutcome, space: FiniteMetricSpace, tol_class: float = TOL_CLASS) -> dict:
    from .obstruction import certificate_to_dict

    out = {"verdict": outcome.verdict, "diagnostics": outcome.diagnostics}
    if outcome.candidate is not None:
        c = outcome.candidate
        D = _image_dists(c, space)
        out["embedding"] = {
            "dim": c.N,
            "coords": c.coords.tolist(),
            "tol_eq": c.tol_eq,
            "tol_sep": c.tol_sep,
            "image_diameter": float(D.max()) if space.n > 1 else 0.0,
        }
    if outcome.report is not None:
        out["obstruction"] = certificate_to_dict(outcome.report, classify_distances(space, tol_class))
    return out
