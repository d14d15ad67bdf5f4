"""Experiments on model manifolds: near-regular simplices, near-flags,
monotonicity of the median residual, and the normalized finite-subset net.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import orthogonal_procrustes

from .errors import CoincidentPoints, DegeneratePair, StageFailure, UnsupportedModel
from .manifolds import (
    geodesic_trace,
    median_residual,
    sample,
    space_of,
    subset_points,
)
from .metric import restrict
from .solver import SolverConfig, make_candidate, solve, verify_weak_le


def _pairwise(model, points) -> np.ndarray:
    return model.pairwise(points)


def simplex_quality(model, points) -> float:
    """``(max - min) / mean`` of the pairwise distances; 0 iff equidistant."""
    D = _pairwise(model, points)
    k = len(D)
    if k < 2:
        raise ValueError("need at least 2 points")
    d = D[np.triu_indices(k, 1)]
    mean = d.mean()
    if mean == 0.0:
        raise CoincidentPoints("all points coincide")
    return float((d.max() - d.min()) / mean)


def _flag_quality_from(D: np.ndarray, npairs: int) -> float:
    P = np.arange(0, 2 * npairs, 2)
    Q = P + 1
    worst = 0.0
    for i in range(1, npairs):
        for z in (P[i], Q[i]):
            worst = max(worst, float(np.abs(D[z, P[:i]] - D[z, Q[:i]]).max()))
    diam = D.max()
    return worst / diam


def _flag_points(pairs):
    pts = []
    for p, q in pairs:
        pts += [p, q]
    return pts


def flag_quality(model, pairs) -> float:
    """Largest violation of the flag equidistances, over the configuration diameter."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one pair")
    pts = _flag_points(pairs)
    if model.kind != "mesh":
        pts = np.array(pts, dtype=float)
    D = _pairwise(model, pts)
    for i in range(len(pairs)):
        if D[2 * i, 2 * i + 1] <= 1e-15 * model.diameter:
            raise DegeneratePair(f"pair {i} has coincident points")
    return _flag_quality_from(D, len(pairs))


@dataclass
class StructureSearchResult:
    kind: str
    size: int
    configuration: object
    quality: float
    restarts: int
    seed: int
    evaluations: int = 0
    qualities: list = field(default_factory=list)


def _objective(model, kind: str, size: int):
    def simplex(X):
        D = model.pairwise(model.from_params(X))
        d = D[np.triu_indices(size, 1)]
        m = d.mean()
        return math.inf if m == 0 else (d.max() - d.min()) / m

    def flag(X):
        D = model.pairwise(model.from_params(X))
        idx = np.arange(size)
        if np.any(D[2 * idx, 2 * idx + 1] <= 1e-15 * model.diameter):
            return math.inf
        return _flag_quality_from(D, size)

    return simplex if kind == "simplex" else flag


def pattern_search(f, x0: np.ndarray, step0: float, min_step: float, max_evals: int):
    """Compass search: try +/- step along each coordinate, halve the step on a failed sweep."""
    x = np.array(x0, dtype=float).ravel()
    fx = f(x)
    evals = 1
    step = step0
    while step >= min_step and evals < max_evals:
        improved = False
        for c in range(x.size):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[c] += sgn * step
                fy = f(y)
                evals += 1
                if fy < fx:
                    x, fx = y, fy
                    improved = True
                    break
        if not improved:
            step *= 0.5
    return x, fx, evals


def _one_restart(job):
    model, kind, size, child, step0, min_step, max_evals = job
    rng = np.random.default_rng(child)
    npts = size if kind == "simplex" else 2 * size
    x0 = model.to_params(model.sample(npts, rng))
    return pattern_search(_objective(model, kind, size), x0, step0, min_step, max_evals)


def best_structure(model, kind: str, size: int, restarts: int = 20, seed: int = 0,
                   min_step: float = 1e-11, max_evals: int = 20_000,
                   workers: int = 1) -> StructureSearchResult:
    """Multi-start pattern search for a near-regular simplex (``size`` = vertices)
    or a near-flag (``size`` = pairs) on a closed-form model."""
    if not getattr(model, "closed_form", False):
        raise UnsupportedModel("structure search runs on closed-form models only")
    if kind not in ("simplex", "flag"):
        raise ValueError(f"unknown structure kind {kind!r}")
    if kind == "simplex" and size < 2 or kind == "flag" and size < 1:
        raise ValueError("structure too small")
    step0 = 0.5 * model.diameter / model.chart_scale
    jobs = [(model, kind, size, child, step0, min_step, max_evals)
            for child in np.random.SeedSequence(seed).spawn(restarts)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_restart, jobs))
    else:
        results = [_one_restart(job) for job in jobs]
    best_x, best_q, total, qualities = None, math.inf, 0, []
    for x, q, ev in results:
        total += ev
        qualities.append(float(q))
        if q < best_q:
            best_x, best_q = x, q
    pts = model.from_params(best_x)
    config = pts if kind == "simplex" else [(pts[2 * i], pts[2 * i + 1]) for i in range(size)]
    # report the quality recomputed through the public function
    q = simplex_quality(model, pts) if kind == "simplex" else flag_quality(model, config)
    return StructureSearchResult(kind, size, config, q, restarts, seed, total, qualities)


# --- monotonicity of the median residual -----------------------------------

def residual_profile(model, p0, q0, p1, q1, m: int = 100) -> np.ndarray:
    """``median_residual(x, p0, q0)`` at ``m`` equally spaced points of the geodesic p1 -> q1."""
    d = model.distance(p1, q1)
    if d <= 1e-15 * model.diameter:
        raise DegeneratePair("p1 and q1 coincide")
    if model.distance(p0, q0) <= 1e-15 * model.diameter:
        raise DegeneratePair("p0 and q0 coincide")
    ts = np.linspace(0.0, d, m)
    ts[-1] = d
    return np.array([median_residual(model, geodesic_trace(model, p1, q1, t), p0, q0) for t in ts])


def _chart(model, z):
    """Normal-coordinate chart at ``z``: (to_chart, from_chart) in R^k."""
    if model.kind == "circle":
        return (lambda p: model.log(z, p)), (lambda v: model.exp(z, v))
    B = model.tangent_basis(z)
    return (lambda p: B @ model.log(z, p)), (lambda v: model.exp(z, np.asarray(v) @ B))


def _disc(rng, dim, r):
    g = rng.standard_normal(dim)
    g /= np.linalg.norm(g)
    return g * r * rng.random() ** (1.0 / dim)


def _rotate(u, phi):
    if u.size == 1:
        return u.copy()
    c, s = math.cos(phi), math.sin(phi)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])


def draw_configuration(model, r: float, angle_bound: float, rng):
    """p0, q0, p1, q1 in the radius-``r`` ball around a random center, with the
    chart direction of p1 -> q1 within ``angle_bound`` of p0 -> q0."""
    dim = 1 if model.kind == "circle" else 2
    z = model.sample(1, rng)[0]
    _, from_chart = _chart(model, z)
    while True:
        a, b = _disc(rng, dim, r), _disc(rng, dim, r)
        if np.linalg.norm(b - a) > 1e-3 * r:
            break
    u = (b - a) / np.linalg.norm(b - a)
    while True:
        c = _disc(rng, dim, r)
        phi = rng.uniform(-angle_bound, angle_bound) if angle_bound > 0 else 0.0
        e = c + rng.uniform(1e-2, 2.0) * r * _rotate(u, phi)
        if np.linalg.norm(e) <= r:
            break
    return tuple(from_chart(v) for v in (a, b, c, e))


def max_ball_radius(model) -> float:
    """Balls below this radius have all pairwise distances under the injectivity radius."""
    if model.kind == "torus":
        return float(model.periods.min()) / 4.0
    return model.diameter / 2.0


def monotonicity_experiment(model, r: float, angle_bound: float, samples: int = 1000,
                            m: int = 100, seed: int = 0) -> dict:
    """Fraction of configurations whose median residual is strictly monotone along p1 -> q1."""
    if not getattr(model, "closed_form", False):
        raise UnsupportedModel("monotonicity experiment needs a closed-form model")
    if not 0 < r < max_ball_radius(model):
        raise ValueError(f"scale {r} outside the unique-geodesic regime (< {max_ball_radius(model)})")
    monotone = 0
    min_increment = math.inf
    for child in np.random.SeedSequence(seed).spawn(samples):
        rng = np.random.default_rng(child)
        p0, q0, p1, q1 = draw_configuration(model, r, angle_bound, rng)
        steps = np.diff(residual_profile(model, p0, q0, p1, q1, m))
        if np.all(steps > 0) or np.all(steps < 0):
            monotone += 1
        min_increment = min(min_increment, float(np.abs(steps).min()))
    return {
        "samples": samples,
        "points_per_geodesic": m,
        "scale": r,
        "angle_bound": angle_bound,
        "seed": seed,
        "monotone": monotone,
        "monotone_fraction": monotone / samples,
        "min_increment": min_increment,
    }


# --- normalized net of finite-subset embeddings ----------------------------

def diameter_pair(coords, rel_tol: float = 1e-12):
    """Lexicographically smallest pair realizing the diameter (ties within rel_tol)."""
    x = np.asarray(coords, dtype=float)
    D = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    iu = np.triu_indices(len(x), 1)
    dmax = D[iu].max()
    for i, j in zip(*iu):
        if D[i, j] >= dmax * (1.0 - rel_tol):
            return int(i), int(j), float(D[i, j])


def normalize_to_unit_ball(coords) -> np.ndarray:
    """Scale to diameter 1 and move one end of the diameter to the origin."""
    x = np.array(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 2:
        raise CoincidentPoints("need at least two points")
    i, _, d = diameter_pair(x)
    if d == 0.0:
        raise CoincidentPoints("all points coincide")
    return (x - x[i]) / d


def normalization_checks(y) -> dict:
    i, j, d = diameter_pair(y)
    norms = np.linalg.norm(y, axis=1)
    return {
        "diameter": d,
        "origin_index": i,
        "sphere_index": j,
        "origin_norm": float(norms[i]),
        "sphere_norm": float(norms[j]),
        "max_norm": float(norms.max()),
    }


def align(y, ref):
    """Rigid motion (orthogonal map plus translation) of ``y`` best matching ``ref``
    on their shared leading rows; returns the moved ``y``."""
    k = len(ref)
    a, b = y[:k], ref
    ca, cb = a.mean(0), b.mean(0)
    R, _ = orthogonal_procrustes(a - ca, b - cb)
    return (y - ca) @ R + cb


def net_limit_experiment(model, chain, N: int, config: SolverConfig = SolverConfig(),
                         seed: int = 0, points=None) -> dict:
    """Embed nested finite subsets F_1 < ... < F_m, normalize each, align to the previous stage.

    Drift is reported only; the limit statement is asymptotic.
    """
    chain = [int(c) for c in chain]
    if any(b <= a for a, b in zip(chain, chain[1:])) or chain[0] < 2:
        raise ValueError("chain sizes must be increasing and >= 2")
    if points is None:
        points, space = sample(model, chain[-1], seed)
    else:
        if len(points) < chain[-1]:
            raise ValueError("not enough points for the chain")
        points = subset_points(points, range(chain[-1]))
        space = space_of(model, points)
    report = {"chain": chain, "dim": N, "seed": seed, "solver_seed": config.rng_seed, "stages": []}
    prev = None
    last = None
    for k, nk in enumerate(chain):
        sub = restrict(space, range(nk))
        out = solve(sub, N, config)
        stage = {"stage": k, "points": nk, "verdict": out.verdict}
        if out.verdict != "Embedded":
            if out.report is not None:
                stage["dim_lower_bound"] = out.report.dim_lower_bound
            report["stages"].append(stage)
            report["failed_stage"] = k
            raise StageFailure(k, out, report)
        y = normalize_to_unit_ball(out.candidate.coords)
        stage["normalization"] = normalization_checks(y)
        if prev is None:
            aligned = y
            drift = np.zeros(nk)
        else:
            aligned = align(y, prev)
            drift = np.linalg.norm(aligned[: len(prev)] - prev, axis=1)
        stage["drift_max"] = float(drift.max())
        stage["drift_mean"] = float(drift.mean())
        stage["drift"] = drift.tolist()
        stage["coords"] = y.tolist()
        report["stages"].append(stage)
        prev = aligned
        last = (sub, y)
    sub, y = last
    report["final_weak_le"] = bool(verify_weak_le(sub, make_candidate(y)))
    return report
