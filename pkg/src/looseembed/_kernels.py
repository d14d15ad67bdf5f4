"""Compiled inner loops for the embedding descent.

Mirrors ``solver._Problem.energy`` term for term; the test suite checks the
two agree.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def energy_grad(x, I, J, cidx, sizes, C, delta, G, want_grad):
    n, N = x.shape
    P = I.shape[0]
    s = np.empty(P)
    m = np.zeros(C)
    for p in range(P):
        acc = 0.0
        for k in range(N):
            t = x[I[p], k] - x[J[p], k]
            acc += t * t
        s[p] = acc
        m[cidx[p]] += acc
    for c in range(C):
        m[c] /= sizes[c]
    E = 0.0
    w = np.empty(P)
    for p in range(P):
        r = s[p] - m[cidx[p]]
        hi = delta - s[p]
        if hi < 0.0:
            hi = 0.0
        E += r * r + hi * hi
        w[p] = 2.0 * r - 2.0 * hi
    if C > 1:
        order = np.argsort(m, kind="mergesort")
        gm = np.zeros(C)
        for k in range(C - 1):
            a = order[k]
            b = order[k + 1]
            h = delta - (m[b] - m[a])
            if h > 0.0:
                E += h * h
                gm[a] += 2.0 * h
                gm[b] -= 2.0 * h
        for p in range(P):
            w[p] += gm[cidx[p]] / sizes[cidx[p]]
    if want_grad:
        G[:, :] = 0.0
        for p in range(P):
            for k in range(N):
                g = 2.0 * w[p] * (x[I[p], k] - x[J[p], k])
                G[I[p], k] += g
                G[J[p], k] -= g
    return E


@njit(cache=True)
def verified(x, I, J, cidx, sizes, C, tol_eq, tol_sep, rel_eq, rel_sep):
    """Loose-embedding check; a tolerance is relative to the image diameter when its flag is set."""
    P = I.shape[0]
    N = x.shape[1]
    d = np.empty(P)
    diam = 0.0
    for p in range(P):
        acc = 0.0
        for k in range(N):
            t = x[I[p], k] - x[J[p], k]
            acc += t * t
        d[p] = np.sqrt(acc)
        if d[p] > diam:
            diam = d[p]
    if diam == 0.0:
        diam = 1.0
    te = tol_eq * diam if rel_eq else tol_eq
    ts = tol_sep * diam if rel_sep else tol_sep
    lo = np.full(C, np.inf)
    hi = np.full(C, -np.inf)
    rep = np.zeros(C)
    for p in range(P):
        if d[p] <= ts:
            return False
        c = cidx[p]
        if d[p] < lo[c]:
            lo[c] = d[p]
        if d[p] > hi[c]:
            hi[c] = d[p]
        rep[c] += d[p]
    for c in range(C):
        if hi[c] - lo[c] >= te:
            return False
        rep[c] /= sizes[c]
    rep.sort()
    for c in range(C - 1):
        if rep[c + 1] - rep[c] <= ts:
            return False
    return True


@njit(cache=True)
def descend_one(x0, I, J, cidx, sizes, C, delta, max_iterations, armijo, shrink,
                grad_tol, check_every, check, tol_eq, tol_sep, rel_eq, rel_sep):
    """Gradient descent with backtracking for one start.

    Returns (x, E, verified, iterations).
    """
    x = x0.copy()
    G = np.empty_like(x)
    Gt = np.empty_like(x)
    E = energy_grad(x, I, J, cidx, sizes, C, delta, G, True)
    step = 1.0
    iters = 0
    for it in range(max_iterations + 1):
        if check and (it % check_every == 0 or it == max_iterations):
            if verified(x, I, J, cidx, sizes, C, tol_eq, tol_sep, rel_eq, rel_sep):
                return x, E, True, iters
        gn2 = 0.0
        for v in G.ravel():
            gn2 += v * v
        if gn2 < grad_tol * grad_tol or it == max_iterations:
            break
        t = min(2.0 * step, 1e6)
        accepted = False
        xt = x.copy()
        Et = E
        for _ in range(80):
            xt = x - t * G
            Et = energy_grad(xt, I, J, cidx, sizes, C, delta, Gt, False)
            if Et <= E - armijo * t * gn2:
                accepted = True
                break
            t *= shrink
        if not accepted:
            break
        iters += 1
        step = t
        x = xt
        E = energy_grad(x, I, J, cidx, sizes, C, delta, G, True)
    ok = False
    if check:
        ok = verified(x, I, J, cidx, sizes, C, tol_eq, tol_sep, rel_eq, rel_sep)
    return x, E, ok, iters
