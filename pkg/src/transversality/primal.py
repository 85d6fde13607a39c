"""Distance from the product A x B to the diagonal copy of a ball (max norm).

The infimum over x' in B(x, rho) of max{dist(x', A'), dist(x', B')}, where A'
and B' are A and B optionally truncated to closed balls, is minimised by a
batched trust-region descent on the max-of-distances function.
"""

from __future__ import annotations

import math

import numpy as np

from .sets import Ball, SetSpec, _dykstra, as_vector


def _rows_norm(V):
    return np.sqrt(np.sum(V * V, axis=1))


def _unit_rows(V, n):
    s = n[:, None]
    return np.where(s > 0, V / np.where(s > 0, s, 1.0), 0.0)


def _truncated_nearest(S: SetSpec, center, lam, Y):
    """Nearest points of S cap B(center, lam) to the rows of Y (rowwise centers)."""
    P = S.nearest(Y)
    center = np.broadcast_to(center, Y.shape)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (Y.shape[0],))
    out = P.copy()
    bad = _rows_norm(P - center) > lam * (1 + 1e-12)
    for i in np.flatnonzero(bad):
        ball = Ball(center[i], lam[i])
        y = Y[i:i + 1]
        if S.convex:
            out[i] = _dykstra((S, ball), y, iters=3000)[0]
            continue
        # nonconvex: keep the best of a few feasible heuristic candidates
        best, best_d = None, math.inf
        z = ball.nearest(y)
        for _ in range(200):
            z = S.nearest(z)
            if _rows_norm(z - center[i:i + 1])[0] <= lam[i] * (1 + 1e-12):
                break
            z = ball.nearest(z)
        cands = [z[0]]
        for s in np.linspace(0.0, 1.0, 9):
            c = S.nearest(center[i:i + 1] + s * (ball.nearest(y) - center[i:i + 1]))
            cands.append(c[0])
        for c in cands:
            if np.linalg.norm(c - center[i]) <= lam[i] * (1 + 1e-12):
                d = np.linalg.norm(c - y[0])
                if d < best_d:
                    best, best_d = c, d
        out[i] = best if best is not None else np.nan
    return out


def _model_minimizer(c1, c2, g1, g2, r):
    """Minimise max(c1 + <g1, d>, c2 + <g2, d>) over |d| <= r, rowwise.

    g1, g2 are unit (or zero) vectors. The optimum is -r g1, -r g2, or a
    point of the chord where both pieces agree.
    """
    m, n = g1.shape
    cands = [-r[:, None] * g1, -r[:, None] * g2]
    d = g1 - g2
    dd = np.sum(d * d, axis=1)
    safe = np.where(dd > 0, dd, 1.0)
    d0 = ((c2 - c1) / safe)[:, None] * d
    n0 = _rows_norm(d0)
    q = g1 + g2
    q = _unit_rows(q, _rows_norm(q))
    s = np.sqrt(np.maximum(r * r - n0 * n0, 0.0))
    chord_ok = (dd > 0) & (n0 <= r)
    cands.append(np.where(chord_ok[:, None], d0 - s[:, None] * q, 0.0))
    cands.append(np.where(chord_ok[:, None], d0, 0.0))
    C = np.stack(cands)
    val = np.maximum(c1[None] + np.sum(C * g1[None], axis=2), c2[None] + np.sum(C * g2[None], axis=2))
    return C[np.argmin(val, axis=0), np.arange(m)]


_FRACTIONS = 2.0 ** -np.arange(0, 12)


def minimize_max_distance(projA, projB, X, R, iters: int = 40):
    """Batched minimisation of max{dist(., A), dist(., B)} over balls B(X_i, R_i).

    ``projA``/``projB`` map a row batch to nearest points. Returns the optimal
    values and minimisers. Each iteration linearises both distances at the
    current point, minimises the two-piece model over the ball (exact for
    affine sets) and backtracks towards it; the min-norm subgradient
    direction with a geometric line search is tried alongside. Rows stop
    once no trial improves by more than 1e-10 R.
    """
    X = np.asarray(X, dtype=float)
    m, n = X.shape
    R = np.broadcast_to(np.asarray(R, dtype=float), (m,)).copy()

    def evaluate(Y, rows):
        VA = Y - projA(Y, rows)
        VB = Y - projB(Y, rows)
        dA, dB = _rows_norm(VA), _rows_norm(VB)
        return np.maximum(dA, dB), dA, dB, _unit_rows(VA, dA), _unit_rows(VB, dB)

    Y = X.copy()
    h = np.full(m, np.inf)
    active = np.arange(m)
    for it in range(iters + 1):
        if active.size == 0:
            break
        k = active.size
        hc, dA, dB, eA, eB = evaluate(Y[active], active)
        h[active] = hc
        if it == iters:
            break
        Yc, Xc, Rc = Y[active], X[active], R[active]
        off = Yc - Xc
        target = Xc + _model_minimizer(dA - np.sum(eA * off, axis=1), dB - np.sum(eB * off, axis=1),
                                       eA, eB, Rc)
        trials = [Yc + f * (target - Yc) for f in _FRACTIONS]
        diff = eA - eB
        dd = np.sum(diff * diff, axis=1)
        t = np.clip(np.sum(eB * (eB - eA), axis=1) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        w = -(t[:, None] * eA + (1 - t[:, None]) * eB)
        for f in _FRACTIONS:
            Z = Yc + (2 * f * Rc)[:, None] * w - Xc
            nz = _rows_norm(Z)
            Z = np.where((nz > Rc)[:, None], Z * (Rc / np.where(nz > 0, nz, 1.0))[:, None], Z)
            trials.append(Xc + Z)
        T = np.stack(trials)
        ht, *_ = evaluate(T.reshape(-1, n), np.tile(active, len(trials)))
        ht = ht.reshape(len(trials), k)
        pick = np.argmin(ht, axis=0)
        best = ht[pick, np.arange(k)]
        improved = best < hc - 1e-10 * Rc
        Y[active[improved]] = T[pick, np.arange(k)][improved]
        active = active[improved]
    return h, Y


def product_diag_distance(A: SetSpec, B: SetSpec, x, rho: float, a=None, b=None,
                          lam: float | None = None, iters: int = 40) -> float:
    """inf over x' in B(x, rho) of max{dist(x', A cap B(a, lam)), dist(x', B cap B(b, lam))}.

    With ``lam=None`` the sets are not truncated. Returns ``math.inf`` when a
    truncated set is empty.
    """
    x = as_vector(x, A.dim)
    if lam is not None:
        a = as_vector(a, A.dim)
        b = as_vector(b, A.dim)
        if A.distances(a[None])[0] > lam or B.distances(b[None])[0] > lam:
            return math.inf

        def pa(Y, rows):
            return _truncated_nearest(A, a, lam, Y)

        def pb(Y, rows):
            return _truncated_nearest(B, b, lam, Y)
    else:
        def pa(Y, rows):
            return A.nearest(Y)

        def pb(Y, rows):
            return B.nearest(Y)

    h, _ = minimize_max_distance(pa, pb, x[None, :], np.array([rho]), iters)
    return float(h[0])
