"""Admissible (a, b, x) configurations near the reference point.

Three families are generated from one quasi-random cloud in B_delta(xbar):

* projection configurations: a = P_A(x), b = P_B(x) for ambient x;
* rays from A: a boundary point a of A, a proximal normal g at a, and the
  point x = a + r g with dist(x, B) = r (found by bisection; the defect
  r -> dist(a + r g, B) - r is nonincreasing), then b = P_B(x);
* rays from B, symmetrically.

Ray configurations are exactly equidistant and exactly aligned, which is
where the dual constants are attained for the sets considered here.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .scene import Scene
from .sampling import ball_points, derive_seed
from .sets import MEMBERSHIP_TOL, SetSpec, cone_distance, cone_project


@dataclass(frozen=True, eq=False)
class Config:
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    ga: np.ndarray
    gb: np.ndarray
    source: str


@dataclass(frozen=True, eq=False)
class NormalPairSample:
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    x1s: np.ndarray
    x2s: np.ndarray
    ratio: float
    align1: float
    align2: float
    cone_residual1: float
    cone_residual2: float

    @property
    def value(self) -> float:
        return float(np.linalg.norm(self.x1s + self.x2s))

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else float(v)
        out["value"] = self.value
        return out


def segment_min(u1, u2) -> tuple[float, float]:
    """min over t in [0,1] of |t u1 + (1-t) u2| and the minimising t."""
    d = u1 - u2
    dd = float(d @ d)
    t = 0.5 if dd == 0.0 else min(1.0, max(0.0, float(u2 @ (u2 - u1)) / dd))
    return float(np.linalg.norm(t * u1 + (1 - t) * u2)), t


def ray_shoot(base: np.ndarray, dirs: np.ndarray, other: SetSpec, rmax: np.ndarray,
              iters: int = 64, factor: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Solve dist(base + r dir, other) = factor r for r in (0, rmax], rowwise.

    Returns (r, ok). Rows whose defect does not change sign on [0, rmax] are
    flagged not ok.
    """
    m = base.shape[0]
    if m == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)

    def defect(r):
        return other.distances(base + r[:, None] * dirs) - factor * r

    lo = np.zeros(m)
    hi = np.asarray(rmax, dtype=float).copy()
    ok = (defect(lo) > MEMBERSHIP_TOL) & (defect(hi) < 0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = defect(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    return 0.5 * (lo + hi), ok


def _fans(S: SetSpec, P: np.ndarray) -> list[np.ndarray]:
    return [S.generators(p) + 0.0 for p in P]


def _in_ball(P, c, r):
    return np.linalg.norm(P - c, axis=1) <= r * (1 + 1e-12)


def _ray_configs(S: SetSpec, T: SetSpec, seeds: np.ndarray, center, radius, source,
                 factor: float = 1.0):
    """Configurations shot from points of S along their proximal normals to T.

    With ``factor`` != 1 the shot stops where dist(x, T) = factor |x - s|.
    """
    P = S.nearest(seeds)
    keep = _in_ball(P, center, radius) & (T.distances(P) > MEMBERSHIP_TOL)
    P = P[keep]
    fans = _fans(S, P)
    base, dirs, owner = [], [], []
    for i, G in enumerate(fans):
        for g in G:
            base.append(P[i])
            dirs.append(g)
            owner.append(i)
    if not base:
        return []
    base, dirs = np.array(base), np.array(dirs)
    r, ok = ray_shoot(base, dirs, T, np.full(len(base), 2.0 * radius), factor=factor)
    X = base + r[:, None] * dirs
    Q = T.nearest(X)
    ok &= _in_ball(X, center, radius) & _in_ball(Q, center, radius)
    ok &= S.distances(Q) > MEMBERSHIP_TOL
    ok &= (r > 1e-12 * radius) & (np.linalg.norm(X - Q, axis=1) > 1e-12 * radius)
    out = []
    idx = np.flatnonzero(ok)
    qfans = _fans(T, Q[idx])
    for k, i in enumerate(idx):
        if source == "rayA":
            out.append(Config(base[i], Q[i], X[i], fans[owner[i]], qfans[k], source))
        else:
            out.append(Config(Q[i], base[i], X[i], qfans[k], fans[owner[i]], source))
    return out


def _projection_configs(scene: Scene, X: np.ndarray, radius):
    A, B, c = scene.A, scene.B, scene.xbar
    PA, PB = A.nearest(X), B.nearest(X)
    ok = _in_ball(X, c, radius) & _in_ball(PA, c, radius) & _in_ball(PB, c, radius)
    ok &= (B.distances(PA) > MEMBERSHIP_TOL) & (A.distances(PB) > MEMBERSHIP_TOL)
    ok &= (np.linalg.norm(X - PA, axis=1) > 1e-12 * radius)
    ok &= (np.linalg.norm(X - PB, axis=1) > 1e-12 * radius)
    idx = np.flatnonzero(ok)
    fa, fb = _fans(A, PA[idx]), _fans(B, PB[idx])
    return [Config(PA[i], PB[i], X[i], fa[k], fb[k], "proj") for k, i in enumerate(idx)]


_CACHE: "OrderedDict[tuple, list[Config]]" = OrderedDict()
_CACHE_SIZE = 48


def configurations(scene: Scene, radius: float, count: int, seed: int) -> list[Config]:
    """All configurations for one radius (memoised; pure in its arguments).

    The unit cloud depends on the seed only, so successive radii see the
    same pattern rescaled, which keeps per-radius values comparable.
    """
    key = (scene.fingerprint, float(radius), int(count), int(seed))
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit
    U = ball_points(scene.dim, count, derive_seed(seed, "configs"))
    X = scene.xbar + radius * U
    seeds = scene.xbar + 0.5 * radius * U
    out = _projection_configs(scene, X, radius)
    out += _ray_configs(scene.A, scene.B, seeds, scene.xbar, radius, "rayA")
    out += _ray_configs(scene.B, scene.A, seeds, scene.xbar, radius, "rayB")
    _CACHE[key] = out
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return out


def cap_directions(v: np.ndarray, G: np.ndarray, slack: float) -> list[np.ndarray]:
    """Unit normals (generators or the cone projection of v) within the cap cos > 1 - slack."""
    nv = np.linalg.norm(v)
    if nv == 0.0 or G.shape[0] == 0:
        return []
    u = v / nv
    out = [g for g in G if float(g @ u) > 1 - slack]
    p = cone_project(u, G)
    np_ = np.linalg.norm(p)
    if np_ > 0:
        w = p / np_
        if float(w @ u) > 1 - slack and not any(np.allclose(w, g, atol=1e-14) for g in out):
            out.append(w)
    return out


def relaxed_interval(u1, u2, G1, G2, slack):
    """Weights t in [0,1] with t dist(u1, N1) < slack and (1-t) dist(u2, N2) < slack."""
    r1, r2 = cone_distance(u1, G1), cone_distance(u2, G2)
    hi = 1.0 if r1 == 0 else min(1.0, slack / r1)
    lo = 0.0 if r2 == 0 else max(0.0, 1.0 - slack / r2)
    return lo, hi, r1, r2


def clipped_value(u1, u2, lo, hi):
    """min of |t u1 + (1-t) u2| over t in [lo, hi]."""
    _, t = segment_min(u1, u2)
    t = min(hi, max(lo, t))
    return float(np.linalg.norm(t * u1 + (1 - t) * u2)), t
