"""Sampling estimators for the transversality constants of a scene.

Every estimator returns a :class:`ConstantEstimate` holding one infimum
estimate per radius of the schedule. Sampling only visits part of the
feasible region, so each per-radius value bounds the true infimum from
above. A radius with no feasible sample gets the value 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .configs import (
    Config,
    NormalPairSample,
    cap_directions,
    clipped_value,
    configurations,
    relaxed_interval,
    segment_min,
)
from .constructions import bisector_foot
from .errors import IntersectionDistanceError
from .primal import _truncated_nearest, minimize_max_distance
from .sampling import ball_points, derive_seed
from .scene import RadiusSchedule, Scene
from .sets import MEMBERSHIP_TOL, cone_distance, cone_project

KINDS = ("str", "tr", "itr", "itr_w", "itr_c", "itr_p", "angle_itr")
BINDING_MARGIN = 1e-12
ALPHA_GRID = np.linspace(0.0, 1.0, 64)


@dataclass(frozen=True)
class RadiusValue:
    radius: float
    value: float
    feasible_count: int


@dataclass
class ConstantEstimate:
    kind: str
    per_radius_values: list[RadiusValue]
    extrapolated: float
    empty_feasible: bool
    drift: float = 0.0
    witnesses: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.per_radius_values]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "per_radius_values": [
                {"radius": r.radius, "value": r.value, "feasible_count": r.feasible_count}
                for r in self.per_radius_values],
            "extrapolated": self.extrapolated,
            "empty_feasible": self.empty_feasible,
            "drift": self.drift,
            "diagnostics": self.diagnostics,
        }


def _finish(kind, rows, witnesses=None, diagnostics=None) -> ConstantEstimate:
    empty = all(r.feasible_count == 0 for r in rows)
    last = rows[-1].value
    drift = abs(rows[-1].value - rows[-2].value) if len(rows) > 1 else 0.0
    return ConstantEstimate(kind, rows, 1.0 if empty else last, empty, drift,
                            witnesses or [], diagnostics or {})


def _unit(v):
    return v / np.linalg.norm(v)


def _cos(u, v):
    return float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


def _in_ball(p, c, r):
    return float(np.linalg.norm(p - c)) <= r * (1 + 1e-12)


def _pair_sample(c: Config, x, u1, u2, t) -> NormalPairSample:
    t = min(1 - 1e-12, max(1e-12, t))
    x1s, x2s = t * u1, (1 - t) * u2
    return NormalPairSample(
        c.a, c.b, x, x1s, x2s,
        float(np.linalg.norm(x - c.a) / np.linalg.norm(x - c.b)),
        _cos(x1s, x - c.a), _cos(x2s, x - c.b),
        t * cone_distance(u1, c.ga), (1 - t) * cone_distance(u2, c.gb))


# ---------------------------------------------------------------------------
# dual constants


def estimate_itr(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Ratio band (1-d, 1+d), alignment caps cos > 1-d, exact proximal normals."""
    rows, wits = [], []
    for d in sched.radii:
        best, count, wit = 1.0, 0, None
        for c in configurations(scene, d, sched.samples_per_radius, sched.seed):
            ra, rb = np.linalg.norm(c.x - c.a), np.linalg.norm(c.x - c.b)
            if not 1 - d < ra / rb < 1 + d:
                continue
            U1 = cap_directions(c.x - c.a, c.ga, d)
            U2 = cap_directions(c.x - c.b, c.gb, d)
            if not U1 or not U2:
                continue
            count += 1
            for u1 in U1:
                for u2 in U2:
                    v, t = segment_min(u1, u2)
                    if v < best:
                        best, wit = v, (c, c.x, u1, u2, t)
        rows.append(RadiusValue(d, best, count))
        wits.append(None if wit is None else _pair_sample(*wit))
    return _finish("itr", rows, wits)


def _equidistant_triples(scene: Scene, d: float, sched: RadiusSchedule):
    """(config, x') with x' on the bisector of [a, b] inside B_d(xbar)."""
    out = []
    for c in configurations(scene, d, sched.samples_per_radius, sched.seed):
        xp = c.x if c.source != "proj" else bisector_foot(c.a, c.b, c.x)
        if not _in_ball(xp, scene.xbar, d):
            continue
        if min(np.linalg.norm(xp - c.a), np.linalg.norm(xp - c.b)) <= 1e-12 * d:
            continue
        out.append((c, xp))
    return out


def _relaxed_value(c: Config, xp, slack, ga=None, gb=None):
    u1, u2 = _unit(xp - c.a), _unit(xp - c.b)
    lo, hi, r1, r2 = relaxed_interval(u1, u2, c.ga if ga is None else ga,
                                      c.gb if gb is None else gb, slack)
    if lo > hi or (lo == hi and (r1 > 0 or r2 > 0)):
        return None
    v, t = clipped_value(u1, u2, lo, hi)
    return v, t, u1, u2


def estimate_itr_c(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Exact equidistance and alignment; cone membership relaxed to residual < slack."""
    rows, wits = [], []
    for d in sched.radii:
        slack = sched.slack(d)
        best, count, wit = 1.0, 0, None
        for c, xp in _equidistant_triples(scene, d, sched):
            res = _relaxed_value(c, xp, slack)
            if res is None:
                continue
            count += 1
            v, t, u1, u2 = res
            if v < best:
                best, wit = v, (c, xp, u1, u2, t)
        rows.append(RadiusValue(d, best, count))
        wits.append(None if wit is None else _pair_sample(*wit))
    return _finish("itr_c", rows, wits)


ITR_W_LEVELS = 3
ITR_W_INNER = 8
ITR_W_KEEP = 400


def estimate_itr_w(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Nested estimate: outer equidistant triples, inner liminf over shrinking balls.

    For an outer triple (a, b, x) and level j the inner radius is
    eps_j = min(rho, |x - a|) 4^-j. Inner samples move x1' near a and x2' near
    b keeping |x - x1'| = |x - x2'|, take base points a', b' near a, b and
    require the exactly aligned normals to be within rho of the cones at
    a', b'. The inner liminf is estimated by the largest of the level minima.
    Only the outer triples with the smallest unperturbed values are refined.
    """
    n = scene.dim
    xi = ball_points(n, ITR_W_INNER - 1, derive_seed(sched.seed, "itr_w", "xi"))
    zeta = ball_points(n, ITR_W_INNER - 1, derive_seed(sched.seed, "itr_w", "zeta"))
    rows = []
    for d in sched.radii:
        slack = sched.slack(d)
        scored = []
        for c, xp in _equidistant_triples(scene, d, sched):
            res = _relaxed_value(c, xp, slack)
            if res is not None:
                scored.append((res[0], len(scored), c, xp))
        scored.sort(key=lambda s: (s[0], s[1]))
        if scored:
            cut = scored[0][0] + 0.1
            scored = [s for s in scored if s[0] <= cut][:ITR_W_KEEP]
        best, count = 1.0, 0
        for _, _, c, xp in scored:
            val = _inner_liminf(scene, c, xp, d, slack, xi, zeta)
            if val is None:
                continue
            count += 1
            best = min(best, val)
        rows.append(RadiusValue(d, best, count))
    return _finish("itr_w", rows)


def _inner_liminf(scene, c, x, rho, slack, xi, zeta):
    A, B = scene.A, scene.B
    R0 = float(np.linalg.norm(x - c.a))
    level_min = []
    for j in range(1, ITR_W_LEVELS + 1):
        eps = min(rho, R0) * 4.0 ** -j
        X1 = c.a + eps * xi
        R = np.linalg.norm(x - X1, axis=1)
        Yb = c.b + eps * zeta - x
        X2 = x + R[:, None] * Yb / np.linalg.norm(Yb, axis=1)[:, None]
        ok = np.linalg.norm(X2 - c.b, axis=1) <= eps
        Ap, Bp = A.nearest(X1), B.nearest(X2)
        ok &= (np.linalg.norm(Ap - c.a, axis=1) <= eps) & (np.linalg.norm(Bp - c.b, axis=1) <= eps)
        ok &= (B.distances(Ap) > MEMBERSHIP_TOL) & (A.distances(Bp) > MEMBERSHIP_TOL)
        best = None
        centre = _relaxed_value(c, x, slack)
        if centre is not None:
            best = centre[0]
        for k in np.flatnonzero(ok):
            u1, u2 = _unit(x - X1[k]), _unit(x - X2[k])
            G1, G2 = A.generators(Ap[k]), B.generators(Bp[k])
            lo, hi, r1, r2 = relaxed_interval(u1, u2, G1, G2, slack)
            if lo > hi or (lo == hi and (r1 > 0 or r2 > 0)):
                continue
            v, _ = clipped_value(u1, u2, lo, hi)
            best = v if best is None else min(best, v)
        if best is None:
            return None
        level_min.append(best)
    return max(level_min)


# ---------------------------------------------------------------------------
# primal constant


def _itr_p_triples(scene, d, sched):
    trip = _equidistant_triples(scene, d, sched)
    rays = [t for t in trip if t[0].source != "proj"]
    rest = [t for t in trip if t[0].source == "proj"]
    return (rays + rest)[: sched.samples_per_radius]


def estimate_itr_p(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Largest grid alpha such that every sampled equidistant triple admits a rho
    with D(rho) + alpha rho <= |x - a|, where D is the diagonal distance to the
    sets truncated at radius lambda = (alpha + 1/sqrt(eps)) rho."""
    A, B = scene.A, scene.B
    rows = []
    flagged_total = 0
    for eps in sched.radii:
        trip = _itr_p_triples(scene, eps, sched)
        if not trip:
            rows.append(RadiusValue(eps, 1.0, 0))
            continue
        P = np.array([np.linalg.norm(xp - c.a) for c, xp in trip])
        Xc = np.array([xp for _, xp in trip])
        Ac = np.array([c.a for c, _ in trip])
        Bc = np.array([c.b for c, _ in trip])
        nrho = int(math.ceil(math.log2(0.5 / 1e-6))) + 1
        fac = 0.5 ** np.arange(1, nrho + 1)
        m = len(trip)
        I = np.repeat(np.arange(m), nrho)
        rho = (P[:, None] * fac[None, :]).reshape(-1)
        h, Xopt = minimize_max_distance(lambda Y, r: A.nearest(Y), lambda Y, r: B.nearest(Y),
                                        Xc[I], rho)
        lam0 = rho / math.sqrt(eps)
        free = (np.linalg.norm(A.nearest(Xopt) - Ac[I], axis=1) <= lam0) & \
               (np.linalg.norm(B.nearest(Xopt) - Bc[I], axis=1) <= lam0)
        score = np.where(free, (P[I] - h) / rho, -np.inf).reshape(m, nrho)
        upper = ((P[I] - h) / rho).reshape(m, nrho)
        alpha_star = score.max(axis=1)
        # rows where truncation bites: evaluate the truncated distance on the grid
        for i in range(m):
            cand = np.flatnonzero(~free.reshape(m, nrho)[i] & (upper[i] > alpha_star[i]))
            if cand.size == 0:
                continue
            flagged_total += cand.size
            alpha_star[i] = max(alpha_star[i], _truncated_alpha(
                A, B, Xc[i], Ac[i], Bc[i], P[i], rho.reshape(m, nrho)[i, cand], eps, alpha_star[i]))
        worst = float(np.min(alpha_star))
        ok = ALPHA_GRID[ALPHA_GRID <= worst + 1e-12]
        rows.append(RadiusValue(eps, float(ok.max()) if ok.size else 0.0, m))
    return _finish("itr_p", rows, diagnostics={"truncated_evaluations": flagged_total})


def _truncated_alpha(A, B, x, a, b, p, rhos, eps, floor):
    best = floor
    for alpha in ALPHA_GRID[ALPHA_GRID > floor]:
        found = False
        for rho in rhos:
            lam = (alpha + 1 / math.sqrt(eps)) * rho
            h, _ = minimize_max_distance(
                lambda Y, r: _truncated_nearest(A, a, lam, Y),
                lambda Y, r: _truncated_nearest(B, b, lam, Y),
                x[None, :], np.array([rho]))
            if h[0] + alpha * rho <= p:
                found = True
                break
        if not found:
            break
        best = alpha
    return best


# ---------------------------------------------------------------------------
# primal subtransversality and transversality


def intersection_distances(scene: Scene, X: np.ndarray, budget: int = 20000):
    """dist(x, A cap B) per row, from the oracle or certified alternating projections."""
    if scene.intersection is not None:
        return scene.intersection.distances(X), "oracle"
    A, B = scene.A, scene.B
    Z = X.copy()
    for _ in range(budget):
        Z = A.nearest(B.nearest(Z))
        if np.all(B.distances(Z) <= 1e-10):
            return np.linalg.norm(X - Z, axis=1), "alternating-projections"
    raise IntersectionDistanceError(
        "alternating-projections", f"limit not certified within {budget} cycles")


def estimate_str(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """inf of max{dist(x,A), dist(x,B)} / dist(x, A cap B) over sampled x."""
    A, B = scene.A, scene.B
    rows = []
    method = None
    U = ball_points(scene.dim, sched.samples_per_radius, derive_seed(sched.seed, "str"))
    for d in sched.radii:
        X = scene.xbar + d * U
        extra = [c.x for c in configurations(scene, d, sched.samples_per_radius, sched.seed)
                 if c.source != "proj"]
        if extra:
            X = np.vstack([X, np.array(extra)])
        dI, method = intersection_distances(scene, X)
        keep = dI > 1e-12 * d
        ratio = np.maximum(A.distances(X[keep]), B.distances(X[keep])) / dI[keep]
        binding = ratio < 1 - BINDING_MARGIN
        value = float(min(1.0, ratio.min())) if binding.any() else 1.0
        rows.append(RadiusValue(d, value, int(binding.sum())))
    return _finish("str", rows, diagnostics={"intersection_distance": method})


def _translated_intersection_distance(A, B, X, S1, S2, radius, iters=3000):
    """dist(x, (A - s1) cap (B - s2)) per row; inf where no common point is found."""
    m = X.shape[0]
    ra, rb = A.polyhedral_rows(), B.polyhedral_rows()
    if ra is not None and rb is not None:
        M = np.vstack([ra[0], rb[0]])
        off = np.hstack([ra[1][None, :] - S1 @ ra[0].T, rb[1][None, :] - S2 @ rb[0].T])
        Y = polyhedron_nearest_rowwise(M, off, X)
        d = np.linalg.norm(X - Y, axis=1)
        return np.where(np.isnan(d), np.inf, d), np.zeros(m, dtype=bool)

    def pa(Y):
        return A.nearest(Y + S1) - S1

    def pb(Y):
        return B.nearest(Y + S2) - S2

    Y = X.copy()
    if A.convex and B.convex:
        ia, ib = np.zeros_like(X), np.zeros_like(X)
        for k in range(iters):
            prev = Y
            Z = Y + ia
            Y1 = pa(Z)
            ia = Z - Y1
            Z = Y1 + ib
            Y = pb(Z)
            ib = Z - Y
            if k % 25 == 0 and np.max(np.abs(Y - prev)) <= 1e-15 * (1 + radius):
                break
    else:
        for k in range(iters):
            prev = Y
            Y = pa(pb(Y))
            if k % 25 == 0 and np.max(np.abs(Y - prev)) <= 1e-15 * (1 + radius):
                break
    gap = np.maximum(np.linalg.norm(Y - pa(Y), axis=1), np.linalg.norm(Y - pb(Y), axis=1))
    ok = gap <= 1e-10 * (1 + radius)
    if not (A.convex and B.convex):
        ok &= np.linalg.norm(Y - X, axis=1) <= 4 * radius
    d = np.where(ok, np.linalg.norm(X - Y, axis=1), np.inf)
    return d, ~ok


def polyhedron_nearest_rowwise(M: np.ndarray, off: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Projection of X[i] onto {y : M y <= off[i]}; NaN rows where empty."""
    from .sets import Polyhedron

    s = np.linalg.norm(M, axis=1)
    M, off = M / s[:, None], off / s[None, :]
    sets = Polyhedron(M, np.zeros(M.shape[0]), check=False)._active_sets
    m = X.shape[0]
    best = np.full(m, np.inf)
    out = np.full(X.shape, np.nan)
    ftol = 1e-10 * (1.0 + np.abs(off))
    for idx, AS, Ginv in sets:
        if Ginv is None:
            Y = X
        else:
            lam = (X @ AS.T - off[:, idx]) @ Ginv
            Y = X - lam @ AS
        feas = np.all(Y @ M.T - off <= ftol, axis=1)
        dist = np.sum((X - Y) ** 2, axis=1)
        better = feas & (dist < best)
        best[better] = dist[better]
        out[better] = Y[better]
    return out


def estimate_tr(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Subtransversality ratio for independently translated copies A - s1, B - s2.

    A sample whose translated sets have no common point near x (none found
    within the search budget) contributes ratio 0 and is counted in the
    diagnostics.
    """
    A, B = scene.A, scene.B
    n, N = scene.dim, sched.samples_per_radius
    U = ball_points(n, N, derive_seed(sched.seed, "tr", "x"))
    V1 = ball_points(n, N, derive_seed(sched.seed, "tr", "s1"))
    V2 = ball_points(n, N, derive_seed(sched.seed, "tr", "s2"))
    rows = []
    separated = 0
    for d in sched.radii:
        X, S1, S2 = scene.xbar + d * U, d * V1, d * V2
        num = np.maximum(A.distances(X + S1), B.distances(X + S2))
        den, _ = _translated_intersection_distance(A, B, X, S1, S2, d)
        sep = ~np.isfinite(den)
        separated += int(sep.sum())
        keep = sep | (den > 1e-12 * d)
        ratio = np.where(sep, 0.0, num / np.where(sep | (den == 0), 1.0, den))[keep]
        binding = ratio < 1 - BINDING_MARGIN
        value = float(min(1.0, ratio.min())) if binding.any() else 1.0
        rows.append(RadiusValue(d, value, int(binding.sum())))
    return _finish("tr", rows, diagnostics={"separated_samples": separated})


# ---------------------------------------------------------------------------
# angle form


def _cone_angle(v, G):
    """Smallest angle between v and a nonzero element of cone(G); pi for {0}."""
    if G.shape[0] == 0:
        return math.pi
    p = cone_project(v, G)
    np_ = np.linalg.norm(p)
    if np_ == 0.0:
        # v is polar to the cone: the best generator angle is at least pi/2
        return float(min(math.acos(max(-1.0, min(1.0, _cos(v, g)))) for g in G))
    return math.acos(max(-1.0, min(1.0, np_ / np.linalg.norm(v))))


ANGLE_CROSS = 64


def estimate_angle_itr(scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    """Angle threshold below which no sampled pair (a, b) has a - b close to both
    N_B(b) and -N_A(a). Reported as the sine of the threshold (capped at pi/2),
    which is on the same scale as itr."""
    rows, angles = [], []
    for d in sched.radii:
        cfgs = configurations(scene, d, sched.samples_per_radius, sched.seed)
        pairs = [(c.a, c.ga, c.b, c.gb) for c in cfgs]
        As = [(c.a, c.ga) for c in cfgs][:ANGLE_CROSS]
        Bs = [(c.b, c.gb) for c in cfgs][:ANGLE_CROSS]
        pairs += [(a, ga, b, gb) for a, ga in As for b, gb in Bs]
        thr, count = math.pi / 2, 0
        for a, ga, b, gb in pairs:
            v = a - b
            if np.linalg.norm(v) == 0 or ga.shape[0] == 0 or gb.shape[0] == 0:
                continue
            count += 1
            phi = max(_cone_angle(v, gb), _cone_angle(v, -ga))
            thr = min(thr, phi)
        rows.append(RadiusValue(d, math.sin(thr), count))
        angles.append(thr)
    return _finish("angle_itr", rows, diagnostics={"threshold_radians": angles})


ESTIMATORS = {
    "str": estimate_str,
    "tr": estimate_tr,
    "itr": estimate_itr,
    "itr_w": estimate_itr_w,
    "itr_c": estimate_itr_c,
    "itr_p": estimate_itr_p,
    "angle_itr": estimate_angle_itr,
}


def estimate(kind: str, scene: Scene, sched: RadiusSchedule) -> ConstantEstimate:
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown constant {kind!r}; choose from {', '.join(KINDS)}")
    return ESTIMATORS[kind](scene, sched)


# ---------------------------------------------------------------------------
# ordering checks


@dataclass(frozen=True)
class OrderingCheck:
    relation: str
    lhs: str
    rhs: str
    lhs_value: float
    rhs_value: float
    passed: bool
    scene: str = ""


def check_orderings(estimates, slack: float = 0.03, scene: str = "") -> list[OrderingCheck]:
    """Check the known inequalities between the constants that are present."""
    v = {e.kind: e.extrapolated for e in estimates}
    v["one"] = 1.0
    out = []

    def le(lhs, rhs, label=None):
        if lhs in v and rhs in v:
            ok = v[lhs] <= v[rhs] + slack
            out.append(OrderingCheck(label or f"{lhs} <= {rhs}", lhs, rhs, v[lhs], v[rhs], ok, scene))

    for lhs, rhs in (("tr", "itr"), ("itr", "itr_w"), ("itr_w", "itr_c"), ("itr_c", "one"),
                     ("itr_w", "str"), ("itr", "itr_p"), ("itr_p", "itr_c")):
        le(lhs, rhs)
    if "itr_c" in v and "itr" in v:
        floor = min(v["itr_c"], 1 / math.sqrt(2))
        out.append(OrderingCheck("min(itr_c, 1/sqrt2) <= itr", "min(itr_c,1/sqrt2)", "itr",
                                 floor, v["itr"], floor <= v["itr"] + slack, scene))
    if "itr_c" in v and v["itr_c"] <= 1 / math.sqrt(2) + slack:
        for p, q in (("itr", "itr_w"), ("itr_w", "itr_c"), ("itr_p", "itr_c")):
            if p in v and q in v:
                out.append(OrderingCheck(f"|{p} - {q}| <= slack", p, q, v[p], v[q],
                                         abs(v[p] - v[q]) <= slack, scene))
    return out
