"""Bisector construction, normal rescaling and the Case-2 inequality chain.

Given a near-equidistant configuration (a, b, x) with normals almost aligned
to x - a and x - b, moving x onto the perpendicular bisector of [a, b] and
re-aligning the normals exactly costs only a controlled perturbation of the
normals. The functions here build that construction and check every link of
the estimate numerically.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import InfeasibleToleranceError, PreconditionError
from .sets import SetSpec, as_vector, distance, proximal_normals, sample_set_points

STRICT_MARGIN = 1e-12


def bisector_foot(a, b, x) -> np.ndarray:
    """Orthogonal projection of x onto the perpendicular bisector of [a, b]."""
    a, b, x = (np.asarray(v, dtype=float) for v in (a, b, x))
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        raise PreconditionError("bisector of a degenerate segment (a == b)")
    m = 0.5 * (a + b)
    return x - (float(d @ (x - m)) / dd) * d


def _negated_bisector_foot(a, b, x) -> np.ndarray:
    # deliberately wrong sign; used to check that the chain catches it
    a, b, x = (np.asarray(v, dtype=float) for v in (a, b, x))
    d = b - a
    m = 0.5 * (a + b)
    return x + (float(d @ (x - m)) / float(d @ d)) * d


FAULTS = {"negated-bisector": _negated_bisector_foot}


def rescale_normals(a, b, xprime, x1s, x2s) -> tuple[np.ndarray, np.ndarray]:
    """Point the normals exactly along x' - a and x' - b, keeping their norms."""
    a, b, xp, x1s, x2s = (np.asarray(v, dtype=float) for v in (a, b, xprime, x1s, x2s))
    ua, ub = xp - a, xp - b
    na, nb = np.linalg.norm(ua), np.linalg.norm(ub)
    if na == 0.0 or nb == 0.0:
        raise PreconditionError("x' coincides with a or b")
    return np.linalg.norm(x1s) / na * ua, np.linalg.norm(x2s) / nb * ub


def _displacement_factor(dp: float) -> float:
    return math.sqrt(2 * dp) + 2 * math.sqrt((2 * dp - dp * dp) / (4 - 6 * dp + 3 * dp * dp))


def delta_prime_margins(beta: float, alpha: float, delta: float, dp: float) -> tuple[float, float]:
    """Slack in the two scalar conditions on the technical tolerance dp."""
    m1 = (0.5 - beta * beta) - 2 * (math.sqrt(dp) + dp)
    m2 = min(delta, alpha - beta) - _displacement_factor(dp)
    return m1, m2


def delta_prime_for(beta: float, alpha: float, delta: float, floor: float = 1e-15) -> float:
    """Largest dp <= delta/3 (to bisection accuracy) with both margins positive.

    Both margins decrease in dp, so the admissible set is an interval and a
    log-scale bisection finds its right end.
    """
    if not (0 < beta < min(alpha, 1 / math.sqrt(2)) and delta > 0):
        raise PreconditionError("need 0 < beta < min(alpha, 1/sqrt 2) and delta > 0")

    def ok(dp):
        return min(delta_prime_margins(beta, alpha, delta, dp)) > 0

    hi = min(delta / 3, 1.0 - 1e-12)
    if ok(hi):
        return hi
    if not ok(floor):
        raise InfeasibleToleranceError(
            f"no admissible tolerance above {floor:g} for beta={beta}, alpha={alpha}, delta={delta}")
    lo_l, hi_l = math.log(floor), math.log(hi)
    for _ in range(200):
        mid = 0.5 * (lo_l + hi_l)
        if ok(math.exp(mid)):
            lo_l = mid
        else:
            hi_l = mid
    return math.exp(lo_l)


def _cos(u, v) -> float:
    return float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


@dataclass(frozen=True, eq=False)
class ConstructionInstance:
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    x1s: np.ndarray
    x2s: np.ndarray
    delta_prime: float

    def __post_init__(self):
        for name in ("a", "b", "x", "x1s", "x2s"):
            object.__setattr__(self, name, as_vector(getattr(self, name), what=name))
        a, b, x, dp = self.a, self.b, self.x, self.delta_prime
        if not 0 < dp < 1:
            raise PreconditionError("delta_prime must lie in (0, 1)")
        n1, n2 = np.linalg.norm(self.x1s), np.linalg.norm(self.x2s)
        if n1 == 0 or n2 == 0 or abs(n1 + n2 - 1) > 1e-12:
            raise PreconditionError("normals must be nonzero with unit total norm")
        if np.linalg.norm(x - a) == 0 or np.linalg.norm(x - b) == 0:
            raise PreconditionError("x must differ from a and b")
        if float((x - a) @ (x - b)) > 0:
            raise PreconditionError("not a Case-2 instance: <x-a, x-b> > 0")
        r = np.linalg.norm(x - a) / np.linalg.norm(x - b)
        if not (1 - dp - STRICT_MARGIN < r < 1 + dp + STRICT_MARGIN):
            raise PreconditionError(f"distance ratio {r} outside (1-dp, 1+dp)")
        for xs, p in ((self.x1s, a), (self.x2s, b)):
            if not _cos(xs, x - p) > 1 - dp - STRICT_MARGIN:
                raise PreconditionError("normal is outside the alignment cap")

    @property
    def m(self):
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True)
class Link:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool


@dataclass
class ChainReport:
    links: list[Link] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(l.passed for l in self.links)

    @property
    def failures(self) -> list[Link]:
        return [l for l in self.links if not l.passed]

    def to_json(self) -> str:
        return json.dumps([asdict(l) for l in self.links])


def _le(name, lhs, rhs, scale=1.0) -> Link:
    return Link(name, float(lhs), float(rhs), float(rhs - lhs),
                bool(lhs <= rhs + STRICT_MARGIN * max(1.0, scale)))


def verify_construction_chain(inst: ConstructionInstance,
                              foot: Callable = bisector_foot) -> ChainReport:
    """Evaluate every link of the Case-2 estimate on one instance."""
    a, b, x, x1s, x2s, dp = inst.a, inst.b, inst.x, inst.x1s, inst.x2s, inst.delta_prime
    xp = foot(a, b, x)
    m = inst.m
    da, db = np.linalg.norm(x - a), np.linalg.norm(x - b)
    dpa, dpb = np.linalg.norm(xp - a), np.linalg.norm(xp - b)
    shift = np.linalg.norm(x - xp)
    scale = max(da, db) ** 2
    rep = ChainReport()
    rep.links.append(_le("equidistance", abs(dpa - dpb) / max(dpa, dpb), 1e-10))
    # relative to |x - m|^2: dividing by |x - x'| would amplify cancellation when x' ~ x
    orth = abs(float((x - xp) @ (xp - m))) / max(float((x - m) @ (x - m)), 1e-300)
    rep.links.append(_le("orthogonality", orth, 1e-10))
    c1 = (2 * dp - dp * dp) / (4 * (1 - dp) ** 2)
    rep.links.append(_le("step1", shift ** 2, c1 * min(da, db) ** 2, scale))
    c2 = (4 - 6 * dp + 3 * dp * dp) / (2 * dp - dp * dp)
    for label, p, dpp in (("a", a, dpa), ("b", b, dpb)):
        rep.links.append(_le(f"step2_{label}", c2 * shift ** 2, dpp ** 2, scale))
    for label, p, dpp, dd in (("a", a, dpa, da), ("b", b, dpb, db)):
        turn = np.linalg.norm((xp - p) / dpp - (x - p) / dd)
        rep.links.append(_le(f"step3_{label}", turn, 2 * shift / dpp))
    y1, y2 = rescale_normals(a, b, xp, x1s, x2s)
    k = _displacement_factor(dp)
    rep.links.append(_le("normal_shift_1", np.linalg.norm(y1 - x1s), np.linalg.norm(x1s) * k))
    rep.links.append(_le("normal_shift_2", np.linalg.norm(y2 - x2s), np.linalg.norm(x2s) * k))
    return rep


def case1_bound_holds(x1s, x2s, delta_prime: float) -> tuple[bool, float, float]:
    """|x1*+x2*|^2 > 1/2 - 2(sqrt dp + dp) for aligned normals at an acute corner."""
    lhs = float(np.sum((np.asarray(x1s) + np.asarray(x2s)) ** 2))
    rhs = 0.5 - 2 * (math.sqrt(delta_prime) + delta_prime)
    return lhs > rhs + STRICT_MARGIN, lhs, rhs


def _cap_vector(rng, axis: np.ndarray, dp: float, stress: bool) -> np.ndarray:
    """Unit vector whose cosine with ``axis`` lies in (1 - dp, 1]."""
    n = axis.size
    u = axis / np.linalg.norm(axis)
    c = 1 - dp + STRICT_MARGIN * 10 if stress else 1 - dp * rng.uniform(0, 1)
    w = rng.standard_normal(n)
    w -= (w @ u) * u
    nw = np.linalg.norm(w)
    if nw == 0:
        return u
    return c * u + math.sqrt(max(0.0, 1 - c * c)) * w / nw


def random_instance(rng: np.random.Generator, delta_prime: float, dim: int = 2,
                    stress: bool = False, max_tries: int = 1000) -> ConstructionInstance:
    """Rejection sampler for feasible Case-2 instances.

    Draw a, b and a point of the Thales ball over [a, b], then slide it along
    b - a until the distance ratio equals a target drawn from the band.
    ``stress`` puts the ratio and alignments within 1e-11 of the band edges.
    """
    dp = delta_prime
    for _ in range(max_tries):
        a = rng.standard_normal(dim)
        b = a + rng.standard_normal(dim) * rng.uniform(0.2, 3.0)
        L = np.linalg.norm(b - a)
        if L < 1e-6:
            continue
        e = (b - a) / L
        m = 0.5 * (a + b)
        y = rng.standard_normal(dim)
        y -= (y @ e) * e
        ny = np.linalg.norm(y)
        if ny == 0:
            continue
        h = 0.5 * L * math.sqrt(rng.uniform(0, 1)) * 0.999
        if stress:
            target = (1 + dp - 1e-11) if rng.uniform() < 0.5 else (1 - dp + 1e-11)
        else:
            target = 1 + dp * rng.uniform(-1, 1)
        R = target * target
        # (1-R) s^2 + L (1+R) s + (1-R)(h^2 + L^2/4) = 0
        qa, qb, qc = 1 - R, L * (1 + R), (1 - R) * (h * h + L * L / 4)
        if abs(qa) < 1e-15:
            s = 0.0
        else:
            disc = qb * qb - 4 * qa * qc
            if disc < 0:
                continue
            s = (-qb + math.sqrt(disc)) / (2 * qa)
            if abs(s) > L:
                s = (-qb - math.sqrt(disc)) / (2 * qa)
        if h * h + s * s > L * L / 4:
            continue
        x = m + s * e + h * y / ny
        t = rng.uniform(0.02, 0.98)
        x1s = t * _cap_vector(rng, x - a, dp, stress)
        x2s = (1 - t) * _cap_vector(rng, x - b, dp, stress)
        try:
            return ConstructionInstance(a, b, x, x1s, x2s, dp)
        except PreconditionError:
            continue
    raise InfeasibleToleranceError("rejection sampler exhausted its budget")


def random_case1_normals(rng: np.random.Generator, delta_prime: float, dim: int = 2):
    """(x, a, b, x1*, x2*) with <x-a, x-b> > 0 and normals in the alignment caps."""
    while True:
        x = rng.standard_normal(dim)
        a = x + rng.standard_normal(dim)
        b = x + rng.standard_normal(dim)
        if float((x - a) @ (x - b)) > 1e-9:
            break
    t = rng.uniform(0.01, 0.99)
    return x, a, b, t * _cap_vector(rng, x - a, delta_prime, False), \
        (1 - t) * _cap_vector(rng, x - b, delta_prime, False)


def run_chain_corpus(count: int, delta_prime: float, seed: int, dim: int = 2,
                     stress_every: int = 0, foot: Callable = bisector_foot) -> dict:
    """Verify ``count`` random instances; summary with failure tallies per link."""
    rng = np.random.default_rng(seed)
    failures: dict[str, int] = {}
    worst: dict[str, float] = {}
    for k in range(count):
        stress = bool(stress_every) and k % stress_every == 0
        inst = random_instance(rng, delta_prime, dim, stress)
        for l in verify_construction_chain(inst, foot).links:
            worst[l.name] = min(worst.get(l.name, math.inf), l.margin)
            if not l.passed:
                failures[l.name] = failures.get(l.name, 0) + 1
    return {"count": count, "delta_prime": delta_prime, "failures": failures,
            "worst_margin": worst}


def run_case1_corpus(count: int, delta_prime: float, seed: int, dim: int = 2) -> dict:
    rng = np.random.default_rng(seed)
    fails = 0
    worst = math.inf
    for _ in range(count):
        *_, x1s, x2s = random_case1_normals(rng, delta_prime, dim)
        ok, lhs, rhs = case1_bound_holds(x1s, x2s, delta_prime)
        fails += not ok
        worst = min(worst, lhs - rhs)
    return {"count": count, "delta_prime": delta_prime, "failures": fails, "worst_margin": worst}


# ---------------------------------------------------------------------------
# witness search for the primal-to-dual lemma


@dataclass(frozen=True, eq=False)
class WitnessSearchProblem:
    A: SetSpec
    B: SetSpec
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray
    rho: float
    eps: float
    lam: float
    tau: float

    def __post_init__(self):
        from .primal import product_diag_distance

        n = self.A.dim
        for name in ("x", "a", "b"):
            object.__setattr__(self, name, as_vector(getattr(self, name), n, name))
        if min(self.rho, self.eps, self.lam, self.tau) <= 0:
            raise PreconditionError("rho, eps, lambda and tau must be positive")
        if self.lam < self.eps + self.rho:
            raise PreconditionError("need lambda >= eps + rho")
        if not self.tau < (self.lam - self.eps) / (self.lam + self.eps):
            raise PreconditionError("need tau < (lambda - eps)/(lambda + eps)")
        if distance(self.A, self.a) > 1e-9 or distance(self.B, self.b) > 1e-9:
            raise PreconditionError("a must lie in A and b in B")
        far = max(np.linalg.norm(self.x - self.a), np.linalg.norm(self.x - self.b))
        if not far > self.eps:
            raise PreconditionError("need max(|x-a|, |x-b|) > eps")
        D = product_diag_distance(self.A, self.B, self.x, self.rho)
        if not far < D + self.eps:
            raise PreconditionError(
                f"need max(|x-a|, |x-b|) < diagonal distance + eps (got {far} vs {D + self.eps})")


@dataclass(frozen=True)
class Witness:
    a_hat: np.ndarray
    b_hat: np.ndarray
    x_hat: np.ndarray
    x1s: np.ndarray
    x2s: np.ndarray


def witness_conditions(prob: WitnessSearchProblem, w: Witness, tol: float = 1e-9) -> dict:
    n1, n2 = np.linalg.norm(w.x1s), np.linalg.norm(w.x2s)
    lhs = float(w.x1s @ (w.x_hat - w.a_hat) + w.x2s @ (w.x_hat - w.b_hat))
    rhs = prob.tau * max(np.linalg.norm(w.x_hat - w.a_hat), np.linalg.norm(w.x_hat - w.b_hat))
    from .sets import cone_distance

    return {
        "unit_sum": abs(n1 + n2 - 1) <= tol,
        "small_sum": float(np.linalg.norm(w.x1s + w.x2s)) < prob.eps / prob.rho,
        "cone_membership": (
            distance(prob.A, w.a_hat) <= tol and distance(prob.B, w.b_hat) <= tol
            and np.linalg.norm(w.a_hat - prob.a) <= prob.lam + tol
            and np.linalg.norm(w.b_hat - prob.b) <= prob.lam + tol
            and np.linalg.norm(w.x_hat - prob.x) <= prob.rho + tol
            and cone_distance(w.x1s, proximal_normals(prob.A, w.a_hat)) <= tol
            and cone_distance(w.x2s, proximal_normals(prob.B, w.b_hat)) <= tol),
        "ascent": lhs > rhs,
    }


def _best_weight(g1, g2, c1, c2, bound):
    """Maximise t c1 + (1-t) c2 over t in [0,1] with |t g1 + (1-t) g2| < bound."""
    d = g1 - g2
    qa, qb, qc = float(d @ d), 2 * float(d @ g2), float(g2 @ g2) - bound * bound * (1 - 1e-12)
    if qa < 1e-300:
        lo, hi = (0.0, 1.0) if qc < 0 else (1.0, 0.0)
    else:
        disc = qb * qb - 4 * qa * qc
        if disc < 0:
            return None
        r = math.sqrt(disc)
        lo, hi = max(0.0, (-qb - r) / (2 * qa)), min(1.0, (-qb + r) / (2 * qa))
    if lo > hi:
        return None
    return hi if c1 >= c2 else lo


def lemma_witness_search(prob: WitnessSearchProblem, budget: int, seed: int = 0) -> Witness | None:
    """Best-effort multistart search; ``None`` only means nothing was found."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    from .sampling import ball_points, derive_seed

    n = prob.A.dim
    xs = prob.x + prob.rho * np.vstack([np.zeros(n), ball_points(n, budget - 1, derive_seed(seed, "x"))]) \
        if budget > 1 else prob.x[None, :]
    pool_a = [prob.a] + sample_set_points(prob.A, prob.a, prob.lam, budget, derive_seed(seed, "a"))
    pool_b = [prob.b] + sample_set_points(prob.B, prob.b, prob.lam, budget, derive_seed(seed, "b"))
    bound = prob.eps / prob.rho
    for k, xh in enumerate(xs):
        cands_a = [p for p in prob.A.candidates(xh) if np.linalg.norm(p - prob.a) <= prob.lam]
        cands_b = [p for p in prob.B.candidates(xh) if np.linalg.norm(p - prob.b) <= prob.lam]
        cands_a.append(pool_a[k % len(pool_a)])
        cands_b.append(pool_b[k % len(pool_b)])
        for ah in cands_a:
            G1 = proximal_normals(prob.A, ah)
            for bh in cands_b:
                G2 = proximal_normals(prob.B, bh)
                scale = max(np.linalg.norm(xh - ah), np.linalg.norm(xh - bh))
                for g1 in G1:
                    for g2 in G2:
                        c1, c2 = float(g1 @ (xh - ah)), float(g2 @ (xh - bh))
                        t = _best_weight(g1, g2, c1, c2, bound)
                        if t is None or t * c1 + (1 - t) * c2 <= prob.tau * scale:
                            continue
                        w = Witness(ah.copy(), bh.copy(), xh.copy(), t * g1, (1 - t) * g2)
                        if all(witness_conditions(prob, w).values()):
                            return w
    return None
