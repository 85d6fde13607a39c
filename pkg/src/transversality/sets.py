"""Closed subsets of R^n with exact nearest-point maps and proximal normal fans.

Every variant implements a vectorised single-valued ``nearest`` (one metric
projection per row), a set-valued ``candidates`` that materialises ties, and
``generators``: finitely many unit vectors whose conic hull is the proximal
normal cone at a point of the set.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, nnls

from .errors import (
    DimensionMismatchError,
    NotInSetError,
    SamplingWarning,
    SetFormatError,
    UnsupportedSetError,
)
from .sampling import ball_points, derive_seed

MEMBERSHIP_TOL = 1e-9
TIE_TOL = 1e-9
_DEDUP_TOL = 1e-12
_MAX_SUBSETS = 20000


def as_vector(x, dim: int | None = None, what: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatchError(dim, v.shape[0], what)
    if not np.all(np.isfinite(v)):
        raise SetFormatError(f"{what} has non-finite entries")
    return v


def _as_rows(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != dim:
        raise DimensionMismatchError(dim, X.shape[1], "point batch")
    return X


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _dedup(points: list[np.ndarray], tol: float = _DEDUP_TOL) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in sorted(points, key=lambda q: tuple(q)):
        if all(np.max(np.abs(p - q)) > tol for q in out):
            out.append(p)
    return out


def _stack(vectors, dim: int) -> np.ndarray:
    if len(vectors) == 0:
        return np.zeros((0, dim))
    return np.vstack(vectors)


# ---------------------------------------------------------------------------
# cone helpers


def cone_project(u, G) -> np.ndarray:
    """Nearest point of cone(rows of G) to u."""
    u = np.asarray(u, dtype=float)
    G = np.asarray(G, dtype=float)
    if G.shape[0] == 0:
        return np.zeros_like(u)
    if G.shape[0] == 1:
        g = G[0]
        return max(0.0, float(g @ u) / float(g @ g)) * g
    coef, _ = nnls(G.T, u)
    return G.T @ coef


def cone_distance(u, G) -> float:
    """Distance from u to the conic hull of the rows of G (0 rows means {0})."""
    u = np.asarray(u, dtype=float)
    return float(np.linalg.norm(u - cone_project(u, G)))


def prune_generators(G: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Drop duplicate rows and rows that lie in the cone of the others."""
    rows = _dedup([np.asarray(g, float) for g in G], 1e-12)
    changed = True
    while changed and len(rows) > 1:
        changed = False
        for i in range(len(rows)):
            others = np.vstack(rows[:i] + rows[i + 1:])
            if cone_distance(rows[i], others) <= tol:
                rows.pop(i)
                changed = True
                break
    return _stack(rows, G.shape[1] if G.ndim == 2 else 0)


# ---------------------------------------------------------------------------
# variants


class SetSpec:
    """Common interface; concrete variants are frozen dataclasses."""

    kind = "abstract"
    convex = False

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def nearest(self, X) -> np.ndarray:
        raise NotImplementedError

    def candidates(self, x: np.ndarray) -> list[np.ndarray]:
        return [self.nearest(x[None, :])[0]]

    def generators(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def translate(self, v) -> "SetSpec":
        raise NotImplementedError

    def scale(self, c: float) -> "SetSpec":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def distances(self, X) -> np.ndarray:
        X = _as_rows(X, self.dim)
        return np.linalg.norm(X - self.nearest(X), axis=1)

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        x = as_vector(x, self.dim)
        return bool(self.distances(x[None, :])[0] <= tol)

    def polyhedral_rows(self):
        """(A, b) with the set equal to {A x <= b}, or None."""
        return None


@dataclass(frozen=True, eq=False)
class Affine(SetSpec):
    """basepoint + span(rows of basis); an empty basis gives a single point."""

    basepoint: np.ndarray
    basis: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    kind = "affine"
    convex = True

    def __post_init__(self):
        p = as_vector(self.basepoint, what="basepoint")
        n = p.size
        U = np.asarray(self.basis, dtype=float)
        U = np.zeros((0, n)) if U.size == 0 else U.reshape(-1, n)
        if U.shape[0] > n:
            raise SetFormatError("affine basis has more rows than the dimension")
        if U.shape[0] and np.max(np.abs(U @ U.T - np.eye(U.shape[0]))) > 1e-8:
            raise SetFormatError("affine basis is not orthonormal")
        if U.shape[0]:
            q, r = np.linalg.qr(U.T)
            U = (q * np.sign(np.diag(r))).T
        object.__setattr__(self, "basepoint", p)
        object.__setattr__(self, "basis", U)

    @property
    def dim(self):
        return self.basepoint.size

    @cached_property
    def complement(self) -> np.ndarray:
        k = self.basis.shape[0]
        if k == 0:
            return np.eye(self.dim)
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return vt[k:]

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        D = X - self.basepoint
        return self.basepoint + (D @ self.basis.T) @ self.basis

    def generators(self, a):
        N = self.complement
        return np.vstack([N, -N])

    def translate(self, v):
        return Affine(self.basepoint + as_vector(v, self.dim), self.basis)

    def scale(self, c):
        return Affine(c * self.basepoint, self.basis)

    def polyhedral_rows(self):
        N = self.complement
        off = N @ self.basepoint
        return np.vstack([N, -N]), np.concatenate([off, -off])

    def to_dict(self):
        return {"type": "affine", "basepoint": self.basepoint.tolist(),
                "basis": self.basis.tolist()}


@dataclass(frozen=True, eq=False)
class HalfSpace(SetSpec):
    """{x : <normal, x> <= offset}, normal rescaled to unit length."""

    normal: np.ndarray
    offset: float

    kind = "halfspace"
    convex = True

    def __post_init__(self):
        n = as_vector(self.normal, what="normal")
        s = np.linalg.norm(n)
        if s == 0.0:
            raise SetFormatError("half-space normal is zero")
        object.__setattr__(self, "normal", n / s)
        object.__setattr__(self, "offset", float(self.offset) / s)

    @property
    def dim(self):
        return self.normal.size

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        excess = np.maximum(X @ self.normal - self.offset, 0.0)
        return X - excess[:, None] * self.normal

    def generators(self, a):
        if abs(float(a @ self.normal) - self.offset) <= MEMBERSHIP_TOL:
            return self.normal[None, :].copy()
        return np.zeros((0, self.dim))

    def translate(self, v):
        return HalfSpace(self.normal, self.offset + float(self.normal @ as_vector(v, self.dim)))

    def scale(self, c):
        return HalfSpace(self.normal, c * self.offset)

    def polyhedral_rows(self):
        return self.normal[None, :], np.array([self.offset])

    def to_dict(self):
        return {"type": "halfspace", "normal": self.normal.tolist(), "offset": self.offset}


@dataclass(frozen=True, eq=False)
class Ball(SetSpec):
    center: np.ndarray
    radius: float

    kind = "ball"
    convex = True

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, what="center"))
        if not self.radius > 0:
            raise SetFormatError("radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        D = X - self.center
        r = np.linalg.norm(D, axis=1)
        f = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + D * f[:, None]

    def generators(self, a):
        d = a - self.center
        r = np.linalg.norm(d)
        if abs(r - self.radius) <= MEMBERSHIP_TOL:
            return (d / r)[None, :]
        return np.zeros((0, self.dim))

    def translate(self, v):
        return Ball(self.center + as_vector(v, self.dim), self.radius)

    def scale(self, c):
        return Ball(c * self.center, c * self.radius)

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Sphere(SetSpec):
    center: np.ndarray
    radius: float

    kind = "sphere"
    convex = False

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, what="center"))
        if not self.radius > 0:
            raise SetFormatError("radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center.size

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        D = X - self.center
        r = np.linalg.norm(D, axis=1)
        at_center = r == 0.0
        D[at_center] = np.eye(self.dim)[0]
        r[at_center] = 1.0
        return self.center + D * (self.radius / r)[:, None]

    def candidates(self, x):
        if np.linalg.norm(x - self.center) == 0.0:
            # every sphere point is nearest; return the coordinate poles
            E = np.eye(self.dim) * self.radius
            return _dedup([self.center + e for e in np.vstack([E, -E])])
        return [self.nearest(x[None, :])[0]]

    def generators(self, a):
        u = _unit(a - self.center)
        return np.vstack([u, -u])

    def translate(self, v):
        return Sphere(self.center + as_vector(v, self.dim), self.radius)

    def scale(self, c):
        return Sphere(c * self.center, c * self.radius)

    def to_dict(self):
        return {"type": "sphere", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Polyhedron(SetSpec):
    """{x : A x <= b} with rows of A normalised.

    Projection enumerates linearly independent active sets, which is exact and
    cheap for the handful of constraints used in low-dimensional scenes. An
    empty polyhedron yields NaN rows from ``nearest``; construct with
    ``check=True`` to reject it up front.
    """

    A: np.ndarray
    b: np.ndarray
    check: bool = True

    kind = "polyhedron"
    convex = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.size or A.shape[0] == 0:
            raise SetFormatError("polyhedron needs matching, nonempty A and b")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise SetFormatError("polyhedron has non-finite data")
        s = np.linalg.norm(A, axis=1)
        if np.any(s == 0.0):
            raise SetFormatError("polyhedron has a zero normal")
        object.__setattr__(self, "A", A / s[:, None])
        object.__setattr__(self, "b", b / s)
        if self.check and not self.is_nonempty():
            raise SetFormatError("polyhedron is empty")

    @classmethod
    def from_halfspaces(cls, halfspaces, check=True):
        A = np.vstack([h.normal for h in halfspaces])
        b = np.array([h.offset for h in halfspaces])
        return cls(A, b, check)

    @property
    def dim(self):
        return self.A.shape[1]

    def is_nonempty(self) -> bool:
        res = linprog(np.zeros(self.dim), A_ub=self.A, b_ub=self.b + 1e-12,
                      bounds=[(None, None)] * self.dim, method="highs")
        return res.status == 0

    @cached_property
    def _active_sets(self):
        m, n = self.A.shape
        total = sum(math.comb(m, k) for k in range(min(m, n) + 1))
        if total > _MAX_SUBSETS:
            return None
        out = []
        for k in range(min(m, n) + 1):
            for idx in itertools.combinations(range(m), k):
                idx = np.array(idx, dtype=int)
                AS = self.A[idx]
                if k:
                    G = AS @ AS.T
                    if np.linalg.cond(G) > 1e10:
                        continue
                    out.append((idx, AS, np.linalg.inv(G)))
                else:
                    out.append((idx, AS, None))
        return out

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        sets = self._active_sets
        if sets is None:
            members = [HalfSpace(a, c) for a, c in zip(self.A, self.b)]
            return _dykstra(members, X)
        m = X.shape[0]
        best = np.full(m, np.inf)
        out = np.full(X.shape, np.nan)
        ftol = 1e-10 * (1.0 + np.abs(self.b))
        for idx, AS, Ginv in sets:
            if Ginv is None:
                Y = X
            else:
                lam = (X @ AS.T - self.b[idx]) @ Ginv
                Y = X - lam @ AS
            feas = np.all(Y @ self.A.T - self.b <= ftol, axis=1)
            d = np.sum((X - Y) ** 2, axis=1)
            better = feas & (d < best)
            best[better] = d[better]
            out[better] = Y[better]
        return out

    def generators(self, a):
        act = np.abs(self.A @ a - self.b) <= MEMBERSHIP_TOL
        if not np.any(act):
            return np.zeros((0, self.dim))
        return prune_generators(self.A[act])

    def translate(self, v):
        return Polyhedron(self.A, self.b + self.A @ as_vector(v, self.dim), False)

    def scale(self, c):
        return Polyhedron(self.A, c * self.b, False)

    def polyhedral_rows(self):
        return self.A, self.b

    def to_dict(self):
        return {"type": "polyhedron", "halfspaces": [
            {"normal": a.tolist(), "offset": float(c)} for a, c in zip(self.A, self.b)]}


_PARABOLA_NAMES = ("parabola_epigraph", "parabola_hypograph", "parabola")


def _parabola_roots(u: np.ndarray, w: np.ndarray, c: float) -> np.ndarray:
    """Real roots t of 2c^2 t^3 + (1 - 2cw) t - u = 0, NaN-padded to 3 columns.

    These are the critical points of (t - u)^2 + (c t^2 - w)^2, i.e. the feet
    of normals from (u, w) to the curve w = c t^2.
    """
    a3 = 2.0 * c * c
    P = (1.0 - 2.0 * c * w) / a3
    Q = -u / a3
    disc = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    roots = np.full(u.shape + (3,), np.nan)
    one = disc >= 0.0
    if np.any(one):
        s = np.sqrt(disc[one])
        q, p = Q[one], P[one]
        C = np.cbrt(-q / 2.0 - np.copysign(s, q))
        safe = np.where(C != 0.0, C, 1.0)
        roots[one, 0] = np.where(C != 0.0, C - p / (3.0 * safe), 0.0)
    three = ~one
    if np.any(three):
        p, q = P[three], Q[three]
        mag = 2.0 * np.sqrt(-p / 3.0)
        arg = np.clip(3.0 * q / (p * mag), -1.0, 1.0)
        phi = np.arccos(arg) / 3.0
        for k in range(3):
            roots[three, k] = mag * np.cos(phi - 2.0 * np.pi * k / 3.0)
    coef1 = (1.0 - 2.0 * c * w)[:, None]
    for _ in range(3):
        f = a3 * roots ** 3 + coef1 * roots - u[:, None]
        fp = 3.0 * a3 * roots ** 2 + coef1
        step = np.where(np.abs(fp) > 1e-300, f / np.where(fp != 0, fp, 1.0), 0.0)
        roots = roots - step
    return roots


@dataclass(frozen=True, eq=False)
class Parabola(SetSpec):
    """Smooth parabolic region in the (axes[0], axes[1]) coordinate plane.

    With u = x[i] - vertex[i] and w = x[j] - vertex[j]: ``parabola_epigraph``
    is {w >= coef u^2}, ``parabola_hypograph`` is {w <= coef u^2} and
    ``parabola`` is the curve {w = coef u^2}. Other coordinates are free.
    """

    name: str
    coef: float
    vertex: np.ndarray
    axes: tuple = (0, 1)

    kind = "region"

    def __post_init__(self):
        if self.name not in _PARABOLA_NAMES:
            raise SetFormatError(f"unknown region {self.name!r}")
        if not self.coef > 0:
            raise SetFormatError("parabola coefficient must be positive")
        v = as_vector(self.vertex, what="vertex")
        i, j = (int(k) for k in self.axes)
        if i == j or not (0 <= i < v.size and 0 <= j < v.size):
            raise SetFormatError("parabola axes must be two distinct coordinates")
        object.__setattr__(self, "vertex", v)
        object.__setattr__(self, "axes", (i, j))
        object.__setattr__(self, "coef", float(self.coef))

    @property
    def convex(self):
        return self.name == "parabola_epigraph"

    @property
    def dim(self):
        return self.vertex.size

    def _uw(self, X):
        i, j = self.axes
        return X[:, i] - self.vertex[i], X[:, j] - self.vertex[j]

    def _feet(self, X):
        """Candidate feet (m, 3, n) and squared distances (m, 3)."""
        u, w = self._uw(X)
        t = _parabola_roots(u, w, self.coef)
        i, j = self.axes
        F = np.repeat(X[:, None, :], 3, axis=1)
        F[:, :, i] = self.vertex[i] + t
        F[:, :, j] = self.vertex[j] + self.coef * t ** 2
        d = np.sum((F - X[:, None, :]) ** 2, axis=2)
        d = np.where(np.isnan(d), np.inf, d)
        return F, d

    def _inside(self, X):
        u, w = self._uw(X)
        g = w - self.coef * u ** 2
        if self.name == "parabola_epigraph":
            return g >= 0.0
        if self.name == "parabola_hypograph":
            return g <= 0.0
        return np.zeros(X.shape[0], dtype=bool)

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        out = X.copy()
        outside = ~self._inside(X)
        if np.any(outside):
            F, d = self._feet(X[outside])
            k = np.argmin(d, axis=1)
            out[outside] = F[np.arange(F.shape[0]), k]
        return out

    def candidates(self, x):
        X = x[None, :]
        if self._inside(X)[0]:
            return [x.copy()]
        F, d = self._feet(X)
        dist = np.sqrt(d[0])
        best = np.min(dist)
        return _dedup([F[0, k] for k in range(3) if dist[k] <= best + TIE_TOL])

    def generators(self, a):
        i, j = self.axes
        u, w = a[i] - self.vertex[i], a[j] - self.vertex[j]
        if abs(w - self.coef * u * u) > MEMBERSHIP_TOL:
            return np.zeros((0, self.dim))
        up = np.zeros(self.dim)
        up[i], up[j] = -2.0 * self.coef * u, 1.0
        up = _unit(up)
        if self.name == "parabola_epigraph":
            return -up[None, :]
        if self.name == "parabola_hypograph":
            return up[None, :]
        return np.vstack([up, -up])

    def translate(self, v):
        return Parabola(self.name, self.coef, self.vertex + as_vector(v, self.dim), self.axes)

    def scale(self, c):
        return Parabola(self.name, self.coef / c, c * self.vertex, self.axes)

    def to_dict(self):
        return {"type": "region", "name": self.name, "coef": self.coef,
                "vertex": self.vertex.tolist(), "axes": list(self.axes)}


@dataclass(frozen=True, eq=False)
class Union(SetSpec):
    members: tuple

    kind = "union"

    def __post_init__(self):
        ms = tuple(self.members)
        if not ms:
            raise SetFormatError("union needs at least one member")
        _check_same_dim(ms)
        object.__setattr__(self, "members", ms)

    @property
    def convex(self):
        return len(self.members) == 1 and self.members[0].convex

    @property
    def dim(self):
        return self.members[0].dim

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        P = np.stack([m.nearest(X) for m in self.members])
        d = np.sum((P - X[None]) ** 2, axis=2)
        k = np.argmin(d, axis=0)
        return P[k, np.arange(X.shape[0])]

    def candidates(self, x):
        pts = [p for m in self.members for p in m.candidates(x)]
        dist = [float(np.linalg.norm(x - p)) for p in pts]
        best = min(dist)
        return _dedup([p for p, d in zip(pts, dist) if d <= best + TIE_TOL])

    def generators(self, a):
        active = [m for m in self.members if m.distances(a[None, :])[0] <= MEMBERSHIP_TOL]
        fans = [m.generators(a) for m in active]
        if len(fans) == 1:
            return fans[0]
        # a direction is proximal for the union only if it is proximal for
        # every branch that contains a
        keep = [g for F in fans for g in F
                if all(cone_distance(g, H) <= 1e-9 for H in fans)]
        return prune_generators(_stack(keep, self.dim)) if keep else np.zeros((0, self.dim))

    def translate(self, v):
        return Union(tuple(m.translate(v) for m in self.members))

    def scale(self, c):
        return Union(tuple(m.scale(c) for m in self.members))

    def to_dict(self):
        return {"type": "union", "members": [m.to_dict() for m in self.members]}


@dataclass(frozen=True, eq=False)
class Intersection(SetSpec):
    """Intersection of members.

    All-polyhedral members (affine, half-space, polyhedron) are merged into a
    single exact polyhedron. Other convex members are handled by Dykstra's
    algorithm. Nonconvex members are rejected when projecting.
    """

    members: tuple
    check: bool = True

    kind = "intersection"

    def __post_init__(self):
        ms = tuple(self.members)
        if not ms:
            raise SetFormatError("intersection needs at least one member")
        _check_same_dim(ms)
        object.__setattr__(self, "members", ms)
        rows = [m.polyhedral_rows() for m in ms]
        if all(r is not None for r in rows):
            A = np.vstack([r[0] for r in rows])
            b = np.concatenate([r[1] for r in rows])
            object.__setattr__(self, "_poly", Polyhedron(A, b, self.check))
        else:
            object.__setattr__(self, "_poly", None)

    @property
    def convex(self):
        return all(m.convex for m in self.members)

    @property
    def dim(self):
        return self.members[0].dim

    def nearest(self, X):
        X = _as_rows(X, self.dim)
        if self._poly is not None:
            return self._poly.nearest(X)
        if not self.convex:
            raise UnsupportedSetError(
                "projection onto an intersection with nonconvex members is not supported")
        return _dykstra(self.members, X)

    def generators(self, a):
        if self._poly is not None:
            return self._poly.generators(a)
        G = [g for m in self.members
             if m.distances(a[None, :])[0] <= MEMBERSHIP_TOL for g in m.generators(a)]
        return prune_generators(_stack(G, self.dim)) if G else np.zeros((0, self.dim))

    def translate(self, v):
        return Intersection(tuple(m.translate(v) for m in self.members), False)

    def scale(self, c):
        return Intersection(tuple(m.scale(c) for m in self.members), False)

    def polyhedral_rows(self):
        return None if self._poly is None else (self._poly.A, self._poly.b)

    def to_dict(self):
        return {"type": "intersection", "members": [m.to_dict() for m in self.members]}


def _check_same_dim(members):
    d = members[0].dim
    for m in members[1:]:
        if m.dim != d:
            raise DimensionMismatchError(d, m.dim, "member set")


def _dykstra(members, X, iters: int = 5000, tol: float = 1e-15):
    Y = X.copy()
    incs = [np.zeros_like(X) for _ in members]
    scale = 1.0 + float(np.max(np.abs(X))) if X.size else 1.0
    for _ in range(iters):
        prev = Y
        for k, S in enumerate(members):
            Z = Y + incs[k]
            Y = S.nearest(Z)
            incs[k] = Z - Y
        if np.max(np.abs(Y - prev)) <= tol * scale:
            break
    return Y


# ---------------------------------------------------------------------------
# public oracles


def project(S: SetSpec, x) -> list[np.ndarray]:
    """All nearest points of S to x (ties materialised, sorted)."""
    x = as_vector(x, S.dim)
    pts = S.candidates(x)
    return sorted(pts, key=lambda p: tuple(p))


def distance(S: SetSpec, x) -> float:
    x = as_vector(x, S.dim)
    return float(S.distances(x[None, :])[0])


def proximal_normals(S: SetSpec, a) -> np.ndarray:
    """Unit generators (rows) of the proximal normal cone of S at a."""
    a = as_vector(a, S.dim)
    gap = distance(S, a)
    if gap > MEMBERSHIP_TOL:
        raise NotInSetError(a, gap)
    return S.generators(a)


@dataclass(frozen=True)
class FrechetProbe:
    """Empirical sup of <v, y - a>/|y - a| over sampled y near a."""

    value: float
    n_points: int
    degenerate: bool

    def __float__(self):
        return self.value


def frechet_normal_residual(S: SetSpec, a, v, probe_radius: float, probe_count: int,
                            seed: int = 0) -> FrechetProbe:
    if probe_count <= 0:
        raise ValueError("probe_count must be positive")
    a = as_vector(a, S.dim)
    v = as_vector(v, S.dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return FrechetProbe(0.0, 0, False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        pts = sample_set_points(S, a, probe_radius, probe_count, seed)
    D = np.array([p - a for p in pts]).reshape(-1, S.dim)
    r = np.linalg.norm(D, axis=1)
    D, r = D[r > 1e-14 * max(1.0, probe_radius)], r[r > 1e-14 * max(1.0, probe_radius)]
    if D.shape[0] == 0:
        return FrechetProbe(0.0, 0, True)
    val = float(np.max(D @ (v / nv) / r))
    return FrechetProbe(max(val, 0.0), int(D.shape[0]), False)


def sample_set_points(S: SetSpec, center, radius: float, count: int, seed: int,
                      rounds: int = 4) -> list[np.ndarray]:
    """Points of S inside the closed ball B_radius(center).

    Quasi-random ambient points of the ball are projected onto S and kept when
    the projection stays in the ball.
    """
    center = as_vector(center, S.dim)
    if count <= 0:
        return []
    kept: list[np.ndarray] = []
    for k in range(rounds):
        Y = center + radius * ball_points(S.dim, 2 * count, derive_seed(seed, "set-points", k))
        P = S.nearest(Y)
        ok = np.linalg.norm(P - center, axis=1) <= radius * (1 + 1e-12)
        kept.extend(P[ok])
        if len(kept) >= count:
            return kept[:count]
    warnings.warn(f"only {len(kept)} of {count} set points found near center",
                  SamplingWarning, stacklevel=2)
    return kept


# ---------------------------------------------------------------------------
# serialisation


def set_from_dict(d: dict) -> SetSpec:
    if not isinstance(d, dict) or "type" not in d:
        raise SetFormatError("set description must be an object with a 'type' field")
    t = d["type"]
    try:
        if t == "affine":
            bp = as_vector(d["basepoint"], what="basepoint")
            basis = np.asarray(d.get("basis", []), dtype=float).reshape(-1, bp.size)
            return Affine(bp, basis)
        if t == "point":
            return Affine(as_vector(d["point"], what="point"))
        if t == "halfspace":
            return HalfSpace(d["normal"], d["offset"])
        if t == "ball":
            return Ball(d["center"], d["radius"])
        if t == "sphere":
            return Sphere(d["center"], d["radius"])
        if t == "polyhedron":
            hs = [HalfSpace(h["normal"], h["offset"]) for h in d["halfspaces"]]
            return Polyhedron.from_halfspaces(hs)
        if t == "region":
            return Parabola(d["name"], d["coef"], d["vertex"], tuple(d.get("axes", (0, 1))))
        if t == "union":
            return Union(tuple(set_from_dict(m) for m in d["members"]))
        if t == "intersection":
            return Intersection(tuple(set_from_dict(m) for m in d["members"]))
    except (KeyError, TypeError) as exc:
        raise SetFormatError(f"bad {t!r} description: {exc}") from exc
    raise SetFormatError(f"unknown set type {t!r}")


def set_to_dict(S: SetSpec) -> dict:
    return S.to_dict()


def load_set(path) -> SetSpec:
    try:
        return set_from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise SetFormatError(f"{path}: {exc}") from exc


def dump_set(S: SetSpec, path) -> None:
    Path(path).write_text(json.dumps(S.to_dict(), indent=2))


# convenience constructors used by the corpus and tests


def line(direction, through=None) -> Affine:
    d = _unit(as_vector(direction))
    p = np.zeros(d.size) if through is None else as_vector(through, d.size)
    return Affine(p, d[None, :])


def point(p) -> Affine:
    return Affine(as_vector(p))
