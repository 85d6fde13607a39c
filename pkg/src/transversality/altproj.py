"""Alternating projections and a per-cycle linear-rate fit.

One cycle projects onto B, then onto A. Nonconvex ties resolve to the
lexicographically smallest nearest point, so runs are deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .sampling import ball_points, derive_seed
from .scene import Scene
from .sets import SetSpec, as_vector, project


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Points x0, b0, a1, b1, ... and the residual after every full cycle.

    ``residuals[k]`` is max{dist(., A), dist(., B)} at the point reached
    after k cycles (``residuals[0]`` is measured at x0).
    ``step_residuals`` has one entry per stored point.
    """

    points: np.ndarray
    residuals: np.ndarray
    step_residuals: np.ndarray
    converged: bool
    limit: np.ndarray | None = None
    labels: tuple = field(default=())

    @property
    def cycles(self) -> int:
        return len(self.residuals) - 1

    def to_csv(self, path) -> None:
        n = self.points.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "label", *[f"x{i}" for i in range(n)], "residual"])
            for k, (p, r) in enumerate(zip(self.points, self.step_residuals)):
                w.writerow([k, self.labels[k], *[repr(float(v)) for v in p], repr(float(r))])


def _proj(S: SetSpec, x: np.ndarray) -> np.ndarray:
    return project(S, x)[0]


def _residual(A: SetSpec, B: SetSpec, x: np.ndarray) -> float:
    X = x[None, :]
    return float(max(A.distances(X)[0], B.distances(X)[0]))


def run_ap(scene: Scene, x0, max_iter: int = 200, tol: float = 1e-12) -> Trajectory:
    """Run up to ``max_iter`` B-then-A cycles from x0, stopping once the residual is below tol."""
    if max_iter < 1:
        raise PreconditionError("max_iter must be at least 1")
    A, B = scene.A, scene.B
    if not np.all(np.isfinite(np.asarray(x0, dtype=float))):
        raise PreconditionError("x0 must be finite")
    x = as_vector(x0, scene.dim, "x0")
    points, labels = [x], ["x"]
    steps = [_residual(A, B, x)]
    cycle = [steps[0]]
    converged = cycle[0] < tol
    while not converged and len(cycle) <= max_iter:
        b = _proj(B, x)
        points.append(b)
        labels.append("b")
        steps.append(_residual(A, B, b))
        if steps[-1] < tol:
            # landed in both sets half-way through the cycle
            x = b
            cycle.append(steps[-1])
            converged = True
            break
        x = _proj(A, b)
        points.append(x)
        labels.append("a")
        steps.append(_residual(A, B, x))
        cycle.append(steps[-1])
        converged = cycle[-1] < tol
    return Trajectory(np.array(points), np.array(cycle), np.array(steps), converged,
                      x.copy() if converged else None, tuple(labels))


def estimate_linear_rate(traj: Trajectory, burn_in: int = 0) -> float | None:
    """Per-cycle rate exp(slope) of a least-squares fit to log residuals after burn_in.

    Returns None when a fitted residual is exactly zero (finite
    termination, so no linear rate exists). The value is clipped to [0, 1].
    """
    r = np.asarray(traj.residuals, dtype=float)
    if burn_in < 0 or r.size < burn_in + 3:
        raise PreconditionError(f"need at least {burn_in + 3} cycle residuals, have {r.size}")
    r = r[burn_in:]
    if np.any(r == 0.0):
        return None
    slope = np.polyfit(np.arange(r.size, dtype=float), np.log(r), 1)[0]
    return float(np.clip(np.exp(slope), 0.0, 1.0))


def local_rates(scene: Scene, radius: float, count: int = 8, seed: int = 0,
                max_iter: int = 60, tol: float = 1e-13, burn_in: int = 2) -> list[float | None]:
    """Rates from ``count`` starting points in B(xbar, radius); short runs count as finite termination."""
    U = ball_points(scene.dim, count, derive_seed(seed, "ap-starts"))
    out = []
    for u in U:
        traj = run_ap(scene, scene.xbar + radius * u, max_iter, tol)
        if traj.residuals.size < burn_in + 3:
            out.append(None if traj.converged else 1.0)
            continue
        tail = traj.residuals[burn_in:]
        # drop the round-off floor reached by fast runs
        keep = tail > 1e3 * tol
        if keep.sum() < 3:
            out.append(None if traj.converged else 1.0)
            continue
        trimmed = Trajectory(traj.points, tail[keep], traj.step_residuals, traj.converged,
                             traj.limit, traj.labels)
        out.append(estimate_linear_rate(trimmed))
    return out
