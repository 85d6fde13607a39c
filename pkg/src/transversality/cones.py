"""Samplers for relative limiting normal pairs and their restricted variant.

Both samplers walk the radius schedule. At every radius they collect unit
direction pairs (u1, u2) with u1 in N_A(a), u2 in N_B(b), a in A minus B,
b in B minus A, and exact alignment with x - a and x - b:

* relative: rays shot with a distance ratio of 1 + eta_k (eta_k = 2^-(k+1))
  from either set, plus projection configurations whose ratio lies in the
  same band;
* restricted: rays shot to exact equidistance from either set.

Direction pairs found at the smallest radius stand in for accumulation
points. They are merged greedily at mesh 1e-2 and expanded onto the slice
|x1*| + |x2*| = 1 as (t u1, (1 - t) u2) over an interior t-grid. Every
stored pair keeps a per-radius sequence: among configurations whose
direction pair lies within a mesh of the best match, the one farthest from
xbar.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .configs import _projection_configs, _ray_configs
from .constructions import bisector_foot, rescale_normals
from .errors import MissingSequenceError, PreconditionError
from .sampling import ball_points, derive_seed
from .scene import RadiusSchedule, Scene
from .sets import MEMBERSHIP_TOL, cone_distance

MESH = 1e-2
T_GRID = np.linspace(0.0, 1.0, 101)[1:-1]
IN_C_TOL = 1e-9
DEGENERATE_OFFSET = 1e-4
KINDS = ("relative", "restricted")


@dataclass(frozen=True, eq=False)
class GeneratingSequence:
    """Per-radius (a_k, b_k, x_k) with unit normals u1_k, u2_k (rows indexed by k)."""

    radii: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}


@dataclass(frozen=True, eq=False)
class SlicePair:
    x1s: np.ndarray
    x2s: np.ndarray
    sequence: GeneratingSequence | None = None


@dataclass(frozen=True, eq=False)
class ConeSample:
    """Slice-normalised pairs; ``provenance[i]`` indexes ``sequences``."""

    basepoint: np.ndarray
    kind: str
    x1s: np.ndarray
    x2s: np.ndarray
    provenance: np.ndarray
    sequences: tuple = ()
    in_C: np.ndarray = field(default=None)
    directions: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.in_C is None:
            object.__setattr__(self, "in_C", _inner(self.x1s, self.x2s) <= IN_C_TOL)

    def __len__(self) -> int:
        return int(self.x1s.shape[0])

    @property
    def pairs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.x1s, self.x2s))

    def pair(self, i: int) -> SlicePair:
        seq = self.sequences[int(self.provenance[i])] if self.sequences else None
        return SlicePair(self.x1s[i], self.x2s[i], seq)

    def stacked(self) -> np.ndarray:
        return np.hstack([self.x1s, self.x2s])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "basepoint": self.basepoint.tolist(),
            "pairs": [[p.tolist(), q.tolist()] for p, q in zip(self.x1s, self.x2s)],
            "in_C": [bool(v) for v in self.in_C],
            "provenance": [int(v) for v in self.provenance],
            "sequences": [s.to_dict() for s in self.sequences],
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _inner(P, Q) -> np.ndarray:
    return np.sum(P * Q, axis=1) if len(P) else np.zeros(0)


def _unit_rows(V):
    n = np.linalg.norm(V, axis=1, keepdims=True)
    return V / np.where(n > 0, n, 1.0)


def _empty(scene: Scene, kind: str) -> ConeSample:
    z = np.zeros((0, scene.dim))
    return ConeSample(scene.xbar.copy(), kind, z, z.copy(), np.zeros(0, dtype=int), ())


def _radius_records(scene: Scene, radius: float, k: int, kind: str, U: np.ndarray):
    """(a, b, x) rows with exact alignment for one radius of the chosen sampler."""
    A, B, c = scene.A, scene.B, scene.xbar
    seeds = c + 0.5 * radius * U
    eta = 2.0 ** -(k + 1)
    factor = 1.0 if kind == "restricted" else 1.0 + eta
    cfgs = _ray_configs(A, B, seeds, c, radius, "rayA", factor)
    cfgs += _ray_configs(B, A, seeds, c, radius, "rayB", factor)
    if kind == "relative":
        for cf in _projection_configs(scene, c + radius * U, radius):
            ratio = np.linalg.norm(cf.x - cf.a) / np.linalg.norm(cf.x - cf.b)
            if 1.0 / factor <= ratio <= factor:
                cfgs.append(cf)
    if not cfgs:
        return None
    a = np.array([cf.a for cf in cfgs])
    b = np.array([cf.b for cf in cfgs])
    x = np.array([cf.x for cf in cfgs])
    keep = (B.distances(a) > MEMBERSHIP_TOL) & (A.distances(b) > MEMBERSHIP_TOL)
    # offsets this small only carry rounding noise relative to |xbar|
    floor = DEGENERATE_OFFSET * radius
    keep &= (np.linalg.norm(x - a, axis=1) > floor) & (np.linalg.norm(x - b, axis=1) > floor)
    if not keep.any():
        return None
    a, b, x = a[keep], b[keep], x[keep]
    return a, b, x, _unit_rows(x - a), _unit_rows(x - b)


def _greedy(D: np.ndarray, mesh: float) -> list:
    D = D[np.lexsort(D.T[::-1])]
    kept = []
    for row in D:
        if not kept or np.min(np.linalg.norm(np.asarray(kept) - row, axis=1)) > mesh:
            kept.append(row)
    return kept


def merge_directions(D: np.ndarray, mesh: float = MESH) -> np.ndarray:
    """Greedy single pass over lexicographically sorted rows (u1, u2).

    Keeps a row when it is farther than mesh from every kept row. Rows with
    <u1, u2> <= 0 are merged among themselves first so that C never loses
    a representative to a nearby pair outside it.
    """
    if D.shape[0] == 0:
        return D
    n = D.shape[1] // 2
    inC = np.sum(D[:, :n] * D[:, n:], axis=1) <= IN_C_TOL
    return np.asarray(_greedy(D[inC], mesh) + _greedy(D[~inC], mesh)).reshape(-1, D.shape[1])


def _sample(scene: Scene, sched: RadiusSchedule, kind: str) -> ConeSample:
    U = ball_points(scene.dim, sched.samples_per_radius, derive_seed(sched.seed, "cones"))
    records = [_radius_records(scene, r, k, kind, U) for k, r in enumerate(sched.radii)]
    last = records[-1]
    if last is None:
        return _empty(scene, kind)
    n = scene.dim
    reps = merge_directions(np.hstack([last[3], last[4]]))
    trees = [None if rec is None else cKDTree(np.hstack([rec[3], rec[4]])) for rec in records]
    sequences = []
    for d in reps:
        rows, radii = [], []
        for r, rec, tree in zip(sched.radii, records, trees):
            if rec is None:
                continue
            dmin, _ = tree.query(d)
            near = np.asarray(tree.query_ball_point(d, dmin + MESH), dtype=int)
            near.sort()
            # the farthest of the near matches keeps the sequence on the radius scale
            j = near[np.argmax(np.linalg.norm(rec[2][near] - scene.xbar, axis=1))]
            rows.append([rec[i][j] for i in range(5)])
            radii.append(r)
        cols = [np.array([row[i] for row in rows]) for i in range(5)]
        sequences.append(GeneratingSequence(np.array(radii), *cols))
    m, nt = reps.shape[0], T_GRID.size
    t = np.tile(T_GRID, m)[:, None]
    x1s = t * np.repeat(reps[:, :n], nt, axis=0)
    x2s = (1.0 - t) * np.repeat(reps[:, n:], nt, axis=0)
    prov = np.repeat(np.arange(m), nt)
    return ConeSample(scene.xbar.copy(), kind, x1s, x2s, prov, tuple(sequences), directions=reps)


def sample_relative_cone(scene: Scene, sched: RadiusSchedule) -> ConeSample:
    """Slice pairs of relative limiting normals (ratio band 1 +/- eta_k, exact alignment)."""
    return _sample(scene, sched, "relative")


def sample_restricted_cone(scene: Scene, sched: RadiusSchedule) -> ConeSample:
    """Slice pairs of restricted relative limiting normals (exact equidistance and alignment)."""
    return _sample(scene, sched, "restricted")


def normalize_pair(x1s, x2s) -> tuple[np.ndarray, np.ndarray]:
    x1s, x2s = np.asarray(x1s, dtype=float), np.asarray(x2s, dtype=float)
    s = np.linalg.norm(x1s) + np.linalg.norm(x2s)
    if s == 0.0:
        raise PreconditionError("the zero pair has no slice representative")
    return x1s / s, x2s / s


def slice_distance(sample: ConeSample, x1s, x2s) -> float:
    """Distance from the slice representative of (x1s, x2s) to the nearest stored pair (inf if empty)."""
    if len(sample) == 0:
        return float("inf")
    p1, p2 = normalize_pair(x1s, x2s)
    d, _ = cKDTree(sample.stacked()).query(np.concatenate([p1, p2]))
    return float(d)


def restrict_to_C(sample: ConeSample, tol: float = IN_C_TOL) -> ConeSample:
    """Pairs with <x1*, x2*> <= tol. An empty result means no C-pair was sampled."""
    keep = _inner(sample.x1s, sample.x2s) <= tol
    return ConeSample(sample.basepoint, sample.kind, sample.x1s[keep], sample.x2s[keep],
                      sample.provenance[keep], sample.sequences, np.ones(int(keep.sum()), dtype=bool),
                      sample.directions)


def cone_min_sum_norm(sample: ConeSample) -> float:
    """min |x1* + x2*| over stored pairs; 1 on an empty sample."""
    if len(sample) == 0:
        return 1.0
    return float(np.min(np.linalg.norm(sample.x1s + sample.x2s, axis=1)))


def _one_sided(P: np.ndarray, Q: np.ndarray) -> float:
    """sup over rows of P of the distance to the nearest row of Q."""
    if P.shape[0] == 0:
        return 0.0
    if Q.shape[0] == 0:
        return float("inf")
    d, _ = cKDTree(Q).query(P)
    return float(np.max(d))


@dataclass(frozen=True)
class ConeComparison:
    discrepancy: float
    reverse_discrepancy: float
    off_C_discrepancy: float
    min_relative: float
    min_restricted: float
    tol: float
    norm_tol: float
    n_relative: int
    n_restricted: int
    C_nonempty: bool
    passed: bool
    scene: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_cones_on_C(rel: ConeSample, res: ConeSample, tol: float = 2 * MESH,
                       norm_tol: float = 0.03, scene: str = "") -> ConeComparison:
    """One-sided slice discrepancy of rel on C against res on C, and their C-restricted minima.

    Passes when the discrepancy is at most tol and the two minima agree
    within norm_tol. The reverse discrepancy and the off-C discrepancy are
    reported as data only.
    """
    if rel.basepoint.shape != res.basepoint.shape or not np.allclose(rel.basepoint, res.basepoint,
                                                                        atol=1e-12):
        raise PreconditionError("samples were taken at different basepoints")
    rc, sc = restrict_to_C(rel), restrict_to_C(res)
    disc = _one_sided(rc.stacked(), sc.stacked())
    rev = _one_sided(sc.stacked(), rc.stacked())
    off = _one_sided(rel.stacked()[~rel.in_C], res.stacked()) if len(rel) else 0.0
    m_rel, m_res = cone_min_sum_norm(rc), cone_min_sum_norm(sc)
    passed = disc <= tol and abs(m_rel - m_res) <= norm_tol
    return ConeComparison(disc, rev, off, m_rel, m_res, tol, norm_tol, len(rc), len(sc),
                          len(sc) > 0, bool(passed), scene)


@dataclass(frozen=True)
class OppositeReport:
    largest: float
    count: int
    tol: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def check_opposite_pairs(sample: ConeSample, tol: float = 2 * MESH) -> OppositeReport:
    """Largest |x*| with a stored pair within tol of (x*, -x*); 0 when none is."""
    if len(sample) == 0:
        return OppositeReport(0.0, 0, tol)
    gap = np.linalg.norm(sample.x1s + sample.x2s, axis=1) / np.sqrt(2.0)
    near = gap <= tol
    if not near.any():
        return OppositeReport(0.0, 0, tol)
    size = np.linalg.norm(sample.x1s[near] - sample.x2s[near], axis=1) / 2.0
    return OppositeReport(float(np.max(size)), int(near.sum()), tol)


@dataclass(frozen=True)
class SequenceReport:
    """Per-k residuals of the equidistant-alignment rebuild of one sampled pair.

    (ii) and (iii) are finite-k proxies: the final residual must not exceed
    the first one.
    """

    equidistance: list
    alignment: list
    basepoint_gap: list
    normal_gap: list
    cone_gap: list
    conditions: dict
    passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _not_increasing(series, atol=1e-12) -> bool:
    return bool(series[-1] <= series[0] * (1 + 1e-9) + atol)


def theorem2_sequence_check(scene: Scene, pair, sched: RadiusSchedule | None = None,
                            tol: float = 1e-10) -> SequenceReport:
    """Rebuild the sequence of a sampled C-pair on exactly equidistant points.

    Per k the point x_k moves to the foot x'_k on the bisector of [a_k, b_k]
    and the normals are turned onto x'_k - a_k and x'_k - b_k with their
    norms kept. Checks (i) equidistance and (iv) exact alignment to tol,
    and that the distances x'_k -> xbar, pair -> limit, and normal -> cone
    do not grow along k. ``sched`` may trim the sequence to its radii.
    """
    seq = getattr(pair, "sequence", None)
    if seq is None:
        raise MissingSequenceError("pair carries no generating sequence; sample it with a cone sampler")
    x1, x2 = np.asarray(pair.x1s, dtype=float), np.asarray(pair.x2s, dtype=float)
    if float(x1 @ x2) > IN_C_TOL:
        raise PreconditionError("pair lies outside C: <x1*, x2*> > 0")
    t = np.linalg.norm(x1) / (np.linalg.norm(x1) + np.linalg.norm(x2))
    idx = range(len(seq.radii))
    if sched is not None:
        wanted = set(np.round(sched.radii, 15))
        idx = [k for k in idx if np.round(seq.radii[k], 15) in wanted] or list(idx)
    eq, al, bp, ng, cg = [], [], [], [], []
    for k in idx:
        a, b, x = seq.a[k], seq.b[k], seq.x[k]
        xp = bisector_foot(a, b, x)
        y1, y2 = rescale_normals(a, b, xp, t * seq.u1[k], (1 - t) * seq.u2[k])
        da, db = np.linalg.norm(xp - a), np.linalg.norm(xp - b)
        eq.append(abs(da - db) / max(da, db))
        al.append(max(1 - float(y1 @ (xp - a)) / (np.linalg.norm(y1) * da),
                      1 - float(y2 @ (xp - b)) / (np.linalg.norm(y2) * db)))
        bp.append(float(np.linalg.norm(xp - scene.xbar)))
        ng.append(float(np.linalg.norm(np.concatenate([y1 - x1, y2 - x2]))))
        cg.append(max(cone_distance(y1, scene.A.generators(a)), cone_distance(y2, scene.B.generators(b))))
    cond = {
        "i_equidistance": bool(max(eq) <= tol),
        "ii_basepoint": _not_increasing(bp),
        "iii_normals": _not_increasing(ng, 1e-9) and _not_increasing(cg, 1e-9),
        "iv_alignment": bool(max(al) <= tol),
    }
    return SequenceReport(eq, al, bp, ng, cg, cond, all(cond.values()))


def write_comparison_csv(reports, path) -> None:
    """One row per ConeComparison."""
    cols = list(ConeComparison.__dataclass_fields__)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in reports:
            w.writerow([getattr(r, c) if not isinstance(getattr(r, c), float) else repr(getattr(r, c))
                        for c in cols])
