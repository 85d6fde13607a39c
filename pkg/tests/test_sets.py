import json
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from strategies import any_sets, brute_force_nearest, convex_sets, dense_affine_union, vectors
from transversality.errors import (
    DimensionMismatchError,
    NotInSetError,
    SamplingWarning,
    SetFormatError,
    UnsupportedSetError,
)
from transversality.sets import (
    Ball,
    HalfSpace,
    Intersection,
    Parabola,
    Polyhedron,
    Sphere,
    Union,
    distance,
    dump_set,
    frechet_normal_residual,
    line,
    load_set,
    point,
    project,
    proximal_normals,
    sample_set_points,
    set_from_dict,
)

X_AXIS = line([1.0, 0.0])
Y_AXIS = line([0.0, 1.0])
AXES = Union((X_AXIS, Y_AXIS))


class TestProject:
    def test_halfspace(self):
        H = HalfSpace([0.0, 1.0], 0.0)
        (p,) = project(H, [3.0, 2.0])
        np.testing.assert_allclose(p, [3.0, 0.0])

    def test_ball_radial(self):
        (p,) = project(Ball([0.0, 0.0], 1.0), [2.0, 0.0])
        np.testing.assert_allclose(p, [1.0, 0.0])

    def test_union_tie_matches_brute_force(self):
        x = np.array([1.0, 1.0])
        cloud = dense_affine_union([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        d = np.linalg.norm(cloud - x, axis=1)
        oracle = cloud[d <= d.min() + 1e-9]
        got = project(AXES, x)
        assert len(got) == 2
        for p in got:
            assert np.min(np.linalg.norm(oracle - p, axis=1)) < 1e-9
        np.testing.assert_allclose(got, [[0.0, 1.0], [1.0, 0.0]])

    def test_convex_returns_single_point(self):
        assert len(project(Ball([0, 0], 1.0), [0.3, 5.0])) == 1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            project(X_AXIS, [1.0, 2.0, 3.0])

    def test_nonconvex_intersection_unsupported(self):
        S = Intersection((Sphere([0, 0], 1.0), HalfSpace([0, 1], 0.0)))
        with pytest.raises(UnsupportedSetError):
            project(S, [0.2, 0.2])

    def test_polyhedron_against_slsqp(self, rng):
        P = Polyhedron([[1, 1], [-1, 2], [0, -1]], [1.0, 2.0, 0.5])
        for _ in range(20):
            x = rng.uniform(-3, 3, 2)
            res = minimize(lambda y: np.sum((y - x) ** 2), np.zeros(2), method="SLSQP",
                           constraints={"type": "ineq", "fun": lambda y: P.b - P.A @ y},
                           options={"ftol": 1e-14, "maxiter": 500})
            (p,) = project(P, x)
            np.testing.assert_allclose(p, res.x, atol=1e-6)

    def test_parabola_against_dense_curve(self, rng):
        S = Parabola("parabola", 1.0, np.zeros(2), (0, 1))
        t = np.linspace(-3, 3, 600001)
        cloud = np.column_stack([t, t * t])
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, 2)
            _, d = brute_force_nearest(cloud, x)
            assert distance(S, x) == pytest.approx(d, abs=1e-5)

    def test_parabola_axis_point_has_two_feet(self):
        # a point on the axis above the focus has two mirror-image nearest points
        pts = project(Parabola("parabola", 1.0, np.zeros(2), (0, 1)), [0.0, 2.0])
        assert len(pts) == 2
        np.testing.assert_allclose(pts[0][0], -pts[1][0])


class TestDistance:
    def test_axis(self):
        assert distance(X_AXIS, [5.0, -3.0]) == pytest.approx(3.0)

    def test_member_is_zero(self):
        assert distance(Ball([0, 0], 1.0), [0.2, 0.1]) == 0.0

    def test_union_brute_force(self):
        x = np.array([1.0, 2.0])
        cloud = dense_affine_union([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        _, d = brute_force_nearest(cloud, x)
        assert distance(AXES, x) == pytest.approx(d, abs=1e-9)
        assert distance(AXES, x) == pytest.approx(1.0)


class TestProximalNormals:
    def test_axis(self):
        G = proximal_normals(X_AXIS, [1.0, 0.0])
        assert sorted(map(tuple, np.round(G, 12))) == [(0.0, -1.0), (0.0, 1.0)]

    def test_sphere_both_radial_directions(self):
        G = proximal_normals(Sphere([0, 0], 1.0), [1.0, 0.0])
        assert sorted(map(tuple, np.round(G, 12))) == [(-1.0, 0.0), (1.0, 0.0)]

    def test_union_corner_is_trivial(self):
        # oracle: only the origin itself projects onto the origin over a fine grid
        g = np.linspace(-1, 1, 201)
        grid = np.array([[u, v] for u in g for v in g])
        hits = [y for y in grid if any(np.allclose(p, 0.0) for p in project(AXES, y))]
        assert all(np.allclose(y, 0.0) for y in hits)
        assert proximal_normals(AXES, [0.0, 0.0]).shape[0] == 0

    def test_not_in_set(self):
        with pytest.raises(NotInSetError):
            proximal_normals(X_AXIS, [0.0, 1.0])

    def test_polyhedron_vertex_extreme_rays(self):
        quadrant = Polyhedron([[-1, 0], [0, -1]], [0.0, 0.0])
        G = proximal_normals(quadrant, [0.0, 0.0])
        assert sorted(map(tuple, np.round(G, 12))) == [(-1.0, 0.0), (0.0, -1.0)]


class TestFrechet:
    def test_orthogonal_direction(self):
        assert float(frechet_normal_residual(X_AXIS, [0, 0], [0, 1], 0.5, 64)) == pytest.approx(0.0, abs=1e-12)

    def test_tangent_direction(self):
        assert float(frechet_normal_residual(X_AXIS, [0, 0], [1, 0], 0.5, 64)) == pytest.approx(1.0)

    def test_parabola_shrinks_with_radius(self):
        # oracle: sup over the curve of -u^2 / sqrt(u^2 + u^4) is 0, attained in the limit
        S = Parabola("parabola", 1.0, np.zeros(2), (0, 1))
        vals = [float(frechet_normal_residual(S, [0, 0], [0, -1], r, 200)) for r in (0.5, 0.05)]
        assert all(v >= 0 for v in vals)
        assert vals[1] <= vals[0] + 1e-12 and vals[1] < 0.05

    def test_zero_probe_count(self):
        with pytest.raises(ValueError):
            frechet_normal_residual(X_AXIS, [0, 0], [0, 1], 0.5, 0)

    def test_degenerate_flag(self):
        probe = frechet_normal_residual(point([0.0, 0.0]), [0, 0], [1, 0], 0.5, 16)
        assert probe.degenerate


class TestSampleSetPoints:
    def test_axis_shape(self):
        pts = sample_set_points(X_AXIS, [0, 0], 1.0, 3, seed=7)
        assert len(pts) == 3
        for p in pts:
            assert p[1] == 0.0 and abs(p[0]) < 1.0

    def test_ball_window(self):
        pts = sample_set_points(Ball([0, 0], 1.0), [1.0, 0.0], 0.1, 50, seed=1)
        for p in pts:
            assert np.linalg.norm(p - [1.0, 0.0]) <= 0.1 + 1e-12
            assert np.linalg.norm(p) <= 1.0 + 1e-12

    def test_slab_intersection_is_axis(self):
        S = Intersection((HalfSpace([0, 1], 0.0), HalfSpace([0, -1], 0.0)))
        pts = sample_set_points(S, [0, 0], 1.0, 40, seed=3)
        assert pts and all(abs(p[1]) <= 1e-12 for p in pts)

    def test_deterministic(self):
        a = sample_set_points(Ball([0, 0], 1.0), [0, 0], 2.0, 20, seed=5)
        b = sample_set_points(Ball([0, 0], 1.0), [0, 0], 2.0, 20, seed=5)
        np.testing.assert_array_equal(a, b)

    def test_sparse_window_warns(self):
        # the window misses the set, so every projection lands outside it
        with pytest.warns(SamplingWarning):
            assert sample_set_points(X_AXIS, [0, 5], 1.0, 5, seed=0) == []


class TestSerialisation:
    @pytest.mark.parametrize("S", [X_AXIS, HalfSpace([0, 2], 1.0), Ball([1, 2], 0.5), Sphere([0, 0], 2.0),
                                   Polyhedron([[1, 0], [0, 1]], [1, 1]),
                                   Parabola("parabola_epigraph", 2.0, [0, 0], (0, 1)), AXES,
                                   Intersection((HalfSpace([0, 1], 0), Ball([0, 0], 1.0)))])
    def test_roundtrip(self, S, tmp_path, rng):
        dump_set(S, tmp_path / "s.json")
        T = load_set(tmp_path / "s.json")
        X = rng.uniform(-2, 2, (25, 2))
        np.testing.assert_allclose(T.distances(X), S.distances(X), atol=1e-12)

    @pytest.mark.parametrize("doc", [{"kind": "ball"}, {"type": "torus"}, {"type": "ball", "center": [0, 0]},
                                     {"type": "polyhedron", "halfspaces": [
                                         {"normal": [1, 0], "offset": -1}, {"normal": [-1, 0], "offset": -1}]}])
    def test_bad_documents(self, doc):
        with pytest.raises(SetFormatError):
            set_from_dict(doc)

    def test_malformed_json(self, tmp_path):
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(SetFormatError):
            load_set(tmp_path / "bad.json")

    def test_document_is_plain_json(self):
        json.dumps(AXES.to_dict())


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(S=any_sets(), x=vectors(2))
def test_idempotence(S, x):
    for p in project(S, x):
        assert distance(S, p) <= 1e-12 * max(1.0, np.linalg.norm(p))
        assert any(np.allclose(q, p, atol=1e-12) for q in project(S, p))


@settings(max_examples=60, deadline=None)
@given(S=any_sets(), x=vectors(2))
def test_distance_consistency(S, x):
    d = distance(S, x)
    for p in project(S, x):
        assert np.linalg.norm(x - p) == pytest.approx(d, rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(S=convex_sets(), x=vectors(2), seed=st.integers(0, 1000))
def test_convex_normal_cone_inequality(S, x, seed):
    (a,) = project(S, x)
    G = proximal_normals(S, a)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SamplingWarning)
        ys = sample_set_points(S, a, 2.0, 40, seed)
    for v in G:
        for y in ys:
            assert float(v @ (y - a)) <= 1e-10 * max(1.0, np.linalg.norm(y - a))


def _certified(S, a, v):
    # bisection over t for a in project(S, a + t v)
    lo, hi = 0.0, 1.0
    for _ in range(40):
        t = 0.5 * (lo + hi)
        if any(np.allclose(p, a, atol=1e-9) for p in project(S, a + t * v)):
            return True
        hi = t
    return False


@settings(max_examples=50, deadline=None)
@given(S=any_sets(), x=vectors(2))
def test_proximal_certificate(S, x):
    for a in project(S, x):
        for v in proximal_normals(S, a):
            assert abs(np.linalg.norm(v) - 1.0) < 1e-12
            assert _certified(S, a, v)
