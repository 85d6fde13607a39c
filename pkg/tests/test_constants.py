import math

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import minimize_scalar

from strategies import unit_vectors
from transversality.configs import segment_min
from transversality.constants import (
    ALPHA_GRID,
    KINDS,
    ConstantEstimate,
    RadiusValue,
    check_orderings,
    estimate,
    estimate_itr,
    estimate_str,
    estimate_tr,
    intersection_distances,
)
from transversality.errors import IntersectionDistanceError
from transversality.primal import product_diag_distance
from transversality.scene import RadiusSchedule, Scene
from transversality.sets import HalfSpace, Sphere, line

INV_SQRT2 = 1 / math.sqrt(2)


def lines_scene(theta, dim=2):
    d = np.zeros(dim)
    d[0], d[1] = math.cos(theta), math.sin(theta)
    e = np.zeros(dim)
    e[0] = 1.0
    return Scene(line(e), line(d), np.zeros(dim), name=f"lines_{theta:.3f}")


def str_grid_oracle(theta, n=2001):
    """min over a polar grid of max(dist to the lines)/|x| for two lines through 0."""
    phi = np.linspace(0, 2 * np.pi, n)
    dA = np.abs(np.sin(phi))
    dB = np.abs(np.sin(phi - theta))
    return float(np.min(np.maximum(dA, dB)))


def fake(kind, value):
    return ConstantEstimate(kind, [RadiusValue(0.1, value, 1)], value, False)


class TestSegmentMin:
    @settings(max_examples=200, deadline=None)
    @given(u1=unit_vectors(3), u2=unit_vectors(3))
    def test_matches_grid_search(self, u1, u2):
        f = lambda t: np.linalg.norm(t * u1 + (1 - t) * u2)
        grid = np.linspace(0, 1, 20001)
        vals = np.linalg.norm(grid[:, None] * u1 + (1 - grid[:, None]) * u2, axis=1)
        t0 = grid[np.argmin(vals)]
        lo, hi = max(0.0, t0 - 1e-4), min(1.0, t0 + 1e-4)
        ref = min(f(lo), f(hi), minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                                 options={"xatol": 1e-14}).fun)
        val, t = segment_min(u1, u2)
        assert 0.0 <= t <= 1.0
        assert val == pytest.approx(ref, abs=1e-9)

    def test_orthogonal(self):
        assert segment_min(np.array([1.0, 0]), np.array([0, 1.0]))[0] == pytest.approx(INV_SQRT2)

    def test_opposite(self):
        assert segment_min(np.array([1.0, 0]), np.array([-1.0, 0]))[0] == pytest.approx(0.0)


class TestProductDiagDistance:
    def test_disk_minimum(self):
        # objective max(|x1'|, |x2'|) over the Euclidean disk B((1,1), 0.1):
        # the minimiser steps 0.1 along -(1,1)/sqrt2
        val = product_diag_distance(line([0, 1]), line([1, 0]), [1, 1], 0.1, [0, 1], [1, 0], 10.0)
        assert val == pytest.approx(1 - 0.1 / math.sqrt(2), abs=1e-9)

    def test_common_point(self):
        assert product_diag_distance(line([0, 1]), line([1, 0]), [0, 0], 0.3) == 0.0

    def test_empty_truncation(self):
        val = product_diag_distance(line([0, 1]), line([1, 0]), [1, 1], 0.1, [5, 0], [1, 0], 1.0)
        assert val == math.inf

    def test_untruncated_lines(self, rng):
        # oracle: dense polar grid over the disk
        x, rho = np.array([0.7, 0.4]), 0.2
        r = np.linspace(0, rho, 401)[:, None]
        phi = np.linspace(0, 2 * np.pi, 1441)[None, :]
        P = np.stack([x[0] + r * np.cos(phi), x[1] + r * np.sin(phi)], -1).reshape(-1, 2)
        ref = np.min(np.maximum(np.abs(P[:, 0]), np.abs(P[:, 1])))
        val = product_diag_distance(line([0, 1]), line([1, 0]), x, rho)
        assert val <= ref + 1e-12 and val == pytest.approx(ref, abs=1e-6)


class TestEstimators:
    def test_str_perpendicular_matches_grid(self, corpus, small_schedule):
        e = estimate_str(corpus["perpendicular_axes"], small_schedule)
        assert e.extrapolated == pytest.approx(str_grid_oracle(math.pi / 2), abs=2e-3)

    def test_str_lines_pi_3(self, corpus, small_schedule):
        e = estimate_str(corpus["lines_pi_3"], small_schedule)
        assert e.extrapolated == pytest.approx(str_grid_oracle(math.pi / 3), abs=2e-3)

    @pytest.mark.parametrize("kind", KINDS)
    def test_identical_sets(self, corpus, small_schedule, kind):
        e = estimate(kind, corpus["identical_halfplanes"], small_schedule)
        assert e.extrapolated == 1.0 and e.empty_feasible
        assert all(r.feasible_count == 0 for r in e.per_radius_values)

    def test_itr_is_an_upper_bound(self, corpus, small_schedule):
        # feasible normals on the axes are orthogonal, so no sample beats 1/sqrt2
        e = estimate_itr(corpus["perpendicular_axes"], small_schedule)
        assert all(v >= INV_SQRT2 - 1e-12 for v in e.values)
        assert e.extrapolated == pytest.approx(INV_SQRT2, abs=1e-9)

    def test_tr_embedded_axes_vanish(self, corpus, small_schedule):
        e = estimate_tr(corpus["axes_in_r3"], small_schedule)
        assert e.extrapolated <= 0.05
        assert e.diagnostics["separated_samples"] > 0

    def test_tr_perpendicular_positive(self, corpus, small_schedule):
        tr = estimate_tr(corpus["perpendicular_axes"], small_schedule).extrapolated
        itr = estimate_itr(corpus["perpendicular_axes"], small_schedule).extrapolated
        assert 0 < tr <= itr + 0.03

    def test_angle_itr(self, corpus, small_schedule):
        assert estimate("angle_itr", corpus["perpendicular_axes"], small_schedule).extrapolated > 0.5
        assert estimate("angle_itr", corpus["tangential_parabola"], small_schedule).extrapolated < 0.1

    def test_values_in_unit_interval(self, corpus, small_schedule):
        for kind in KINDS:
            e = estimate(kind, corpus["circle_line"], small_schedule)
            assert all(0.0 <= v <= 1.0 for v in e.values)

    def test_itr_p_values_on_grid(self, corpus, small_schedule):
        e = estimate("itr_p", corpus["lines_pi_3"], small_schedule)
        assert all(np.isclose(ALPHA_GRID, v).any() for v in e.values)

    def test_drift_reported(self, corpus, small_schedule):
        e = estimate("itr_c", corpus["perpendicular_axes"], small_schedule)
        assert e.drift == pytest.approx(abs(e.values[-1] - e.values[-2]))

    def test_unknown_kind(self, corpus, small_schedule):
        with pytest.raises(ValueError):
            estimate("itr_q", corpus["perpendicular_axes"], small_schedule)

    def test_deterministic(self, corpus, small_schedule):
        a = estimate("itr_c", corpus["circle_line"], small_schedule).to_dict()
        b = estimate("itr_c", corpus["circle_line"], small_schedule).to_dict()
        assert a == b


@pytest.mark.parametrize("c", [0.1, 10.0])
@pytest.mark.parametrize("kind", ["str", "itr", "itr_c"])
def test_scale_invariance(c, kind, small_schedule):
    # both sets are cones at xbar, so the defining ratios do not see the scale
    S = lines_scene(math.pi / 3)
    base = estimate(kind, S, small_schedule).extrapolated
    assert estimate(kind, S.scaled(c), small_schedule).extrapolated == pytest.approx(base, abs=1e-6)


class TestIntersectionDistance:
    def test_oracle_used(self, corpus):
        _, how = intersection_distances(corpus["perpendicular_axes"], np.array([[1.0, 2.0]]))
        assert how == "oracle"

    def test_alternating_projection_fallback(self):
        S = lines_scene(math.pi / 3)
        d, how = intersection_distances(S, np.array([[0.3, 0.4]]))
        assert how == "alternating-projections" and d[0] == pytest.approx(0.5, abs=1e-9)

    def test_uncertified_raises(self):
        # tangent circle and line: projections crawl towards the contact point
        S = Scene(Sphere([0, 1], 1.0), line([1, 0]), [0, 0])
        with pytest.raises(IntersectionDistanceError, match="alternating-projections"):
            intersection_distances(S, np.array([[0.1, 0.05]]), budget=500)


class TestOrderings:
    def test_all_pass_on_consistent_values(self):
        ests = [fake("tr", 0.70), fake("itr", 0.7071), fake("itr_w", 0.7071), fake("itr_c", 0.7071),
                fake("itr_p", 0.7071), fake("str", 0.7071)]
        assert all(c.passed for c in check_orderings(ests, 0.03, "x"))

    def test_identical_all_one(self):
        assert all(c.passed for c in check_orderings([fake(k, 1.0) for k in KINDS]))

    def test_embedded_axes_tr_zero(self):
        ests = [fake("tr", 0.0), fake("itr", 0.7071), fake("itr_c", 0.7059)]
        assert all(c.passed for c in check_orderings(ests))

    def test_violation_names_relation_and_values(self):
        checks = check_orderings([fake("tr", 0.9), fake("itr", 0.5)], 0.03, "demo")
        bad = [c for c in checks if not c.passed]
        assert [c.relation for c in bad] == ["tr <= itr"]
        assert bad[0].scene == "demo" and (bad[0].lhs_value, bad[0].rhs_value) == (0.9, 0.5)

    def test_gap_checks_only_below_threshold(self):
        checks = check_orderings([fake("itr", 0.75), fake("itr_w", 0.9), fake("itr_c", 0.95)])
        assert not any(c.relation.startswith("|") for c in checks)
        checks = check_orderings([fake("itr", 0.3), fake("itr_w", 0.4), fake("itr_c", 0.45)])
        gaps = [c for c in checks if c.relation.startswith("|")]
        assert gaps and not all(c.passed for c in gaps)


def test_schedule_validation():
    with pytest.raises(ValueError):
        RadiusSchedule((0.1, 0.2))
    with pytest.raises(ValueError):
        RadiusSchedule.geometric(0.5, 1.5, 3)


def test_halfspace_scene_requires_common_point():
    with pytest.raises(ValueError):
        Scene(HalfSpace([0, 1], -1.0), HalfSpace([0, -1], -1.0), [0, 0])
