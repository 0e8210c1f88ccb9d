import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorohod.errors import (BudgetError, ConfigError, DegenerateGeometryError, DomainError,
                             GeometryError, GoodProjectionViolated)
from skorohod.geometry import (MovingAnnulus, MovingBall, MovingBox, MovingRoundedBox, Resolution,
                               ellipse_domain)
from skorohod.reflection import (FiniteGenerators, NormalCone, SingleDirection,
                                 audit_good_projection, cone_contains, cone_continuity_modulus,
                                 cone_from_json,
                                 good_projection_constants, measure_budget, oblique_project,
                                 pairwise_opposition, project_many, quantity_a, quantity_c,
                                 quantity_e, shell_samples, tilt)

THETA = math.pi / 6


def flat_floor():
    """Rounded box whose bottom face ``y = -0.5`` is flat for ``|x| <= 3``."""
    return MovingRoundedBox([-3.0, 0.0], [3.0, 2.0], 0.5, 1.0)


class TestCones:
    def test_tilt_convention(self):
        np.testing.assert_allclose(tilt([0.0, 1.0], THETA), [math.sin(THETA), math.cos(THETA)])

    def test_tilt_rejects_1d_angle(self):
        with pytest.raises(GeometryError):
            tilt([1.0], 0.1)

    def test_single_direction_q_ratio(self):
        assert SingleDirection(theta=THETA).q_ratio(1.0) == pytest.approx(math.cos(THETA))

    def test_single_direction_needs_one_spec(self):
        with pytest.raises(ConfigError):
            SingleDirection()

    def test_box_face_generators(self):
        cone = FiniteGenerators([0.0, {"tilt": 0.3}, [1.0, 1.0], 0.0])
        box = MovingBox([0.0, 0.0], [1.0, 1.0], 1.0)
        np.testing.assert_allclose(cone.generators(box, 0.0, [0.5, 0.0]), [tilt([0.0, 1.0], 0.3)])
        np.testing.assert_allclose(cone.generators(box, 0.0, [1.0, 0.5]),
                                   [[math.sqrt(0.5), math.sqrt(0.5)]])
        assert cone.generators(box, 0.0, [0.0, 0.0]).shape == (2, 2)

    @pytest.mark.parametrize("spec", [{"kind": "normal"}, {"kind": "single", "theta": 0.2},
                                      {"kind": "generators", "faces": [0.1, {"vector": [0, 1]}]}])
    def test_json_round_trip(self, spec):
        cone = cone_from_json(spec)
        assert cone_from_json(cone.to_json()).to_json() == cone.to_json()

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            cone_from_json({"kind": "spiral"})

    def test_cone_contains(self):
        G = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert cone_contains(G, [2.0, 3.0])
        assert not cone_contains(G, [-1.0, 0.5])
        assert cone_contains([[0.0, 1.0]], [0.0, 4.0])
        assert not cone_contains([[0.0, 1.0]], [0.1, 1.0])

    def test_generators_never_opposite(self):
        box = MovingBox([0.0, 0.0], [1.0, 1.0], 1.0)
        for corner in ([0, 0], [1, 0], [1, 1], [0, 1]):
            G = FiniteGenerators([0.2, -0.2, 0.1, 0.0]).generators(box, 0.0, corner)
            assert pairwise_opposition(G) > -1.0


def max_direction_gap(theta_fn, spacing):
    """Largest change of a tilted normal on the unit circle between neighbouring samples."""
    phis = np.arange(0.0, 2 * np.pi, spacing)
    n = -np.stack((np.cos(phis), np.sin(phis)), axis=1)
    g = tilt(n, theta_fn)
    return float(np.max(np.linalg.norm(np.diff(g, axis=0), axis=1)))


def test_single_direction_field_is_continuous():
    gaps = [max_direction_gap(THETA, h) for h in (0.1, 0.05, 0.025)]
    assert all(np.isfinite(gaps)) and gaps[0] > gaps[1] > gaps[2]


class TestQuantities:
    def test_flat_face_normal_is_one(self):
        assert quantity_a(flat_floor(), NormalCone(), 0.0, [0.0, -0.5], 0.3, 0.1) == pytest.approx(1.0)

    @pytest.mark.parametrize("rho", [0.1, 0.3])
    def test_ball_matches_chord_angle(self, rho):
        # normals within rho of z span an angle 2 arcsin(rho/2) on either side
        oracle = math.cos(2 * math.asin(rho / 2))
        assert oracle == pytest.approx(1 - rho**2 / 2)
        value = quantity_a(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [1.0, 0.0], rho, 0.0)
        assert value == pytest.approx(oracle, abs=1e-3)

    def test_tilted_field_on_ball_stays_positive(self):
        beta = math.cos(THETA)
        value = quantity_a(MovingBall([0.0, 0.0], 1.0, 1.0), SingleDirection(theta=THETA), 0.0,
                           [1.0, 0.0], 0.05, 0.0)
        assert value >= beta

    def test_convex_normal_has_no_skew(self):
        assert quantity_c(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [1.0, 0.0], 0.3, 0.0) == 0.0

    def test_annulus_inner_wall_has_skew(self):
        c = quantity_c(MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0), NormalCone(), 0.0, [0.5, 0.0], 0.25, 0.0)
        # chord oracle: a chord of length L on a circle of radius R gives L / (2R);
        # both ends lie within rho of z, so L <= 2 rho and c = rho / R = 0.5
        assert 0.0 < c <= 0.25 / 0.5 + 1e-12
        assert c == pytest.approx(0.5, abs=0.05)

    def test_tilted_half_plane_skew_is_sin_theta(self):
        c = quantity_c(flat_floor(), SingleDirection(theta=THETA), 0.0, [0.0, -0.5], 0.3, 0.1)
        assert c == pytest.approx(math.sin(THETA), abs=1e-9)

    @pytest.mark.parametrize("a,c,e", [(1.0, 0.0, 0.0), (1.0, 0.3, 0.3), (0.4, 0.1, 0.5)])
    def test_quantity_e(self, a, c, e):
        assert quantity_e(a, c) == pytest.approx(e)

    def test_quantity_e_rejects_nonpositive_a(self):
        with pytest.raises(DomainError):
            quantity_e(0.0, 0.1)

    def test_no_boundary_nearby(self):
        with pytest.raises(GeometryError):
            quantity_a(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [0.0, 0.0], 0.1, 0.0)

    def test_neighbourhood_ladder_is_monotone(self):
        d = MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0)
        z = [0.5, 0.0]
        a = [quantity_a(d, NormalCone(), 0.0, z, r, 0.0) for r in (0.05, 0.1, 0.2)]
        c = [quantity_c(d, NormalCone(), 0.0, z, r, 0.0) for r in (0.05, 0.1, 0.2)]
        assert a[0] >= a[1] - 1e-3 >= a[2] - 2e-3
        assert c[0] <= c[1] + 1e-3 <= c[2] + 2e-3


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.0, 0.3))
def test_skew_inequality_on_tilted_half_plane(y1, zx, zh):
    c = math.sin(THETA)
    y = np.array([y1, -0.5])
    zhat = np.array([zx, -0.5 + zh])
    gamma = tilt([0.0, 1.0], THETA)
    assert gamma @ (zhat - y) + c * np.linalg.norm(y - zhat) >= -1e-12


class TestProjection:
    def test_ball_normal(self):
        r = oblique_project(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [2.0, 0.0],
                            delta0=2.0, h0=2.0)
        np.testing.assert_allclose(r.point, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(r.direction, [-1.0, 0.0], atol=1e-12)
        assert r.stretch == pytest.approx(1.0)

    def test_closure_point_is_fixed(self):
        r = oblique_project(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [0.3, 0.2],
                            delta0=0.5, h0=2.0)
        np.testing.assert_array_equal(r.point, [0.3, 0.2])
        assert r.stretch == 0.0 and not r.moved

    @pytest.mark.parametrize("theta", [THETA, 0.5, 1.0])
    def test_oblique_half_plane_ray_line_oracle(self, theta):
        r = oblique_project(flat_floor(), SingleDirection(theta=theta), 0.0, [0.0, -1.5],
                            delta0=2.0, h0=10.0)
        np.testing.assert_allclose(r.point, [math.tan(theta), -0.5], atol=1e-9)
        assert r.stretch == pytest.approx(1.0 / math.cos(theta), rel=1e-9)
        np.testing.assert_allclose(r.direction, [math.sin(theta), math.cos(theta)], atol=1e-12)

    def test_budget_error(self):
        with pytest.raises(BudgetError):
            oblique_project(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), 0.0, [2.0, 0.0],
                            delta0=0.5, h0=2.0)

    def test_good_projection_violation(self):
        with pytest.raises(GoodProjectionViolated):
            oblique_project(flat_floor(), SingleDirection(theta=1.0), 0.0, [0.0, -0.6],
                            delta0=0.5, h0=1.2)

    def test_box_corner_with_generators(self):
        box = MovingBox([0.0, 0.0], [1.0, 1.0], 1.0)
        cone = FiniteGenerators([0.0, 0.0, 0.0, 0.0])
        r = oblique_project(box, cone, 0.0, [1.1, 1.05], delta0=0.5, h0=2.0)
        np.testing.assert_allclose(r.point, [1.0, 1.0], atol=1e-9)

    def test_level_set_projection_lands_on_boundary(self):
        d = ellipse_domain([0.0, 0.0], [2.0, 1.0], 1.0)
        r = oblique_project(d, NormalCone(), 0.0, [0.0, 1.2], delta0=0.5, h0=2.0)
        np.testing.assert_allclose(r.point, [0.0, 1.0], atol=1e-8)

    def test_project_many_matches_single(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        Y = shell_samples(d, 0.0, 0.2, 50, seed=1)
        P = project_many(d, NormalCone(), 0.0, Y, delta0=0.2, h0=2.0)
        Q = np.array([oblique_project(d, NormalCone(), 0.0, y, delta0=0.2, h0=2.0).point for y in Y])
        np.testing.assert_allclose(P, Q, atol=1e-12)


class TestGoodProjectionConstants:
    def test_worked_value(self):
        d0, h0 = good_projection_constants(1.0, 0.6, 1.0)
        assert d0 == pytest.approx(0.2) and h0 == pytest.approx(3.0)

    def test_equal_q_is_degenerate(self):
        with pytest.raises(DegenerateGeometryError):
            good_projection_constants(1.0, 1.0, 1.0)

    @pytest.mark.parametrize("args", [(0.0, 0.5, 1.0), (1.0, 1.5, 1.0), (1.0, -0.1, 1.0)])
    def test_bad_inputs(self, args):
        with pytest.raises(DomainError):
            good_projection_constants(*args)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(0.05, 0.999))
    def test_range(self, r0, k):
        d0, h0 = good_projection_constants(r0, k, 1.0)
        assert 0 < d0 < r0 and h0 > 1.0


class TestAudit:
    def test_shell_samples_are_in_shell(self):
        d = MovingRoundedBox([-3.0, 0.0], [3.0, 2.0], 0.5, 1.0)
        Y = shell_samples(d, 0.0, 0.125, 500, seed=0)
        dist = d.distance(0.0, Y)
        assert Y.shape == (500, 2) and np.all((dist > 0) & (dist < 0.125))

    def test_tilted_rounded_box_respects_formula_h0(self):
        d = flat_floor()
        _, h0 = good_projection_constants(1.0, math.cos(THETA), 1.0)
        audit = audit_good_projection(d, SingleDirection(theta=THETA), 0.125, h0, count=300)
        assert audit.passed
        assert audit.worst_ratio == pytest.approx(1.0 / math.cos(THETA), rel=1e-6)

    def test_audit_reports_violations(self):
        d = flat_floor()
        audit = audit_good_projection(d, SingleDirection(theta=THETA), 0.125, 1.05, count=200)
        assert audit.violations > 0


class TestMeasureBudget:
    def test_ball(self):
        m = measure_budget(MovingBall([0.0, 0.0], 1.0, 1.0), NormalCone(), rho0=0.25, eta0=0.25,
                           anchor_spacing=0.5)
        b = m.budget
        assert b.a == pytest.approx(1 - 0.25**2 / 2, abs=1e-3)
        assert b.e == 0.0 and b.convex_slices and b.l(0.5) == 0.0
        assert b.a == m.a_values.min() and b.e == m.e_values.max()

    def test_annulus_lattice_consistency(self):
        d = MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0)
        res = Resolution(spacing=0.02)
        m = measure_budget(d, NormalCone(), r0=0.5, rho0=0.25, eta0=0.25, anchor_spacing=0.5,
                           resolution=res)
        b = m.budget
        # fresh anchors on the inner wall, rotated away from the measured lattice
        for phi in (0.3, 1.7, 4.0):
            z = 0.5 * np.array([math.cos(phi), math.sin(phi)])
            a = quantity_a(d, NormalCone(), 0.0, z, 0.25, 0.25, res)
            c = quantity_c(d, NormalCone(), 0.0, z, 0.25, 0.25, res)
            assert a >= b.a - 1e-2
            assert quantity_e(a, c) <= b.e + 5e-2
        assert 0 < b.e < 1 and b.delta0 < b.rho0


class TestConeContinuity:
    RES = Resolution(time_samples=9, spacing=0.02)

    def test_normals_on_unit_circle(self):
        # unit normals of the unit circle differ by exactly the chord |z - z'|
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        for r in (0.05, 0.2):
            value = cone_continuity_modulus(d, SingleDirection(theta=0.0), r, self.RES)
            assert r - 0.02 <= value <= r + 1e-12

    def test_time_varying_tilt_adds_rotation(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        cone = SingleDirection(theta={"kind": "linear", "value": 0.0, "slope": 0.5})
        value = cone_continuity_modulus(d, cone, 0.2, self.RES)
        # chord of the combined rotation over the sampled gap 1/8 and arc 0.2
        oracle = 2 * np.sin((0.2 + 0.5 * 0.125) / 2)
        assert oracle - 0.005 <= value <= oracle + 1e-12

    def test_needs_single_direction(self):
        with pytest.raises(ConfigError):
            cone_continuity_modulus(MovingBox([0.0, 0.0], [1.0, 1.0], 1.0), NormalCone(), 0.1)
