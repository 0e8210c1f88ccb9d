import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorohod.errors import ConfigError, GeometryError
from skorohod.geometry import (GeometryBudget, Membership, MovingAnnulus, MovingBall, MovingBox,
                               MovingConvexPolytope, Resolution, boundary_modulus_lhat,
                               domain_from_json, dyadic_radii, ellipse_domain,
                               exterior_sphere_check, hausdorff, holder_exponent,
                               inward_normal_cone, modulus_l, modulus_table, parse_time_function)
from skorohod.geometry.sampling import circle_points

COARSE = Resolution(time_samples=17, gap_samples=2, spacing=0.02)


def linear(value, slope):
    return {"kind": "linear", "value": value, "slope": slope}


def dense_ball_l(radius, r, horizon=1.0, samples=2001):
    """Brute force over time pairs: sup of (R(s) - R(t))^+ for |s - t| <= r."""
    ts = np.linspace(0.0, horizon, samples)
    R = radius(ts)
    step = horizon / (samples - 1)
    k = int(round(r / step))
    return max(float(np.max(R[j:] - R[:R.size - j])) for j in range(k + 1))


class TestTimeFunctions:
    @pytest.mark.parametrize("spec", [0.5, linear(1.0, 0.2),
                                      {"kind": "sinusoid", "offset": 1, "amplitude": 0.2,
                                       "frequency": 3.0, "phase": 0.1},
                                      {"kind": "table", "times": [0, 0.5, 1], "values": [0, 1, 0]}])
    def test_json_round_trip(self, spec):
        f = parse_time_function(spec)
        g = parse_time_function(f.to_json())
        ts = np.linspace(0, 1, 11)
        np.testing.assert_array_equal(np.broadcast_to(f(ts), ts.shape), np.broadcast_to(g(ts), ts.shape))

    def test_sinusoid_uses_angular_frequency(self):
        f = parse_time_function({"kind": "sinusoid", "offset": 0, "amplitude": 1, "frequency": 2.0})
        assert float(f(0.25)) == pytest.approx(math.sin(0.5))

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            parse_time_function({"kind": "spline"})


class TestMembership:
    def test_ball(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        assert d.membership(0.0, [0.5, 0.0]) is Membership.INTERIOR
        assert d.membership(0.0, [1.0, 0.0]) is Membership.BOUNDARY
        assert d.membership(0.0, [1.5, 0.0]) is Membership.EXTERIOR

    def test_box_corner_is_boundary(self):
        d = MovingBox([0.0, 0.0], [1.0, 1.0], 1.0)
        assert d.membership(0.3, [1.0, 1.0]) is Membership.BOUNDARY

    def test_distance_zero_on_closure(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        np.testing.assert_allclose(d.distance(0.0, [[0.2, 0.1], [2.0, 0.0]]), [0.0, 1.0])

    def test_unknown_family(self):
        with pytest.raises(ConfigError):
            domain_from_json({"family": "torus"}, 1.0)


class TestModulus:
    def test_static_domain_is_zero(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        assert modulus_l(d, 0.3) == 0.0 and boundary_modulus_lhat(d, 0.3) == 0.0

    @pytest.mark.parametrize("beta,r", [(0.3, 0.2), (0.5, 0.05)])
    def test_growing_ball_is_beta_r(self, beta, r):
        d = MovingBall([0.0, 0.0], linear(1.0, beta), 1.0)
        oracle = dense_ball_l(lambda t: 1.0 + beta * t, r)
        assert oracle == pytest.approx(beta * r, rel=1e-3)
        assert modulus_l(d, r) == pytest.approx(oracle, rel=1e-3)

    def test_sine_ceiling_is_lipschitz(self):
        d = MovingBox([0.0], [{"kind": "sinusoid", "offset": 1.0, "amplitude": 1.0,
                               "frequency": 1.0}], 1.0)
        ts = np.linspace(0, 1, 4001)
        h = 1.0 + np.sin(ts)
        for r in (0.05, 0.2):
            k = int(round(r / (ts[1] - ts[0])))
            oracle = max(float(np.max(np.maximum(h[j:] - h[:h.size - j], h[:h.size - j] - h[j:])))
                         for j in range(k + 1))
            value = modulus_l(d, r)
            assert value <= r + 1e-12
            assert value == pytest.approx(oracle, abs=1e-3)

    @pytest.mark.parametrize("domain", [
        MovingBall([0.0, 0.0], linear(1.0, 0.3), 1.0),
        MovingBox([0.0], [{"kind": "sinusoid", "offset": 1.0, "amplitude": 1.0, "frequency": 1.0}], 1.0),
    ])
    def test_l_equals_lhat_below_r0(self, domain):
        for r in (0.02, 0.1, 0.3):
            assert abs(modulus_l(domain, r) - boundary_modulus_lhat(domain, r)) <= 1e-3

    def test_table_is_nondecreasing(self):
        d = MovingBall([{"kind": "sinusoid", "offset": 0, "amplitude": 0.3, "frequency": 3}, 0.0],
                       1.0, 1.0)
        radii, values = modulus_table(d, dyadic_radii(1.0, depth=6))
        assert np.all(np.diff(values) >= 0)

    def test_dyadic_radii_contain_octaves(self):
        radii = dyadic_radii(2.0, depth=4)
        assert all(2.0 * 2.0**-m in radii for m in range(5))
        assert np.all(np.diff(radii) > 0)

    def test_holder_exponent_of_smooth_ellipse(self):
        d = ellipse_domain([{"kind": "sinusoid", "offset": 0, "amplitude": 0.3, "frequency": 2}, 0.0],
                           [{"kind": "sinusoid", "offset": 1.2, "amplitude": 0.2, "frequency": 1}, 0.8],
                           1.0)
        slope, radii, values = holder_exponent(d, 2.0 ** -np.arange(7, 2, -1), COARSE)
        assert slope >= 0.9
        assert np.all(values > 0)

    def test_holder_exponent_needs_motion(self):
        with pytest.raises(GeometryError):
            holder_exponent(MovingBall([0.0, 0.0], 1.0, 1.0))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_modulus_nondecreasing_in_gap(r1, r2):
    d = MovingBall([linear(0.0, 0.4), 0.0], {"kind": "sinusoid", "offset": 1.0, "amplitude": 0.2,
                                              "frequency": 2.0}, 1.0)
    lo, hi = sorted((r1, r2))
    assert modulus_l(d, lo) <= modulus_l(d, hi) + 1e-12


class TestHausdorff:
    def test_identical(self):
        E = np.random.default_rng(0).standard_normal((20, 2))
        assert hausdorff(E, E) == 0.0

    def test_points_on_line(self):
        assert hausdorff([0.0], [3.0]) == 3.0

    def test_concentric_circles(self):
        E = circle_points([0.0, 0.0], 1.0, 0.005)
        F = circle_points([0.0, 0.0], 2.0, 0.005)
        assert hausdorff(E, F) == pytest.approx(1.0, abs=1e-3)

    def test_empty(self):
        with pytest.raises(GeometryError):
            hausdorff(np.empty((0, 2)), [[0.0, 0.0]])

    def test_closure_and_boundary_distances_agree(self):
        d = MovingBall([linear(0.0, 0.3), 0.0], 1.0, 1.0)
        s, t = 0.2, 0.3
        closure = hausdorff(d.closure_samples(s, 0.01), d.closure_samples(t, 0.01))
        boundary = hausdorff(d.boundary_samples(s, 0.01), d.boundary_samples(t, 0.01))
        assert closure == pytest.approx(0.03, abs=1e-2)
        assert abs(closure - boundary) <= 1e-2


class TestNormals:
    def test_ball(self):
        n = inward_normal_cone(MovingBall([0.0, 0.0], 1.0, 1.0), 0.0, [1.0, 0.0])
        np.testing.assert_allclose(n, [[-1.0, 0.0]], atol=1e-12)

    def test_square_corner(self):
        n = inward_normal_cone(MovingBox([0.0, 0.0], [1.0, 1.0], 1.0), 0.0, [1.0, 1.0])
        rows = sorted(map(tuple, np.round(n, 12)))
        assert rows == [(-1.0, 0.0), (0.0, -1.0)]

    def test_translated_ball(self):
        d = MovingBall([linear(0.0, 1.0), 0.0], 1.0, 1.0)
        np.testing.assert_allclose(inward_normal_cone(d, 0.5, [1.5, 0.0]), [[-1.0, 0.0]], atol=1e-12)

    def test_polytope_face(self):
        d = MovingConvexPolytope([[1, 0], [0, 1], [-1, -1]], [1.0, 1.0, 1.0], 1.0)
        np.testing.assert_allclose(inward_normal_cone(d, 0.0, [1.0, 0.0]), [[-1.0, 0.0]], atol=1e-12)

    def test_interior_point_rejected(self):
        with pytest.raises(GeometryError):
            inward_normal_cone(MovingBall([0.0, 0.0], 1.0, 1.0), 0.0, [0.0, 0.0])


class TestExteriorSphere:
    def test_convex_slice_any_radius(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        assert exterior_sphere_check(d, 0.0, [1.0, 0.0], [-1.0, 0.0], 1e-3).holds

    def test_annulus_inner_wall_small_radius(self):
        d = MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0)
        assert exterior_sphere_check(d, 0.0, [0.5, 0.0], [1.0, 0.0], 0.4).holds

    def test_annulus_inner_wall_large_radius_fails_on_inner_wall(self):
        d = MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0)
        rep = exterior_sphere_check(d, 0.0, [0.5, 0.0], [1.0, 0.0], 0.8)
        assert not rep.holds
        assert np.linalg.norm(rep.witness) == pytest.approx(0.5, abs=0.02)


class TestBudget:
    def budget(self, **kw):
        args = dict(r0=1.0, rho0=0.5, eta0=0.5, a=1.0, e=0.0, delta0=0.25, h0=1.5)
        args.update(kw)
        return GeometryBudget(**args)

    @pytest.mark.parametrize("bad", [dict(rho0=1.5), dict(a=0.0), dict(e=1.0), dict(delta0=0.6),
                                     dict(h0=1.0), dict(eta0=0.0),
                                     dict(l_radii=(0.0, 1.0), l_values=(0.5, 0.1))])
    def test_invariants(self, bad):
        with pytest.raises(GeometryError):
            self.budget(**bad)

    def test_l_reads_conservatively(self):
        b = self.budget(l_radii=(0.0, 0.1, 0.2), l_values=(0.0, 0.01, 0.03))
        assert b.l(0.15) == 0.03 and b.l_lower(0.15) == 0.01 and b.l(0.0) == 0.0

    def test_json_round_trip(self):
        b = self.budget(r0=math.inf, l_radii=(0.0, 0.1), l_values=(0.0, 0.02), convex_slices=True)
        c = GeometryBudget.from_json(b.to_json())
        assert c == b
