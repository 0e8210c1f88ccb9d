import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorohod.errors import ConfigError, DomainError, StepRejected
from skorohod.geometry import GeometryBudget, MovingAnnulus, MovingBall, MovingBox
from skorohod.reflection import NormalCone
from skorohod.sde import (SdeCoefficients, coupled_gap, coupled_gaps, euler_reflected,
                          monte_carlo)

UNIT = MovingBox([0.0], [1.0], 1.0)


def ode_with_reflection(b, horizon, steps=2**16):
    """Deterministic oracle: Euler steps of dx = b dt clipped radially to the unit disk."""
    h = horizon / steps
    x = np.zeros(2)
    tv = 0.0
    for _ in range(steps):
        c = x + h * np.asarray(b)
        r = np.linalg.norm(c)
        if r > 1.0:
            tv += r - 1.0
            c = c / r
        x = c
    return x, tv


class TestCoefficients:
    def test_constant_bounds(self):
        c = SdeCoefficients.constant([3.0, 4.0], 2.0)
        assert c.drift_bound == 5.0 and c.diffusion_bound == 2.0 and c.noise_dim == 2

    def test_from_json_scalar_and_vector(self):
        c = SdeCoefficients.from_json({"drift": [1.0, 0.0], "sigma": 0.5}, 2)
        assert c.to_json() == {"drift": [1.0, 0.0], "sigma": [[0.5, 0.0], [0.0, 0.5]]}
        with pytest.raises(ConfigError):
            SdeCoefficients.from_json({"drift": [1.0]}, 2)

    def test_declared_bounds_hold(self):
        c = SdeCoefficients.constant([0.3, 0.4], 1.5)
        assert c.check_bounds(MovingBall([0.0, 0.0], 1.0, 1.0), spacing=0.1) == []

    def test_understated_bound_is_reported(self):
        c = dataclasses.replace(SdeCoefficients.constant([0.3, 0.4], 1.5), drift_bound=0.1)
        assert c.check_bounds(MovingBall([0.0, 0.0], 1.0, 1.0), spacing=0.1)


class TestEuler:
    def test_nothing_moves(self):
        d = MovingBall([0.0, 0.0], 1.0, 1.0)
        p = euler_reflected(SdeCoefficients.constant([0.0, 0.0], 0.0), d, NormalCone(), [0.2, 0.1], 6, 0)
        assert np.all(p.X.values == [0.2, 0.1]) and np.all(p.reflection.lam == 0.0)

    def test_drift_into_disk_wall(self):
        d = MovingBall([0.0, 0.0], 1.0, 2.0)
        p = euler_reflected(SdeCoefficients.constant([1.0, 0.0], 0.0), d, NormalCone(), [0.0, 0.0], 12, 0)
        x_ref, tv_ref = ode_with_reflection([1.0, 0.0], 2.0)
        np.testing.assert_allclose(p.X.values[-1], x_ref, atol=1e-12)
        assert tv_ref == pytest.approx(1.0, abs=1e-4)
        assert p.reflection.total_variation[-1] == pytest.approx(tv_ref, abs=1e-3)
        k = p.X.grid.index_at(1.0)
        assert np.linalg.norm(p.X.values[k] - [1.0, 0.0]) <= p.X.grid.mesh

    def test_shrinking_interval_sweeps_state(self):
        d = MovingBox([0.0], [{"kind": "linear", "value": 1.0, "slope": -0.25}], 2.0)
        p = euler_reflected(SdeCoefficients.constant(0.0, 0.0), d, NormalCone(), [0.9], 10, 0)
        t = p.X.times
        np.testing.assert_allclose(p.X.values[:, 0], np.minimum(0.9, 1.0 - 0.25 * t), atol=1e-12)

    def test_identity_and_epsilon_bound(self):
        p = euler_reflected(SdeCoefficients.constant(0.2, 1.0), UNIT, NormalCone(), [0.5], 10, 42)
        assert p.violations == []
        lam, X, Z = p.reflection.lam, p.X.values, p.Z.values
        np.testing.assert_allclose(np.diff(lam, axis=0), np.diff(X, axis=0) - np.diff(Z, axis=0),
                                   atol=1e-12)
        assert p.epsilon <= p.epsilon_bound
        dW = np.diff(p.W.values, axis=0)
        assert p.epsilon_bound == pytest.approx(0.2 / 1024 + np.abs(dW).max())

    def test_start_outside(self):
        with pytest.raises(DomainError):
            euler_reflected(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [1.5], 6, 0)

    def test_step_rejected_on_nonconvex_budget(self):
        d = MovingAnnulus([0.0, 0.0], 0.5, 1.5, 1.0)
        b = GeometryBudget(r0=0.5, rho0=0.25, eta0=0.25, a=0.88, e=0.62, delta0=0.125, h0=1.001)
        with pytest.raises(StepRejected) as info:
            euler_reflected(SdeCoefficients.constant([0.0, 0.0], 1.0), d, NormalCone(), [1.0, 0.0],
                            2, 0, budget=b)
        assert info.value.step is not None

    def test_explicit_increments_override_seed(self):
        inc = np.full((16, 1), 0.01)
        p = euler_reflected(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 4, 0,
                            increments=inc)
        assert p.X.values[-1, 0] == pytest.approx(0.66)


class TestMonteCarlo:
    def test_constant_functional(self):
        r = monte_carlo(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 6, 50, 1, "one")
        assert r.mean == 1.0 and r.se == 0.0

    def test_symmetry(self):
        r = monte_carlo(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 8, 2000, 3)
        assert abs(r.mean - 0.5) <= 3 * r.se and r.violations == 0

    def test_order_independent(self):
        args = (SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 7, 300, 9)
        a = monte_carlo(*args, batch=64, threads=1)
        b = monte_carlo(*args, batch=100, threads=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_unknown_statistic(self):
        with pytest.raises(ConfigError):
            monte_carlo(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 4, 10, 0, "median")

    def test_needs_two_paths(self):
        with pytest.raises(DomainError):
            monte_carlo(SdeCoefficients.constant(0.0, 1.0), UNIT, NormalCone(), [0.5], 4, 1, 0)


def test_coupled_refinement_gaps_decrease():
    c = SdeCoefficients.constant(0.0, 1.0)
    means = [coupled_gaps(c, UNIT, NormalCone(), [0.5], n, 7, range(200)).mean() for n in (4, 6, 8, 10)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_single_coupled_gap_matches_batch():
    c = SdeCoefficients.constant(0.0, 1.0)
    batch = coupled_gaps(c, UNIT, NormalCone(), [0.5], 5, 2, range(5))
    assert coupled_gap(c, UNIT, NormalCone(), [0.5], 5, 2, path=3) == batch[3]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.floats(-1.0, 1.0), st.floats(0.1, 2.0))
def test_paths_stay_in_closure_with_exact_identity(seed, drift, sigma):
    p = euler_reflected(SdeCoefficients.constant(drift, sigma), UNIT, NormalCone(), [0.5], 8, seed)
    assert p.violations == []
    assert np.all((p.X.values >= 0.0) & (p.X.values <= 1.0))
    assert p.reflection.check() == []


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_disk_paths_validate(seed):
    d = MovingBall([0.0, 0.0], {"kind": "sinusoid", "offset": 1.0, "amplitude": 0.2, "frequency": 1.0}, 1.0)
    p = euler_reflected(SdeCoefficients.constant([0.3, 0.0], 0.5), d, NormalCone(), [0.5, 0.0], 9, seed)
    assert p.violations == []
    r = np.linalg.norm(p.X.values, axis=1)
    assert np.all(r <= 1.0 + 0.2 * np.sin(p.X.times) + 1e-9)
    assert math.isfinite(p.epsilon)
