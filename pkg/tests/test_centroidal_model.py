"""Tests for the reduced centroidal dynamics in src/centroidal_model.py."""

import numpy as np
import pytest

from src.centroidal_model import (
    CentroidalState,
    ContactWrench,
    ModelParams,
    integrate_state,
    momentum_rate,
    skew,
    state_derivative,
    wrench_map,
)
from src.errors import IntegrationError, InvalidArgumentError


class TestModelTypes:
    """Tests for ModelParams and CentroidalState validation."""

    def test_mass_must_be_positive(self):
        """Zero mass is rejected."""
        with pytest.raises(InvalidArgumentError):
            ModelParams(mass=0.0)

    def test_weight(self):
        """Weight is mass times gravity."""
        params = ModelParams(mass=2.0, gravity=(0.0, 0.0, -10.0))
        assert np.allclose(params.weight, [0.0, 0.0, -20.0])

    def test_state_rejects_nan(self):
        """Non-finite state components are rejected."""
        with pytest.raises(InvalidArgumentError):
            CentroidalState(r=[0.0, np.nan, 0.0], l=np.zeros(3), k=np.zeros(3))

    def test_state_vector_roundtrip(self):
        """to_vector and from_vector are inverse."""
        x = np.arange(9.0)
        state = CentroidalState.from_vector(x)
        assert np.array_equal(state.to_vector(), x)

    def test_skew_matches_cross(self):
        """skew(a) @ b equals a x b."""
        a, b = np.array([0.3, -1.2, 2.0]), np.array([-0.7, 0.4, 1.1])
        assert np.allclose(skew(a) @ b, np.cross(a, b))


class TestMomentumRate:
    """Tests for momentum_rate and wrench_map."""

    def test_weight_compensated_below_com(self):
        """A vertical force equal to the weight straight below the CoM gives zero rate."""
        params = ModelParams(mass=60.0)
        state = CentroidalState.at_rest([0.0, 0.0, 0.9])
        f = ContactWrench(force=[0.0, 0.0, 60.0 * 9.81], torque=np.zeros(3))
        rate = momentum_rate(state, [[0.0, 0.0, 0.0]], [f], params)
        assert np.allclose(rate, 0.0, atol=1e-12)

    def test_offset_force_creates_moment(self):
        """A force off the CoM produces (p - r) x f."""
        params = ModelParams(mass=1.0, gravity=(0.0, 0.0, 0.0))
        state = CentroidalState.at_rest([0.0, 0.0, 0.0])
        f = ContactWrench(force=[0.0, 0.0, 100.0], torque=[0.0, 0.0, 1.5])
        rate = momentum_rate(state, [[0.1, 0.0, 0.0]], [f], params)
        assert np.allclose(rate[:3], [0.0, 0.0, 100.0])
        assert np.allclose(rate[3:], [0.0, -10.0, 1.5])

    def test_length_mismatch(self):
        """Points and wrenches must pair up."""
        with pytest.raises(InvalidArgumentError):
            momentum_rate(CentroidalState.at_rest(np.zeros(3)), [np.zeros(3)], [], ModelParams())

    def test_wrench_map_matches_rate(self):
        """wrench_map applied to stacked wrenches equals the contact part of the rate."""
        rng = np.random.default_rng(3)
        params = ModelParams()
        state = CentroidalState(r=rng.normal(size=3), l=rng.normal(size=3), k=rng.normal(size=3))
        poles = [rng.normal(size=3) for _ in range(2)]
        wrenches = [ContactWrench.from_vector(rng.normal(size=6)) for _ in range(2)]
        stacked = np.concatenate([w.to_vector() for w in wrenches])
        expected = momentum_rate(state, poles, wrenches, params)
        expected[:3] -= params.weight
        assert np.allclose(wrench_map(poles, state.r) @ stacked, expected)

    def test_wrench_map_needs_pole(self):
        """An empty pole list is rejected."""
        with pytest.raises(InvalidArgumentError):
            wrench_map([], np.zeros(3))

    def test_state_derivative_velocity(self):
        """CoM velocity is l / M."""
        params = ModelParams(mass=4.0)
        state = CentroidalState(r=np.zeros(3), l=[4.0, 8.0, 0.0], k=np.zeros(3))
        d = state_derivative(state, [], [], params)
        assert np.allclose(d[:3], [1.0, 2.0, 0.0])


class TestIntegrateState:
    """Tests for the RK4 reference integrator."""

    def test_free_fall_closed_form(self):
        """Without contacts the motion is ballistic."""
        params = ModelParams(mass=60.0)
        x0 = CentroidalState(r=[0.0, 0.0, 1.0], l=[6.0, 0.0, 12.0], k=[0.1, 0.0, 0.0])
        times, states = integrate_state(x0, lambda t: ([], []), params, 0.5, 0.01)
        g = params.gravity
        for t, x in zip(times, states):
            r = x0.r + x0.l / params.mass * t + 0.5 * g * t ** 2
            l = x0.l + params.mass * g * t
            assert np.allclose(x[0:3], r, atol=1e-12)
            assert np.allclose(x[3:6], l, atol=1e-10)
            assert np.allclose(x[6:9], x0.k)

    def test_last_step_lands_on_end(self):
        """A horizon that is not a multiple of dt still ends exactly at t_end."""
        times, states = integrate_state(
            CentroidalState.at_rest(np.zeros(3)), lambda t: ([], []), ModelParams(), 0.105, 0.01
        )
        assert times[-1] == pytest.approx(0.105, abs=0.0)
        assert len(times) == states.shape[0] == 12

    def test_non_finite_wrench(self):
        """A NaN wrench sample raises with its time."""
        bad = ContactWrench(force=[np.nan, 0.0, 0.0], torque=np.zeros(3))
        with pytest.raises(IntegrationError) as exc:
            integrate_state(
                CentroidalState.at_rest(np.zeros(3)), lambda t: ([np.zeros(3)], [bad]),
                ModelParams(), 0.1, 0.01,
            )
        assert exc.value.time == 0.0

    def test_invalid_dt(self):
        """dt must be positive."""
        with pytest.raises(InvalidArgumentError):
            integrate_state(CentroidalState.at_rest(np.zeros(3)), lambda t: ([], []), ModelParams(), 1.0, 0.0)
