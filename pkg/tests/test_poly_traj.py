"""Tests for polynomial algebra and analytic state trajectories in src/poly_traj.py."""

import numpy as np
import pytest

from src.centroidal_model import CentroidalState, ContactWrench, ModelParams, integrate_state
from src.errors import ScheduleError
from src.poly_traj import (
    PhaseControl,
    PiecewisePoly,
    Poly,
    PolySegment,
    PolyVec3,
    antiderivative,
    build_state_polys,
    cross,
    eval_poly,
    multiply,
)


class TestPoly:
    """Tests for scalar polynomial operations."""

    def test_eval(self):
        """Evaluation of small polynomials."""
        assert eval_poly(Poly([1, 2, 3]), 2.0) == 17.0
        assert eval_poly(Poly([5]), 0.37) == 5.0
        assert eval_poly(Poly([0, 1]), 0.5) == 0.5

    def test_multiply(self):
        """Products by coefficient convolution."""
        assert multiply(Poly([1, 1]), Poly([2, 1])) == Poly([2, 3, 1])
        assert multiply(Poly([0, 1]), Poly([0, 1])) == Poly([0, 0, 1])
        p = Poly([0.3, -1.0, 2.0])
        assert multiply(p, Poly([1.0])) == p

    def test_multiply_matches_pointwise(self):
        """eval(p*q) == eval(p)*eval(q) for random polynomials."""
        rng = np.random.default_rng(0)
        for _ in range(100):
            p = Poly(rng.normal(size=rng.integers(1, 6)))
            q = Poly(rng.normal(size=rng.integers(1, 6)))
            s = rng.uniform(-1.0, 2.0)
            assert (p * q)(s) == pytest.approx(p(s) * q(s), rel=1e-12, abs=1e-12)

    def test_antiderivative(self):
        """Term-wise integration from zero."""
        assert antiderivative(Poly([2, 3])) == Poly([0, 2, 1.5])
        assert antiderivative(Poly([0])) == Poly([0])
        assert antiderivative(Poly([1, 1, 1]))(1.0) == pytest.approx(1 + 1 / 2 + 1 / 3)

    def test_derivative_of_antiderivative(self):
        """d/ds antiderivative(p) == p exactly."""
        p = Poly([0.25, -1.5, 4.0, 0.125])
        assert antiderivative(p).derivative() == p

    def test_trailing_zeros_ignored_in_equality(self):
        """Canonical form trims trailing zeros."""
        assert Poly([1.0, 2.0, 0.0, 0.0]) == Poly([1.0, 2.0])
        assert Poly([1.0, 2.0, 0.0]).degree == 1

    def test_compose_affine(self):
        """q(s) = p(alpha + beta*s)."""
        p = Poly([1.0, -2.0, 0.5, 3.0])
        q = p.compose_affine(0.25, 0.5)
        for s in np.linspace(0.0, 1.0, 7):
            assert q(s) == pytest.approx(p(0.25 + 0.5 * s), rel=1e-13)


class TestPolyVec3:
    """Tests for vector polynomials."""

    def test_cross_constants(self):
        """Constant cross product."""
        c = cross(PolyVec3.const([0, 1, 0]), PolyVec3.const([1, 0, 0]))
        assert np.allclose(c(0.3), [0.0, 0.0, -1.0])

    def test_cross_self_is_zero(self):
        """Antisymmetry."""
        a = PolyVec3.from_coeffs([1, 2], [0, 0, 3], [4])
        assert cross(a, a) == PolyVec3.zero()

    def test_cross_degrees_add(self):
        """(t,0,0) x (0,t,0) = (0,0,t^2)."""
        c = cross(PolyVec3.from_coeffs([0, 1], [0], [0]), PolyVec3.from_coeffs([0], [0, 1], [0]))
        assert c.z == Poly([0, 0, 1])
        assert c.degree == 2


class TestPiecewisePoly:
    """Tests for piecewise trajectories."""

    def _seg(self, a, b, value):
        return PolySegment(a, b, PolyVec3.const([value, 0, 0]), a, b - a)

    def test_overlap_rejected(self):
        """Overlapping segments raise."""
        with pytest.raises(ScheduleError):
            PiecewisePoly([self._seg(0.0, 1.0, 1.0), self._seg(0.5, 2.0, 2.0)])

    def test_half_open_and_end_included(self):
        """Segments are [a, b) except the last, which includes its end."""
        pp = PiecewisePoly([self._seg(0.0, 1.0, 1.0), self._seg(1.0, 2.0, 2.0)])
        assert pp(1.0)[0] == 2.0
        assert pp(2.0)[0] == 2.0
        assert np.array_equal(pp(2.5), np.zeros(3))
        assert np.array_equal(pp(-0.1), np.zeros(3))

    def test_restrict(self):
        """Restriction keeps the values inside the interval."""
        pp = PiecewisePoly([PolySegment(0.0, 2.0, PolyVec3.from_coeffs([0, 1], [0], [0]), 0.0, 2.0)])
        sub = pp.restrict(0.5, 1.0)
        assert sub.t_start == 0.5 and sub.t_end == 1.0
        assert sub(0.75)[0] == pytest.approx(pp(0.75)[0])


def _controls(rng, phases, mass):
    controls = {}
    for i, (a, b) in enumerate(phases):
        force = PolyVec3.from_coeffs(*(rng.normal(scale=2.0, size=3) for _ in range(3)))
        # roughly carry the weight so the motion stays bounded
        force = force + PolyVec3.const([0.0, 0.0, 9.81 * mass / len(phases)])
        torque = PolyVec3.from_coeffs(*(rng.normal(scale=0.5, size=3) for _ in range(3)))
        point = PolyVec3.const(rng.normal(scale=0.2, size=3))
        controls[i] = PhaseControl(a, b, force, torque, point)
    return controls


class TestBuildStatePolys:
    """Tests for the analytic state construction."""

    def test_ballistic(self):
        """No contacts: r_z(t) = r_z(0) - 4.905 t^2."""
        params = ModelParams(mass=1.0)
        states = build_state_polys([], {}, CentroidalState.at_rest([0, 0, 1.0]), params, 0.0, 2.0)
        for t in (0.0, 0.3, 1.7, 2.0):
            assert states.r(t)[2] == pytest.approx(1.0 - 4.905 * t ** 2, abs=1e-12)

    def test_static_support(self):
        """A weight-compensating force at the CoM keeps every state constant."""
        params = ModelParams(mass=60.0)
        r0 = np.array([0.0, 0.0, 0.9])
        ctl = PhaseControl(0.0, 1.0, PolyVec3.const(-params.weight), PolyVec3.zero(), PolyVec3.const(r0))
        states = build_state_polys([(0.0, 1.0)], {0: ctl}, CentroidalState.at_rest(r0), params)
        for t in np.linspace(0.0, 1.0, 11):
            assert np.allclose(states.r(t), r0, atol=1e-12)
            assert np.allclose(states.l(t), 0.0, atol=1e-10)
            assert np.allclose(states.k(t), 0.0, atol=1e-10)

    def test_missing_controls(self):
        """Every phase needs control polynomials."""
        with pytest.raises(ScheduleError):
            build_state_polys([(0.0, 1.0)], {}, CentroidalState.at_rest(np.zeros(3)), ModelParams())

    def test_matches_rk4(self):
        """Random order-2 controls agree with the RK4 reference integrator."""
        rng = np.random.default_rng(7)
        params = ModelParams(mass=2.0)
        phases = [(0.0, 1.0), (0.5, 2.0)]
        controls = _controls(rng, phases, params.mass)
        x0 = CentroidalState(r=[0.0, 0.0, 0.8], l=[0.1, 0.0, 0.0], k=[0.0, 0.05, 0.0])
        states = build_state_polys(phases, controls, x0, params)

        def wrenches(t):
            points, ws = [], []
            for i, (a, b) in enumerate(phases):
                if a <= t < b:
                    s = (t - a) / (b - a)
                    ctl = controls[i]
                    points.append(ctl.point(s))
                    ws.append(ContactWrench(ctl.force(s), ctl.torque(s)))
            return points, ws

        # power-of-two step keeps phase boundaries exactly on the grid
        times, ref = integrate_state(x0, wrenches, params, 2.0, 2.0 ** -10)
        picks = np.linspace(0, len(times) - 2, 50).astype(int)
        for i in picks:
            t = times[i]
            got = np.concatenate([states.r(t), states.l(t), states.k(t)])
            scale = np.maximum(np.abs(ref[i]), 1.0)
            assert np.all(np.abs(got - ref[i]) <= 1e-6 * scale)

    def test_dynamics_residual_and_continuity(self):
        """l' and k' of the result match the dynamics; states are continuous at boundaries."""
        rng = np.random.default_rng(11)
        params = ModelParams(mass=3.0)
        phases = [(0.0, 1.0), (0.4, 1.5)]
        controls = _controls(rng, phases, params.mass)
        states = build_state_polys(phases, controls, CentroidalState.at_rest([0, 0, 1.0]), params)
        l_rate = states.l.derivative()
        k_rate = states.k.derivative()
        for t in np.linspace(0.01, 1.49, 40):
            f_sum = params.weight.copy()
            k_dot = np.zeros(3)
            for i, (a, b) in enumerate(phases):
                if a <= t < b:
                    s = (t - a) / (b - a)
                    f = controls[i].force(s)
                    f_sum += f
                    k_dot += controls[i].torque(s) + np.cross(controls[i].point(s) - states.r(t), f)
            assert np.allclose(l_rate(t), f_sum, atol=1e-9)
            assert np.allclose(k_rate(t), k_dot, atol=1e-9)
        for boundary in (0.4, 1.0):
            for traj in (states.r, states.l, states.k):
                seg_before = traj.segment_at(boundary - 1e-9)
                assert np.allclose(seg_before(boundary), traj(boundary), atol=1e-10)
