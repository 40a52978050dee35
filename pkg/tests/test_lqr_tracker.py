"""Tests for linearization, Riccati gains and the sliding gain window."""

import numpy as np
import pytest

from src.centroidal_model import CentroidalState, ContactWrench, skew, state_derivative
from src.errors import ContractViolation, InvalidArgumentError, TimeRangeError
from src.lqr_tracker import (
    BLOCK_NAMES,
    LqrWeights,
    backward_riccati,
    block_norms,
    discretize,
    linearize,
    linearize_step,
    load_gains,
    momentum_gain,
    momentum_rate_ref,
    policy,
    riccati,
    sliding_recompute,
    write_gains,
)
from src.scenario import LqrSettings


def _brute_force(A, B, Q, R, N, x0):
    """Optimal finite-horizon cost and first input by stacking the whole horizon."""
    n, m = B.shape
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])
    Phi = np.vstack(powers)
    Gamma = np.zeros(((N + 1) * n, N * m))
    for k in range(1, N + 1):
        for j in range(k):
            Gamma[k * n:(k + 1) * n, j * m:(j + 1) * m] = powers[k - 1 - j] @ B
    Qbar = np.kron(np.eye(N + 1), Q)
    Rbar = np.kron(np.eye(N), R)
    H = Gamma.T @ Qbar @ Gamma + Rbar
    U = -np.linalg.solve(H, Gamma.T @ Qbar @ Phi @ x0)
    X = Phi @ x0 + Gamma @ U
    return float(X @ Qbar @ X + U @ Rbar @ U), U[:m]


class TestLinearize:
    """Tests for linearize and discretize."""

    def test_standing_structure(self, standing_plan):
        """Momentum drives the CoM; the summed force couples CoM to angular rate."""
        A, B = linearize(standing_plan, 1.0)
        mass = standing_plan.scenario.params.mass
        assert A.shape == (9, 9)
        assert B.shape == (9, 12)
        assert np.allclose(A[0:3, 3:6], np.eye(3) / mass)
        total = sum(aw.wrench.force for aw in standing_plan.wrenches_at(1.0))
        assert np.allclose(A[6:9, 0:3], skew(total), atol=1e-9)
        assert np.allclose(total, [0.0, 0.0, mass * 9.81], atol=1e-3)
        assert np.allclose(B[0:3], 0.0)
        assert np.allclose(B[3:6, 0:3], np.eye(3))
        assert np.allclose(B[3:6, 6:9], np.eye(3))

    def test_discretize(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0], [1.0]])
        Ad, Bd = discretize(A, B, 0.1)
        assert np.allclose(Ad, [[1.0, 0.1], [0.0, 1.0]])
        assert np.allclose(Bd, [[0.0], [0.1]])

    def test_step_reference(self, step_plan):
        step = linearize_step(step_plan, 0.3, 0.01)
        assert step.contacts == (0, 1)
        assert step.effectors == ("left_foot", "right_foot")
        assert step.lam_ref.shape == (12,)
        assert np.allclose(step.x_ref, step_plan.state_at(0.3).to_vector())
        assert step.poles.shape == (2, 3)

    def test_single_support(self, step_plan):
        step = linearize_step(step_plan, 0.75, 0.01)
        assert step.effectors == ("right_foot",)
        assert step.B.shape == (9, 6)

    @pytest.mark.parametrize("t", [0.3, 0.75, 1.2])
    def test_jacobians_match_finite_differences(self, step_plan, t):
        """Central differences of the state derivative about the plan reproduce A and B."""
        A, B = linearize(step_plan, t)
        params = step_plan.scenario.params
        step = linearize_step(step_plan, t, 0.01)
        poles = list(step.poles)

        def f(x, lam):
            wrenches = [ContactWrench.from_vector(lam[6 * i: 6 * i + 6]) for i in range(len(poles))]
            return state_derivative(CentroidalState.from_vector(x), poles, wrenches, params)

        h = 1e-4
        A_fd = np.column_stack([
            (f(step.x_ref + h * e, step.lam_ref) - f(step.x_ref - h * e, step.lam_ref)) / (2 * h)
            for e in np.eye(9)
        ])
        B_fd = np.column_stack([
            (f(step.x_ref, step.lam_ref + h * e) - f(step.x_ref, step.lam_ref - h * e)) / (2 * h)
            for e in np.eye(step.lam_ref.size)
        ])
        assert np.allclose(A, A_fd, atol=1e-5)
        assert np.allclose(B, B_fd, atol=1e-6)


class TestRiccati:
    """Tests for backward_riccati and riccati."""

    def test_double_integrator_matches_brute_force(self):
        dt, N = 0.1, 15
        A = np.array([[1.0, dt], [0.0, 1.0]])
        B = np.array([[0.0], [dt]])
        Q = np.eye(2)
        R = np.array([[0.5]])
        K, P = backward_riccati([A] * N, [B] * N, Q, Q, [R] * N)
        x0 = np.array([1.0, -0.5])
        cost, u0 = _brute_force(A, B, Q, R, N, x0)
        assert x0 @ P[0] @ x0 == pytest.approx(cost, rel=1e-9)
        assert np.allclose(-K[0] @ x0, u0, atol=1e-9)

    def test_long_horizon_first_gain(self):
        """Unit-mass double integrator over 200 steps of 0.01 s."""
        dt, N = 0.01, 200
        A = np.array([[1.0, dt], [0.0, 1.0]])
        B = np.array([[0.0], [dt]])
        R = np.array([[1.0]])
        K, _ = backward_riccati([A] * N, [B] * N, np.eye(2), np.eye(2), [R] * N)
        columns = [_brute_force(A, B, np.eye(2), R, N, e)[1] for e in np.eye(2)]
        assert np.allclose(K[0], -np.column_stack(columns), atol=1e-8)

    def test_zero_input_gives_zero_gain(self):
        A = np.eye(3)
        B = np.zeros((3, 2))
        K, P = backward_riccati([A] * 4, [B] * 4, np.eye(3), np.eye(3), [np.eye(2)] * 4)
        assert all(np.allclose(k, 0.0) for k in K)
        assert np.allclose(P[0], 5 * np.eye(3))

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            backward_riccati([np.eye(2)] * 3, [np.eye(2)] * 2, np.eye(2), np.eye(2), [np.eye(2)] * 3)

    def test_cost_to_go_psd(self, step_plan):
        weights = LqrWeights.from_settings(step_plan.scenario.lqr)
        steps = [linearize_step(step_plan, 0.4 + 0.01 * k, 0.01) for k in range(30)]
        schedule = riccati(steps, weights)
        assert len(schedule.gains) == 30
        assert len(schedule.cost_to_go) == 31
        for P in schedule.cost_to_go:
            assert np.allclose(P, P.T)
            assert np.min(np.linalg.eigvalsh(P)) > -1e-9

    def test_empty_window(self):
        with pytest.raises(ContractViolation):
            riccati([], LqrWeights.from_settings(LqrSettings()))


class TestPolicy:
    """Tests for policy and momentum_rate_ref."""

    @pytest.fixture()
    def window(self, step_plan):
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        return provider.gains_at(0.3)

    def test_reference_state(self, window):
        schedule, k = window
        step = schedule.steps[k]
        assert np.allclose(policy(schedule, step.x_ref, step.t, k), step.lam_ref)
        assert np.allclose(momentum_rate_ref(schedule, step.x_ref, step.t, k), step.hdot_ref)

    def test_linear_in_error(self, window):
        schedule, k = window
        step = schedule.steps[k]
        dx = np.linspace(-0.01, 0.01, 9)
        lam = policy(schedule, step.x_ref + dx, step.t, k)
        assert np.allclose(lam - step.lam_ref, -schedule.gains[k] @ dx)
        twice = policy(schedule, step.x_ref + 2 * dx, step.t, k)
        assert np.allclose(twice - step.lam_ref, 2 * (lam - step.lam_ref))

    def test_plan_rate(self, step_plan, window):
        schedule, k = window
        step = schedule.steps[k]
        assert np.allclose(step.hdot_ref, step_plan.rate_at(step.t))

    def test_outside_window(self, window):
        schedule, _ = window
        with pytest.raises(TimeRangeError):
            policy(schedule, schedule.steps[0].x_ref, schedule.t0 - 0.1)

    def test_angular_coupling(self, window):
        """CoM errors feed back into the angular momentum rate."""
        schedule, k = window
        norms = dict(zip(BLOCK_NAMES, block_norms(schedule.steps[k], schedule.gains[k])))
        assert norms["kdot_r"] > 0.0
        assert norms["ldot_r"] > 0.0


class TestGainProvider:
    """Tests for the sliding gain window."""

    def test_static_plan_windows_agree(self, standing_plan):
        provider = sliding_recompute(standing_plan, horizon=0.5, dt=0.01, stride=0.05)
        first = provider.window(0)
        K0 = [K.copy() for K in first.gains]
        later = provider.window(provider.window_start(0.7))
        scale = max(1.0, max(float(np.max(np.abs(K))) for K in K0))
        for a, b in zip(K0, later.gains):
            assert np.max(np.abs(a - b)) <= 1e-4 * scale

    def test_double_support_closed_loop_contracts(self, standing_plan):
        """First-step closed loop of the scenario's own 2 s window is stable."""
        provider = sliding_recompute(standing_plan)
        assert provider.n_steps == 200
        schedule = provider.window(0)
        step = schedule.steps[0]
        closed = step.A - step.B @ schedule.gains[0]
        assert np.max(np.abs(np.linalg.eigvals(closed))) < 1.0

    def test_horizon_longer_than_plan(self, step_plan):
        with pytest.raises(ContractViolation):
            sliding_recompute(step_plan, horizon=2.0, dt=0.01, stride=0.01)

    def test_steps_per_window(self, standing_plan):
        provider = sliding_recompute(standing_plan, horizon=2.0, dt=0.02, stride=0.02)
        assert provider.n_steps == 100

    def test_dt_must_divide_horizon(self, step_plan):
        with pytest.raises(InvalidArgumentError):
            sliding_recompute(step_plan, horizon=0.5, dt=0.03, stride=0.03)

    def test_non_positive(self, step_plan):
        with pytest.raises(InvalidArgumentError):
            sliding_recompute(step_plan, horizon=0.5, dt=0.0, stride=0.05)

    def test_window_start_on_stride_grid(self, step_plan):
        """Window starts floor to the stride grid and never reach the plan end."""
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        assert provider.n_control_steps == 150
        assert provider.window_start(0.0) == 0
        assert provider.window_start(0.32) == 30
        assert provider.window_start(1.4) == 140
        assert provider.window_start(1.49) == 145
        with pytest.raises(TimeRangeError):
            provider.window_start(2.0)

    def test_windows_shrink_at_plan_end(self, step_plan):
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        for t in (0.0, 0.5, 1.2, 1.49):
            g = provider.window_start(t)
            schedule, k = provider.gains_at(t)
            assert len(schedule.steps) == provider.window_length(g) == min(50, 150 - g)
            assert schedule.steps[k].t <= t + 1e-9

    def test_late_window_starts_before_query(self, step_plan):
        """A query 0.1 s before the end is served by a window that began at or before it."""
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        t = step_plan.t1 - 0.1
        schedule, k = provider.gains_at(t)
        assert schedule.t0 <= t + 1e-9
        assert len(schedule.steps) < provider.n_steps
        assert schedule.steps[-1].t == pytest.approx(step_plan.t1 - 0.01)

    def test_standing_last_window(self, standing_plan):
        provider = sliding_recompute(standing_plan, horizon=0.5, dt=0.01, stride=0.05)
        g = provider.window_start(1.9)
        assert g == 190
        assert len(provider.window(g).steps) == 10

    def test_table_workers_agree(self, step_plan):
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        serial = provider.table(workers=1)
        pooled = provider.table(workers=4)
        assert len(serial.steps) == provider.n_control_steps == 150
        for a, b in zip(serial.gains, pooled.gains):
            assert np.array_equal(a, b)
        assert serial.meta["steps_per_window"] == 50

    def test_table_matches_window(self, step_plan):
        """The applied gain is the one from the window serving that time."""
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        table = provider.table(workers=1)
        schedule, k = provider.gains_at(0.73)
        j = 73
        assert table.steps[j].t == pytest.approx(0.73)
        assert np.allclose(table.gains[j], schedule.gains[k])

    def test_table_applies_cached_window(self, step_plan):
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        table = provider.table(workers=1)
        for j in (0, 37, 120, 149):
            g = provider.window_start(step_plan.t0 + j * 0.01)
            assert np.array_equal(table.gains[j], provider.window(g).gains[j - g])

    def test_gain_jumps_at_lift_off(self, step_plan):
        """The left foot lifts at 0.5 s: the gain loses its left-foot rows there."""
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        table = provider.table(workers=1)
        before, after = table.steps[49], table.steps[50]
        assert before.t == pytest.approx(0.49)
        assert table.gains[49].shape == (12, 9)
        assert table.gains[50].shape == (6, 9)
        G_before = momentum_gain(before, table.gains[49])
        G_after = momentum_gain(after, table.gains[50])
        assert np.linalg.norm(G_after - G_before) > 1e-3 * np.linalg.norm(G_before)

    def test_export_reload(self, step_plan, tmp_path):
        provider = sliding_recompute(step_plan, horizon=0.5, dt=0.01, stride=0.05)
        table = provider.table(workers=1)
        paths = write_gains(table, tmp_path / "gains", plot=False)
        assert {p.name for p in paths} == {"gains.yaml", "gain_norms.csv"}
        loaded = load_gains(tmp_path / "gains")
        assert loaded.dt == table.dt
        assert len(loaded.steps) == len(table.steps)
        schedule, k = loaded.gains_at(0.42)
        assert np.allclose(schedule.gains[k], table.gains[42])
        assert np.allclose(schedule.steps[k].lam_ref, table.steps[42].lam_ref)
        assert loaded.steps[42].A is None


@pytest.mark.slow
class TestBenchmarkGains:
    """Gains along the stepping-stone plan."""

    def test_cross_coupling_on_stone(self, benchmark_run):
        """On a tilted stone the gain mixes CoM into angular rate and angular momentum into force."""
        plan = benchmark_run[0]
        provider = sliding_recompute(plan)
        schedule, k = provider.gains_at(4.5)
        assert schedule.steps[k].effectors == ("left_foot",)
        norms = dict(zip(BLOCK_NAMES, block_norms(schedule.steps[k], schedule.gains[k])))
        assert norms["kdot_r"] > 0.0
        assert norms["ldot_k"] > 0.0
