"""Tests for the contact schedule, swing splines and scenario documents."""

import numpy as np
import pytest

from src.config import DEFAULT_FRICTION, FORCE_CAP_FACTOR
from src.contact_plan import build_swings, foot_position, posture_at
from src.errors import ScenarioError, TimeRangeError
from src.scenario import parse_scenario, scenario_document, serialize_scenario


class TestParseScenario:
    """Tests for parse_scenario."""

    def test_standing_is_valid(self, standing):
        """Two coplanar phases spanning the horizon parse with defaults filled in."""
        assert standing.horizon == 2.0
        assert len(standing.schedule.phases) == 2
        left = standing.schedule.phases[0]
        assert left.friction == DEFAULT_FRICTION
        assert left.force_cap == pytest.approx(FORCE_CAP_FACTOR * 60.0 * 9.81)
        assert np.array_equal(left.normal, [0.0, 0.0, 1.0])

    def test_initial_state_defaults_to_rest(self, standing):
        """Without an initial state the robot starts at rest above its feet."""
        x0 = standing.initial_state
        assert np.array_equal(x0.l, np.zeros(3))
        assert np.array_equal(x0.k, np.zeros(3))
        assert x0.r[0] == pytest.approx(0.0, abs=1e-12)
        assert x0.r[2] > 0.0

    def test_bad_interval_names_phase(self, standing_text):
        """t_end <= t_start is reported against the phase."""
        text = standing_text.replace("t_start: 0.0, t_end: 2.0, center: [0.1", "t_start: 1.0, t_end: 1.0, center: [0.1")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert any(v.startswith("phases[1].t_end") for v in exc.value.violations)

    def test_all_violations_reported(self, standing_text):
        """Several problems are collected into one error."""
        text = standing_text.replace("mass: 60.0", "mass: -1.0").replace(
            "center: [-0.1, 0.0, 0.0]", "center: [-0.1, 0.0]"
        )
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        joined = " ".join(exc.value.violations)
        assert "model.mass" in joined
        assert "phases[0].center" in joined

    def test_not_yaml(self):
        """Unparseable text is a scenario error."""
        with pytest.raises(ScenarioError):
            parse_scenario("schedule: [unclosed")

    def test_point_contact_with_torque(self, standing_text):
        """Point contacts cannot carry torque."""
        text = standing_text.replace(
            "center: [-0.1, 0.0, 0.0]}", "center: [-0.1, 0.0, 0.0], point_contact: true, torque_bound: 2.0}"
        )
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert any("point_contact" in v for v in exc.value.violations)

    def test_flight_rejected_unless_allowed(self, standing_text):
        """A gap without any contact is rejected by default."""
        text = standing_text.replace("t_start: 0.0, t_end: 2.0, center: [0.1", "t_start: 1.5, t_end: 2.0, center: [0.1")
        text = text.replace("t_start: 0.0, t_end: 2.0, center: [-0.1", "t_start: 0.0, t_end: 1.0, center: [-0.1")
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(text)
        assert any("flight" in v for v in exc.value.violations)
        allowed = parse_scenario(text.replace("horizon: 2.0", "horizon: 2.0\n  allow_flight: true"))
        assert allowed.schedule.allow_flight

    def test_unknown_setting(self, standing_text):
        """Misspelled settings are reported."""
        with pytest.raises(ScenarioError) as exc:
            parse_scenario(standing_text + "lqr: {horizn: 2.0}\n")
        assert any("lqr.horizn" in v for v in exc.value.violations)

    def test_roundtrip_is_exact(self, stepping_stones):
        """parse -> serialize -> parse keeps every stored number bit for bit."""
        text = serialize_scenario(stepping_stones)
        again = parse_scenario(text)
        assert serialize_scenario(again) == text
        for a, b in zip(stepping_stones.schedule.phases, again.schedule.phases):
            assert np.array_equal(a.rotation, b.rotation)
            assert np.array_equal(a.center, b.center)

    def test_document_has_explicit_frames(self, stepping_stones):
        """The resolved document stores sole frames as vectors."""
        doc = scenario_document(stepping_stones)
        phase = doc["schedule"]["phases"][4]
        assert "rpy_deg" not in phase
        assert set(phase) >= {"normal", "tangent_x", "tangent_y"}


class TestBenchmarkSchedule:
    """Tests for the shipped stepping-stone scenario."""

    def test_phase_count(self, stepping_stones):
        """Phase count equals the active contacts summed over the intervals between switches."""
        sched = stepping_stones.schedule
        bounds = [0.0, *sched.switch_times, stepping_stones.horizon]
        expected = sum(len(sched.active_contacts(a)) for a in bounds[:-1])
        assert len(sched.phases) == expected == 10
        assert stepping_stones.horizon == 9.0

    def test_four_steps(self, stepping_stones):
        """Four landings, the last two on the flat plateau."""
        swings = build_swings(stepping_stones.schedule)
        assert len(swings) == 4
        assert [sw.effector for sw in sorted(swings, key=lambda s: s.t_start)] == [
            "left_foot", "right_foot", "left_foot", "right_foot",
        ]
        heights = sorted(sw.end[2] for sw in swings)
        assert heights == pytest.approx([0.1, 0.2, 0.3, 0.3])

    def test_two_tilted_stones(self, stepping_stones):
        """Two distinct soles are tilted 25 degrees from vertical."""
        tilted = {
            tuple(p.center)
            for p in stepping_stones.schedule.phases
            if np.degrees(np.arccos(np.clip(p.normal[2], -1.0, 1.0))) == pytest.approx(25.0)
        }
        assert len(tilted) == 2

    def test_frames_orthonormal(self, stepping_stones):
        """Every sole frame is a right-handed rotation."""
        for p in stepping_stones.schedule.phases:
            assert np.allclose(p.rotation.T @ p.rotation, np.eye(3), atol=1e-12)
            assert np.linalg.det(p.rotation) == pytest.approx(1.0)

    def test_switch_times(self, stepping_stones):
        """A contact switch every second after the first three."""
        assert stepping_stones.schedule.switch_times == (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)


class TestActiveContacts:
    """Tests for the half-open activity convention."""

    def test_double_and_single_support(self, stepping_stones):
        """Two contacts in double support, one in single support."""
        sched = stepping_stones.schedule
        assert len(sched.active_contacts(1.0)) == 2
        single = sched.active_contacts(3.5)
        assert [p.effector for p in single] == ["right_foot"]

    def test_departing_phase_excluded(self, stepping_stones):
        """At a switch the phase ending there is not active."""
        sched = stepping_stones.schedule
        at_lift = sched.active_contacts(3.0)
        assert [p.t_start for p in at_lift] == [3.0]
        at_swap = sched.active_contacts(4.0)
        assert [(p.effector, p.t_start) for p in at_swap] == [("left_foot", 4.0)]
        at_touch = sched.active_contacts(5.0)
        assert sorted(p.t_start for p in at_touch) == [5.0, 5.0]

    def test_outside_horizon(self, standing):
        """Times outside [0, T] raise."""
        with pytest.raises(TimeRangeError):
            standing.schedule.active_contacts(2.5)

    def test_horizon_end_counts_phases_ending_there(self, standing):
        """Phases closing at the horizon stay active at T."""
        assert len(standing.schedule.active_contacts(2.0)) == 2

    def test_continuation(self, stepping_stones):
        """A split stance phase continues on the same sole."""
        sched = stepping_stones.schedule
        first_right = sched.phases_of("right_foot")[0]
        nxt = sched.continuation(first_right)
        assert nxt is not None
        assert sched.phases[nxt].t_start == 3.0
        last_left = sched.phases_of("left_foot")[0]
        assert sched.continuation(last_left) is None


class TestSwings:
    """Tests for the swing splines and limb postures."""

    def test_swing_endpoints(self, stepping_stones):
        """Swings start and end on the adjacent sole centers."""
        sched = stepping_stones.schedule
        swings = build_swings(sched)
        assert len(swings) == 4
        for sw in swings:
            assert np.allclose(sw.position(sw.t_start), sw.start)
            assert np.allclose(sw.position(sw.t_end), sw.end)
            assert np.allclose(sw.velocity(sw.t_start), 0.0, atol=1e-12)
            mid = sw.position(0.5 * (sw.t_start + sw.t_end))
            assert mid[2] == pytest.approx(max(sw.start[2], sw.end[2]) + sw.apex_height)

    def test_foot_position(self, stepping_stones):
        """Stance feet sit on their sole centers."""
        sched, swings = stepping_stones.schedule, stepping_stones.swings
        assert np.allclose(foot_position(sched, swings, "left_foot", 1.0), [-0.1, 0.0, 0.0])
        airborne = foot_position(sched, swings, "left_foot", 3.5)
        assert airborne[2] > 0.0

    def test_posture_hits_requested_com(self, stepping_stones):
        """Solving the base for a CoM reproduces that CoM."""
        s = stepping_stones
        target = np.array([0.02, 0.3, 0.95])
        pose = posture_at(s.schedule, s.swings, s.limbs, s.params.mass, 5.5, 0.8, com=target)
        assert np.allclose(pose.com, target, atol=1e-12)

    def test_default_posture_above_feet(self, standing):
        """The default base hovers over the mean foot position."""
        s = standing
        pose = posture_at(s.schedule, s.swings, s.limbs, s.params.mass, 0.0, 0.8)
        assert np.allclose(pose.base, [0.0, 0.0, 0.8])
