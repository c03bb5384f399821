"""Plant dynamics, fault injection, and the frozen nominal controller."""

import numpy as np
import pytest

from cerres.errors import ConfigError, NonFiniteInputError
from cerres.plant import (
    FAULT_FAMILIES,
    DesiredTrajectory,
    FaultSpec,
    NominalGains,
    PlantModel,
    PlantState,
    nominal_action,
    plant_step,
    reward,
    unforced_energy,
)
from cerres.reference import RefSample


def _simple_model(J=1, inertia=1.0, damping=0.0, coupling=0.0, friction=0.0):
    return PlantModel(
        J=J,
        inertia=np.full(J, inertia),
        damping=np.full(J, damping),
        coupling=np.eye(J) * coupling,
        friction_coulomb=np.full(J, friction),
        torque_limit=np.full(J, 10.0),
    )


def _state(q=0.0, qd=0.0, J=1, dt=0.01):
    return PlantState(q=np.full(J, q), qd=np.full(J, qd), t=0, dt=dt)


# --- dynamics ---------------------------------------------------------------------

def test_zero_state_zero_torque_equilibrium():
    model = _simple_model()
    s = plant_step(model, _state(), np.zeros(1), None, 0)
    assert np.array_equal(s.q, np.zeros(1))
    assert np.array_equal(s.qd, np.zeros(1))


def test_single_euler_step_hand_values():
    model = _simple_model()
    s = plant_step(model, _state(), np.array([1.0]), None, 0)
    assert s.qd[0] == pytest.approx(0.01)
    assert s.q[0] == pytest.approx(0.0001)


def test_non_finite_torque_rejected():
    model = _simple_model()
    with pytest.raises(NonFiniteInputError):
        plant_step(model, _state(), np.array([np.inf]), None, 0)


def test_determinism():
    model = _simple_model(J=2, coupling=0.1, damping=0.01)
    runs = []
    for _ in range(2):
        s = PlantState(q=np.array([0.1, -0.2]), qd=np.zeros(2), t=0, dt=0.01)
        traj = []
        for t in range(50):
            s = plant_step(model, s, np.array([0.3, -0.1]), None, t)
            traj.append(s.q.copy())
        runs.append(np.array(traj))
    assert np.array_equal(runs[0], runs[1])


def test_unforced_energy_dissipates_with_damping():
    model = _simple_model(J=2, damping=0.05, coupling=0.2)
    s = PlantState(q=np.array([0.3, -0.1]), qd=np.array([0.2, 0.1]), t=0, dt=0.01)
    prev = unforced_energy(model, s)
    for t in range(200):
        s = plant_step(model, s, np.zeros(2), None, t)
        cur = unforced_energy(model, s)
        assert cur <= prev + 1e-4 * s.dt  # integrator tolerance
        prev = cur


def test_model_validation():
    with pytest.raises(ConfigError):
        _simple_model(inertia=0.0)
    with pytest.raises(ConfigError):
        PlantModel(J=2, inertia=np.ones(2), damping=np.zeros(2),
                   coupling=np.array([[0.0, 1.0], [0.0, 0.0]]),
                   friction_coulomb=np.zeros(2), torque_limit=np.ones(2))


# --- faults -----------------------------------------------------------------------

def test_actuator_scale_halves_effective_torque():
    model = _simple_model()
    fault = FaultSpec(family="actuator_scale", severity=0.5)
    faulted = plant_step(model, _state(), np.array([1.0]), fault, 0)
    halved = plant_step(model, _state(), np.array([0.5]), None, 0)
    assert np.array_equal(faulted.qd, halved.qd)


def test_fault_neutral_before_onset():
    model = _simple_model()
    fault = FaultSpec(family="actuator_scale", severity=0.5, onset_step=10)
    a = plant_step(model, _state(), np.array([1.0]), fault, 9)
    b = plant_step(model, _state(), np.array([1.0]), None, 9)
    assert np.array_equal(a.qd, b.qd)
    assert not fault.active(9) and fault.active(10)


def test_fault_inactive_after_removal():
    fault = FaultSpec(family="actuator_scale", severity=0.5,
                      onset_step=10, removal_step=20)
    assert fault.active(19) and not fault.active(20)


def test_fault_affects_only_masked_joints():
    model = _simple_model(J=2)
    fault = FaultSpec(family="actuator_scale", severity=0.5, affected_joints=(0,))
    s = plant_step(model, _state(J=2), np.array([1.0, 1.0]), fault, 0)
    assert s.qd[0] == pytest.approx(0.005)
    assert s.qd[1] == pytest.approx(0.01)


def test_mass_multiplier_slows_acceleration():
    model = _simple_model()
    fault = FaultSpec(family="mass_multiplier", severity=1.5)
    s = plant_step(model, _state(), np.array([1.0]), fault, 0)
    assert s.qd[0] == pytest.approx(0.01 / 1.5)


def test_fault_family_and_severity_validation():
    with pytest.raises(ConfigError):
        FaultSpec(family="gravity_flip", severity=0.5)
    lo, hi = FAULT_FAMILIES["actuator_scale"]
    with pytest.raises(ConfigError):
        FaultSpec(family="actuator_scale", severity=hi + 0.5)
    with pytest.raises(ConfigError):
        FaultSpec(family="actuator_scale", severity=0.5,
                  onset_step=30, removal_step=10)


# --- nominal controller and reward ----------------------------------------------------

def test_nominal_action_vanishes_at_rest_on_target():
    model = _simple_model()
    gains = NominalGains(Kp=np.array([2.0]), Kd=np.array([0.5]))
    ref = RefSample(q_d=np.zeros(1), qd_d=np.zeros(1), qdd_d=np.zeros(1))
    assert np.array_equal(nominal_action(model, _state(), ref, gains), np.zeros(1))


def test_nominal_action_pure_position_error():
    model = _simple_model(coupling=0.0)
    gains = NominalGains(Kp=np.array([2.0]), Kd=np.array([0.0]))
    ref = RefSample(q_d=np.array([0.3]), qd_d=np.zeros(1), qdd_d=np.zeros(1))
    a = nominal_action(model, _state(q=0.1), ref, gains)
    assert a[0] == pytest.approx(2.0 * 0.2)


def test_nominal_action_clamped_to_torque_limit():
    model = _simple_model()
    gains = NominalGains(Kp=np.array([1000.0]), Kd=np.array([0.0]))
    ref = RefSample(q_d=np.array([1.0]), qd_d=np.zeros(1), qdd_d=np.zeros(1))
    assert nominal_action(model, _state(), ref, gains)[0] == 10.0


def test_reward_maximum_at_perfect_tracking():
    ref = RefSample(q_d=np.zeros(1), qd_d=np.zeros(1), qdd_d=np.zeros(1))
    assert reward(_state(), ref, np.zeros(1)) == 0.0


def test_reward_hand_value():
    ref = RefSample(q_d=np.array([0.1]), qd_d=np.zeros(1), qdd_d=np.zeros(1))
    assert reward(_state(), ref, np.zeros(1)) == pytest.approx(-0.01)


def test_desired_trajectory_is_periodic():
    traj = DesiredTrajectory(amplitudes=np.array([0.3, 0.2]),
                             phase_shift=np.array([0.0, 0.5]),
                             period_steps=200, dt=0.01)
    a, b = traj.sample(7), traj.sample(207)
    assert np.allclose(a.q_d, b.q_d)
    assert np.allclose(a.qdd_d, b.qdd_d)
