import math
import os
import sys
from dataclasses import replace

import pytest
from scipy.optimize import brentq

# Add the project root to sys.path to allow imports from src
current_dir = os.path.dirname(__file__)
project_root = os.path.abspath(os.path.join(current_dir, os.pardir))
sys.path.insert(0, project_root)

from src.errors import ConfigError, SimulationDivergence
from src.params import load_params
from src.plant import (
    ActuatorModel, ArmServoModel, Breathing, CarriageModel, Composite, PlantState, Static,
    SuddenPulse, TissueModel, arm_mechanical_energy, contact_force, initial_arm_state, initial_end_effector_state,
    mechanical_energy, penetration, platform_motion, profile_from_mapping, step_arm,
    step_end_effector, tissue_preset,
)

DT = 1e-4
# Surface far below the probe: no contact anywhere in travel
NO_CONTACT = TissueModel(surface_rest_position=-1.0)


@pytest.fixture(scope="module")
def params():
    return load_params()


@pytest.fixture(scope="module")
def actuator(params):
    return ActuatorModel.from_params(params)


@pytest.fixture(scope="module")
def carriage(params):
    return CarriageModel.from_params(params)


def _at_theta(carriage, theta):
    return PlantState(theta=theta, probe_position=theta * carriage.geometry.pulley_radius)


# --- Contact ---

def test_contact_force_zero_when_separated():
    assert contact_force(TissueModel(), probe_pos=0.001, probe_vel=0.0, surface_pos=0.0, surface_vel=0.0) == 0.0


def test_contact_force_spring_term():
    tissue = TissueModel(stiffness=1500.0, damping=20.0)
    assert contact_force(tissue, -0.001, 0.0, 0.0, 0.0) == pytest.approx(1.5)


def test_contact_never_pulls():
    tissue = TissueModel(stiffness=1500.0, damping=20.0)
    # probe retracting fast: k*delta + c*delta_dot < 0
    assert contact_force(tissue, -0.001, 1.0, 0.0, 0.0) == 0.0


def test_series_stiffness():
    k = TissueModel(stiffness=1500.0).in_series(5e4).stiffness
    assert k == pytest.approx(1500.0 * 5e4 / 51500.0)


def test_tissue_presets(params):
    phantom, h_phantom = tissue_preset(params, 'phantom')
    porcine, h_porcine = tissue_preset(params, 'porcine')
    assert phantom.stiffness > porcine.stiffness
    assert (h_phantom, h_porcine) == (0.0, 0.2)
    with pytest.raises(ConfigError):
        tissue_preset(params, 'liver')


# --- Motion Profiles ---

def test_breathing_starts_at_zero_with_peak_velocity():
    profile = Breathing.from_cycles_per_minute(0.0099, 14.6)
    pos, vel = platform_motion(profile, 0.0)
    assert pos == 0.0
    assert vel == pytest.approx(0.0099 * 2 * math.pi * 14.6 / 60, rel=1e-12)
    assert vel == pytest.approx(0.01514, rel=1e-3)
    assert profile.period == pytest.approx(60 / 14.6)


def test_sudden_pulse_shape():
    pulse = SuddenPulse(amplitude=0.02, rise=0.25, fall=0.25, onset=1.0)
    assert platform_motion(pulse, 0.5) == (0.0, 0.0)
    assert platform_motion(pulse, 1.25)[0] == pytest.approx(0.02)
    assert platform_motion(pulse, 1.25)[1] == pytest.approx(0.0, abs=1e-12)
    assert platform_motion(pulse, 1.6) == (0.0, 0.0)
    assert platform_motion(pulse, 1.125)[0] == pytest.approx(0.01)


def test_sudden_pulse_velocity_is_derivative():
    pulse = SuddenPulse(amplitude=0.02, rise=0.25, fall=0.3, onset=0.0)
    h = 1e-7
    for t in (0.05, 0.2, 0.3, 0.45):
        numeric = (pulse.sample(t + h)[0] - pulse.sample(t - h)[0]) / (2 * h)
        assert pulse.sample(t)[1] == pytest.approx(numeric, rel=1e-5)


def test_composite_sums_components():
    a = Breathing(amplitude=0.01, frequency=0.25)
    b = SuddenPulse(amplitude=0.02, rise=0.25, fall=0.25)
    t = 0.2
    pos, vel = Composite((a, b)).sample(t)
    assert pos == pytest.approx(a.sample(t)[0] + b.sample(t)[0])
    assert vel == pytest.approx(a.sample(t)[1] + b.sample(t)[1])


def test_profile_mapping():
    assert profile_from_mapping({'type': 'static'}) == Static()
    assert profile_from_mapping({'type': 'breathing', 'amplitude': 0.0099, 'cycles_per_minute': 14.6}) \
        == Breathing.from_cycles_per_minute(0.0099, 14.6)
    with pytest.raises(ConfigError):
        profile_from_mapping({'type': 'earthquake'})


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        platform_motion(Static(), -0.1)


# --- End-Effector ---

def test_invalid_models_rejected():
    with pytest.raises(ConfigError):
        ActuatorModel(backdrive_friction_torque=3.0)
    with pytest.raises(ConfigError):
        TissueModel(stiffness=0.0)
    with pytest.raises(ConfigError):
        ArmServoModel(velocity_limit=0.0)


def test_initial_state_touches_with_zero_force(carriage, params):
    tissue, _ = tissue_preset(params, 'porcine')
    state = initial_end_effector_state(carriage, tissue, Static())
    assert state.contact_force == 0.0
    assert state.probe_position == pytest.approx(carriage.mount_height)
    assert penetration(carriage, tissue, state) == 0.0


def test_travel_clamped_at_both_ends(actuator, carriage):
    state = _at_theta(carriage, carriage.max_theta - 0.01)
    for _ in range(2000):
        state = step_end_effector(state, actuator, carriage, NO_CONTACT, 3.0, Static(), DT)
    assert state.theta == carriage.max_theta
    assert state.omega == 0.0

    state = _at_theta(carriage, 0.01)
    for _ in range(2000):
        state = step_end_effector(state, actuator, carriage, NO_CONTACT, -3.0, Static(), DT)
    assert state.theta == 0.0
    assert state.omega == 0.0


def test_torque_command_saturates(actuator, carriage):
    start = _at_theta(carriage, 0.5)
    a = step_end_effector(start, actuator, carriage, NO_CONTACT, 3.0, Static(), DT)
    b = step_end_effector(start, actuator, carriage, NO_CONTACT, 30.0, Static(), DT)
    assert a == b


def _push(actuator, carriage, scale):
    push = scale * actuator.backdrive_friction_torque / carriage.geometry.pulley_radius
    state = _at_theta(carriage, 0.5 * carriage.max_theta)
    start = state.probe_position
    for _ in range(5000):
        state = step_end_effector(state, actuator, carriage, NO_CONTACT, 0.0, Static(), DT, external_force=push)
    return start - state.probe_position


def test_backdrivable_above_friction_threshold(actuator, carriage):
    assert _push(actuator, carriage, 1.5) >= 1e-3


def test_creeps_below_friction_threshold(actuator, carriage):
    # tanh friction holds a sub-threshold push to a creep where friction + damping balance it
    held = 0.5 * actuator.backdrive_friction_torque
    omega = brentq(lambda w: actuator.friction_torque(w) + actuator.viscous_damping * w - held, 0.0, 1.0)
    creep = 0.5 * carriage.geometry.pulley_radius * omega
    assert creep == pytest.approx(1.308e-5, rel=1e-3)
    assert _push(actuator, carriage, 0.5) == pytest.approx(creep, rel=0.02)


def test_energy_does_not_grow_unpowered(actuator, carriage, params):
    tissue, _ = tissue_preset(params, 'porcine')
    x = carriage.mount_height + 0.005
    state = PlantState(theta=x / carriage.geometry.pulley_radius, probe_position=x,
                       contact_force=tissue.stiffness * 0.005)
    energy = [mechanical_energy(state, actuator, carriage, tissue)]
    for i in range(1, 3001):
        state = step_end_effector(state, actuator, carriage, tissue, 0.0, Static(), DT)
        if i % 100 == 0:
            energy.append(mechanical_energy(state, actuator, carriage, tissue))
    tol = 1e-6 * energy[0]
    assert all(b <= a + tol for a, b in zip(energy, energy[1:]))
    assert energy[-1] < energy[0]


def test_non_finite_command_raises(actuator, carriage):
    with pytest.raises(SimulationDivergence) as info:
        step_end_effector(replace(PlantState(), time=0.25), actuator, carriage, NO_CONTACT,
                          float('nan'), Static(), DT)
    assert info.value.time_s == 0.25


# --- Rigid Arm ---

def test_arm_servo_is_first_order_lag():
    servo = ArmServoModel(velocity_limit=10.0, acceleration_limit=1e6)
    state = PlantState()
    for _ in range(500):
        state = step_arm(state, servo, NO_CONTACT, 1e-3, Static(), DT)
    assert state.probe_position / 1e-3 == pytest.approx(1 - math.exp(-1), rel=0.05)


def test_arm_setpoint_latched_at_servo_rate():
    servo = ArmServoModel()
    state = step_arm(PlantState(), servo, NO_CONTACT, 0.001, Static(), DT)
    for _ in range(79):
        state = step_arm(state, servo, NO_CONTACT, 0.002, Static(), DT)
        assert state.servo_setpoint == 0.001
    state = step_arm(state, servo, NO_CONTACT, 0.002, Static(), DT)
    assert state.servo_setpoint == 0.002


def test_arm_velocity_limited():
    servo = ArmServoModel()
    state = PlantState()
    for _ in range(3000):
        state = step_arm(state, servo, NO_CONTACT, 0.5, Static(), DT)
        assert state.probe_velocity <= servo.velocity_limit + 1e-12


def test_arm_pulse_force_follows_series_stiffness(params, carriage):
    servo = ArmServoModel.from_params(params)
    tissue, _ = tissue_preset(params, 'porcine')
    pulse = SuddenPulse(amplitude=0.02, rise=0.25, fall=0.25, onset=0.1)
    state = initial_arm_state(carriage, tissue, pulse)
    hold = state.probe_position
    peak = 0.0
    for _ in range(7000):
        state = step_arm(state, servo, tissue, hold, pulse, DT, carriage=carriage)
        peak = max(peak, state.contact_force)
    k_eff = tissue.in_series(servo.structural_stiffness).stiffness
    assert state.probe_position == hold
    assert peak == pytest.approx(k_eff * 0.02, rel=0.02)


def test_arm_energy_held_in_contact(params, carriage):
    servo = ArmServoModel.from_params(params)
    tissue, _ = tissue_preset(params, 'porcine')
    x = carriage.mount_height + 0.002
    state = replace(initial_arm_state(carriage, tissue, Static()), probe_position=x, servo_setpoint=x)
    stored = 0.5 * tissue.in_series(servo.structural_stiffness).stiffness * 0.002 ** 2
    assert arm_mechanical_energy(state, servo, carriage, tissue) == pytest.approx(stored)
    for _ in range(1000):
        state = step_arm(state, servo, tissue, x, Static(), DT, carriage=carriage)
    assert arm_mechanical_energy(state, servo, carriage, tissue) == pytest.approx(stored)
    moving = replace(state, probe_velocity=0.1)
    assert arm_mechanical_energy(moving, servo, carriage, tissue) == \
        pytest.approx(stored + 0.5 * servo.effective_end_mass * 0.01)
