"""
Deterministic multi-rate scenario runner.

Time is an integer tick counter at physics_dt; sensing, control and servo
latching happen on integer multiples of it, so the schedule never drifts.
At every sensor tick the contact force is sampled and, on control ticks, the
controller acts on that same sample before physics advances (sample-then-act,
zero computational delay unless control_latency is set).
"""
import hashlib
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .control import (
    PidGains, PidState, arm_force_controller, controller_config,
    end_effector_force_controller, gain_bank,
)
from .errors import ConfigError, ScheduleError, SimulationDivergence
from .params import load_params
from .plant import ActuatorModel, ArmPlant, ArmServoModel, CarriageModel, EndEffectorPlant
from .protocol import CodecRanges, CommandFrame, decode_command, encode_command

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ('time_s', 'target_N', 'measured_N', 'true_N', 'probe_m', 'platform_m', 'command')


@dataclass(frozen=True)
class LoopSchedule:
    physics_dt: float = 1e-4
    sensor_rate: float = 100.0
    control_rate: float = 100.0
    servo_rate: float = 125.0
    control_latency: float = 0.0

    @classmethod
    def from_params(cls, params):
        s = params['schedule']
        return cls(
            physics_dt=s['physics_dt_s'],
            sensor_rate=s['sensor_rate_hz'],
            control_rate=s['control_rate_hz'],
            servo_rate=s['servo_rate_hz'],
            control_latency=s.get('control_latency_s', 0.0),
        )

    def _ticks(self, rate, name):
        if not rate > 0:
            raise ScheduleError(f"{name} must be positive, got {rate}")
        ticks = round(1.0 / (rate * self.physics_dt))
        if ticks < 1:
            raise ScheduleError(
                f"{name} {rate} Hz is faster than the physics step ({self.physics_dt} s)")
        return ticks

    @property
    def sensor_ticks(self):
        return self._ticks(self.sensor_rate, 'sensor_rate')

    @property
    def control_ticks(self):
        return self._ticks(self.control_rate, 'control_rate')

    @property
    def servo_ticks(self):
        return self._ticks(self.servo_rate, 'servo_rate')

    @property
    def latency_ticks(self):
        return round(self.control_latency / self.physics_dt)

    def validate(self):
        if not (math.isfinite(self.physics_dt) and self.physics_dt > 0):
            raise ScheduleError(f"physics_dt must be positive, got {self.physics_dt}")
        if self.control_rate > self.sensor_rate:
            raise ScheduleError(
                f"control_rate ({self.control_rate} Hz) exceeds sensor_rate ({self.sensor_rate} Hz)")
        sensor, control = self.sensor_ticks, self.control_ticks
        self._ticks(self.servo_rate, 'servo_rate')
        if control % sensor:
            raise ScheduleError(
                f"control period ({control} ticks) is not a multiple of the sensor period ({sensor} ticks)")
        if self.control_latency < 0:
            raise ScheduleError("control_latency must be >= 0")
        return self

    def with_physics_dt(self, physics_dt):
        return replace(self, physics_dt=physics_dt)


@dataclass(frozen=True)
class SensorModel:
    noise_std: float = 0.0
    quantization: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_std < 0 or self.quantization < 0:
            raise ConfigError("sensor noise_std and quantization must be >= 0")

    @classmethod
    def from_params(cls, params, seed=0):
        s = params['sensor']
        return cls(noise_std=s['noise_std_n'], quantization=s['quantization_n'], seed=seed)

    @property
    def ideal(self):
        return self.noise_std == 0 and self.quantization == 0

    def measure(self, force, rng):
        if self.noise_std > 0:
            force += rng.normal(0.0, self.noise_std)
        if self.quantization > 0:
            force = round(force / self.quantization) * self.quantization
        return force


@dataclass(frozen=True)
class SimTrace:
    """Sensor-rate samples of one run. Arrays are read-only once built."""
    time: np.ndarray
    target: np.ndarray
    measured: np.ndarray
    true_force: np.ndarray
    probe: np.ndarray
    platform: np.ndarray
    command: np.ndarray
    name: str = ''
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = len(self.time)
        for col in (self.target, self.measured, self.true_force, self.probe, self.platform, self.command):
            if len(col) != n:
                raise ValueError("SimTrace columns must have equal length")
        for col in self.columns():
            col.setflags(write=False)

    def __len__(self):
        return len(self.time)

    def columns(self):
        return (self.time, self.target, self.measured, self.true_force,
                self.probe, self.platform, self.command)

    def as_dict(self):
        return dict(zip(TRACE_COLUMNS, self.columns()))

    def identical_to(self, other):
        return all(np.array_equal(a, b) for a, b in zip(self.columns(), other.columns()))

    @property
    def sample_period(self):
        return float(self.time[1] - self.time[0]) if len(self) > 1 else 0.0


def derive_seed(master_seed, replicate):
    """64-bit replicate seed: first 8 bytes (big-endian) of SHA-256 of '<master>:<replicate>'."""
    digest = hashlib.sha256(f"{int(master_seed)}:{int(replicate)}".encode('ascii')).digest()
    return int.from_bytes(digest[:8], 'big')


def resolve_gains(controller):
    if isinstance(controller, PidGains):
        return controller
    return gain_bank(int(controller))


def build_plant(spec, params, tissue):
    carriage = CarriageModel.from_params(params)
    if spec.architecture == 'end_effector':
        return EndEffectorPlant(ActuatorModel.from_params(params), carriage, tissue, spec.profile)
    servo = replace(ArmServoModel.from_params(params), command_rate=spec.schedule.servo_rate)
    return ArmPlant(servo, carriage, tissue, spec.profile)


def run_scenario(spec, replicate=0, params=None, reference=None):
    """
    Runs one replicate of a scenario and returns its SimTrace.

    `reference` optionally overrides the constant target with a function of
    time (used by the bandwidth sweep).
    """
    params = params or load_params()
    schedule = spec.schedule.validate()
    dt = schedule.physics_dt
    sensor_ticks, control_ticks = schedule.sensor_ticks, schedule.control_ticks
    n_samples = round(spec.duration * schedule.sensor_rate)
    if n_samples < 1:
        raise ScheduleError(f"duration {spec.duration} s yields no sensor samples")

    seed = derive_seed(spec.seed, replicate)
    rng = np.random.default_rng(seed)
    tissue = spec.tissue
    if spec.heterogeneity > 0:
        tissue = tissue.scaled(1.0 + spec.heterogeneity * rng.uniform(-1.0, 1.0))
    noise_rng = np.random.default_rng([seed, spec.sensor.seed])

    plant = build_plant(spec, params, tissue)
    is_arm = spec.architecture == 'arm'
    config = controller_config(spec.architecture, resolve_gains(spec.controller), params,
                               control_ticks * dt)
    arm_scale = params['controllers']['arm']['output_scale_m']
    codec = CodecRanges.from_params(params) if (spec.codec_in_loop and not is_arm) else None

    state = plant.initial_state()
    pid = PidState()
    command = state.probe_position if is_arm else 0.0
    issued = command
    # Pipeline of (apply_tick, command); empty when latency is zero.
    pending = deque()
    latency = schedule.latency_ticks

    cols = np.empty((7, n_samples))
    logger.info("Running %s replicate %d (seed=%d, k=%.1f N/m)", spec.name, replicate, seed, tissue.stiffness)

    for tick in range(n_samples * sensor_ticks):
        while pending and pending[0][0] <= tick:
            command = pending.popleft()[1]
        if tick % sensor_ticks == 0:
            k = tick // sensor_ticks
            t = tick * dt
            target = reference(t) if reference is not None else spec.target_force
            measured = spec.sensor.measure(state.contact_force, noise_rng)
            if tick % control_ticks == 0:
                try:
                    if is_arm:
                        issued, pid = arm_force_controller(target, measured, pid, config, issued, arm_scale)
                    else:
                        issued, pid = end_effector_force_controller(target, measured, pid, config)
                        if codec is not None:
                            issued = decode_command(encode_command(CommandFrame(torque_setpoint=issued), codec),
                                                    codec).torque_setpoint
                except ValueError as exc:
                    raise SimulationDivergence(f"{spec.name}: {exc}", t) from exc
                if latency:
                    pending.append((tick + latency, issued))
                else:
                    command = issued
            cols[:, k] = (t, target, measured, state.contact_force,
                          state.probe_position, state.platform_position, command)
        state = plant.step(state, command, dt)

    trace = SimTrace(*cols, name=spec.name, seed=seed,
                     meta={'replicate': replicate, 'tissue_stiffness': tissue.stiffness})
    logger.info("Finished %s replicate %d: %d samples", spec.name, replicate, len(trace))
    return trace


def run_replicates(spec, n=None, params=None):
    n = spec.replicates if n is None else n
    if n < 1:
        raise ValueError(f"replicate count must be >= 1, got {n}")
    return [run_scenario(spec, replicate=i, params=params) for i in range(n)]
