"""
Continuous-time physics of the two force-control plants.

Contact axis convention: heights are measured upward from the tissue rest
surface. The probe tip hangs `mount_height` above that surface when the
carriage is fully retracted, and extending the carriage by x lowers the tip to
`mount_height - x`. Penetration is surface height minus tip height, so a
positive value means the probe is pressed into tissue.

- End-effector: belt-driven carriage on a backdrivable QDD actuator.
  J_eff * theta'' = tau_cmd - tau_fric(omega) - b*omega - r*(F_contact + F_ext)
  integrated with semi-implicit Euler; Coulomb friction is smoothed with tanh
  and treated linearly-implicit so the stiff band around omega = 0 is stable
  at the default dt.
- Arm: rigid, position-servoed probe. The tip tracks a latched setpoint through
  a first-order lag with velocity and acceleration limits; contact sees the
  tissue in series with the structural stiffness.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .errors import ConfigError, SimulationDivergence
from .kinematics import TransmissionGeometry, belt_displacement


# --- Model Parameters ---

@dataclass(frozen=True)
class ActuatorModel:
    rated_torque: float = 3.0
    backdrive_friction_torque: float = 0.2
    reflected_inertia: float = 0.002
    viscous_damping: float = 2.0
    friction_smoothing: float = 1e-3

    def __post_init__(self):
        if not self.rated_torque > 0:
            raise ConfigError("rated_torque must be positive")
        if not 0 <= self.backdrive_friction_torque < self.rated_torque:
            raise ConfigError("backdrive_friction_torque must lie in [0, rated_torque)")
        if not self.reflected_inertia > 0:
            raise ConfigError("reflected_inertia must be positive")
        if self.viscous_damping < 0 or not self.friction_smoothing > 0:
            raise ConfigError("viscous_damping must be >= 0 and friction_smoothing > 0")

    @classmethod
    def from_params(cls, params):
        a = params['actuator']
        return cls(
            rated_torque=a['rated_torque_nm'],
            backdrive_friction_torque=a['backdrive_friction_torque_nm'],
            reflected_inertia=a['reflected_inertia_kgm2'],
            viscous_damping=a['viscous_damping_nms'],
            friction_smoothing=a['friction_smoothing_rad_s'],
        )

    def friction_torque(self, omega):
        return self.backdrive_friction_torque * math.tanh(omega / self.friction_smoothing)

    def clamp_torque(self, torque):
        return max(-self.rated_torque, min(self.rated_torque, torque))


@dataclass(frozen=True)
class CarriageModel:
    moving_mass: float = 0.25
    travel_limit: float = 0.052
    geometry: TransmissionGeometry = field(default_factory=TransmissionGeometry)
    mount_height: float = 0.026
    belt_stiffness: Optional[float] = None

    def __post_init__(self):
        if not self.moving_mass > 0:
            raise ConfigError("moving_mass must be positive")
        if not self.travel_limit > 0:
            raise ConfigError("travel_limit must be positive")
        if self.belt_stiffness is not None and not self.belt_stiffness > 0:
            raise ConfigError("belt_stiffness must be positive when set")

    @classmethod
    def from_params(cls, params):
        c = params['carriage']
        return cls(
            moving_mass=c['moving_mass_kg'],
            travel_limit=c['travel_limit_m'],
            geometry=TransmissionGeometry.from_params(params),
            mount_height=c['mount_height_m'],
            belt_stiffness=c.get('belt_stiffness_n_m'),
        )

    @property
    def max_theta(self):
        return self.travel_limit / self.geometry.pulley_radius

    def effective_inertia(self, actuator):
        r = self.geometry.pulley_radius
        return actuator.reflected_inertia + self.moving_mass * r * r

    def tip_height(self, probe_position):
        return self.mount_height - probe_position


@dataclass(frozen=True)
class TissueModel:
    stiffness: float = 1500.0
    damping: float = 20.0
    surface_rest_position: float = 0.0

    def __post_init__(self):
        if not self.stiffness > 0:
            raise ConfigError(f"tissue stiffness must be positive, got {self.stiffness}")
        if self.damping < 0:
            raise ConfigError(f"tissue damping must be >= 0, got {self.damping}")

    @classmethod
    def from_mapping(cls, m):
        return cls(
            stiffness=m['stiffness_n_m'],
            damping=m.get('damping_ns_m', 0.0),
            surface_rest_position=m.get('surface_rest_position_m', 0.0),
        )

    def scaled(self, factor):
        return replace(self, stiffness=self.stiffness * factor)

    def in_series(self, stiffness):
        """Quasi-static series spring; damping is left on the tissue side."""
        k = self.stiffness * stiffness / (self.stiffness + stiffness)
        return replace(self, stiffness=k)


def tissue_preset(params, name):
    """Returns (TissueModel, heterogeneity) for a named preset in parameters.yaml."""
    presets = params['tissue']
    if name not in presets:
        raise ConfigError(f"Unknown tissue preset '{name}'. Known: {sorted(presets)}")
    m = presets[name]
    return TissueModel.from_mapping(m), float(m.get('heterogeneity', 0.0))


@dataclass(frozen=True)
class ArmServoModel:
    """Kinematic position servo; effective_end_mass only enters the energy bookkeeping."""
    command_rate: float = 125.0
    velocity_limit: float = 0.25
    acceleration_limit: float = 2.5
    tracking_time_constant: float = 0.05
    effective_end_mass: float = 1.5
    structural_stiffness: float = 5e4

    def __post_init__(self):
        for name in ('command_rate', 'velocity_limit', 'acceleration_limit',
                     'tracking_time_constant', 'effective_end_mass', 'structural_stiffness'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"ArmServoModel.{name} must be positive")

    @classmethod
    def from_params(cls, params):
        s = params['arm_servo']
        return cls(
            command_rate=s['command_rate_hz'],
            velocity_limit=s['velocity_limit_m_s'],
            acceleration_limit=s['acceleration_limit_m_s2'],
            tracking_time_constant=s['tracking_time_constant_s'],
            effective_end_mass=s['effective_end_mass_kg'],
            structural_stiffness=s['structural_stiffness_n_m'],
        )


# --- Platform Motion Profiles ---

@dataclass(frozen=True)
class Static:
    def sample(self, t):
        return 0.0, 0.0


@dataclass(frozen=True)
class Breathing:
    amplitude: float
    frequency: float

    def __post_init__(self):
        if self.amplitude < 0 or not self.frequency > 0:
            raise ConfigError("Breathing needs amplitude >= 0 and frequency > 0")

    @classmethod
    def from_cycles_per_minute(cls, amplitude, cycles_per_minute):
        return cls(amplitude=amplitude, frequency=cycles_per_minute / 60.0)

    @property
    def period(self):
        return 1.0 / self.frequency

    def sample(self, t):
        w = 2.0 * math.pi * self.frequency
        return self.amplitude * math.sin(w * t), self.amplitude * w * math.cos(w * t)


@dataclass(frozen=True)
class SuddenPulse:
    """Raised half-sine up over `rise`, half-sine back down over `fall`; C1 at the peak."""
    amplitude: float
    rise: float
    fall: float
    onset: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0 or not self.rise > 0 or not self.fall > 0:
            raise ConfigError("SuddenPulse needs amplitude >= 0, rise > 0 and fall > 0")

    def sample(self, t):
        s = t - self.onset
        a = self.amplitude
        if s < 0.0 or s >= self.rise + self.fall:
            return 0.0, 0.0
        if s < self.rise:
            phase = math.pi * s / self.rise
            return 0.5 * a * (1.0 - math.cos(phase)), 0.5 * a * math.pi / self.rise * math.sin(phase)
        phase = math.pi * (s - self.rise) / self.fall
        return 0.5 * a * (1.0 + math.cos(phase)), -0.5 * a * math.pi / self.fall * math.sin(phase)


@dataclass(frozen=True)
class Composite:
    components: Tuple = ()

    def sample(self, t):
        pos = vel = 0.0
        for p in self.components:
            dp, dv = p.sample(t)
            pos += dp
            vel += dv
        return pos, vel


def platform_motion(profile, t):
    """(position, velocity) of the tissue platform at time t."""
    if t < 0:
        raise ValueError(f"platform_motion needs t >= 0, got {t}")
    return profile.sample(t)


def profile_from_mapping(m):
    """Builds a MotionProfile from a scenario-file mapping ({'type': ..., ...})."""
    kind = m.get('type', 'static')
    if kind == 'static':
        return Static()
    if kind == 'breathing':
        if 'cycles_per_minute' in m:
            return Breathing.from_cycles_per_minute(m['amplitude'], m['cycles_per_minute'])
        return Breathing(amplitude=m['amplitude'], frequency=m['frequency'])
    if kind == 'sudden_pulse':
        return SuddenPulse(amplitude=m['amplitude'], rise=m['rise'], fall=m['fall'],
                           onset=m.get('onset', 0.0))
    if kind == 'composite':
        return Composite(tuple(profile_from_mapping(c) for c in m['components']))
    raise ConfigError(f"Unknown motion profile type '{kind}'")


def profile_to_mapping(profile):
    if isinstance(profile, Static):
        return {'type': 'static'}
    if isinstance(profile, Breathing):
        return {'type': 'breathing', 'amplitude': profile.amplitude, 'frequency': profile.frequency}
    if isinstance(profile, SuddenPulse):
        return {'type': 'sudden_pulse', 'amplitude': profile.amplitude, 'rise': profile.rise,
                'fall': profile.fall, 'onset': profile.onset}
    if isinstance(profile, Composite):
        return {'type': 'composite', 'components': [profile_to_mapping(c) for c in profile.components]}
    raise ConfigError(f"Cannot serialise motion profile {profile!r}")


# --- State ---

@dataclass(frozen=True)
class PlantState:
    theta: float = 0.0
    omega: float = 0.0
    probe_position: float = 0.0
    probe_velocity: float = 0.0
    platform_position: float = 0.0
    platform_velocity: float = 0.0
    contact_force: float = 0.0
    time: float = 0.0
    # arm only: latched servo setpoint and the time of the next latch
    servo_setpoint: float = 0.0
    next_latch_time: float = 0.0

    def is_finite(self):
        return all(math.isfinite(v) for v in (
            self.theta, self.omega, self.probe_position, self.probe_velocity,
            self.platform_position, self.platform_velocity, self.contact_force))


# --- Contact ---

def contact_force(tissue, probe_pos, probe_vel, surface_pos, surface_vel):
    """Unilateral Kelvin-Voigt contact; positive penetration = surface_pos - probe_pos."""
    delta = surface_pos - probe_pos
    if delta <= 0.0:
        return 0.0
    delta_dot = surface_vel - probe_vel
    return max(0.0, tissue.stiffness * delta + tissue.damping * delta_dot)


def _probe_contact(carriage, tissue, x, x_dot, platform_pos, platform_vel):
    return contact_force(
        tissue,
        carriage.tip_height(x), -x_dot,
        tissue.surface_rest_position + platform_pos, platform_vel,
    )


def penetration(carriage, tissue, state):
    surface = tissue.surface_rest_position + state.platform_position
    return max(0.0, surface - carriage.tip_height(state.probe_position))


def _check_finite(state, command, what):
    if not math.isfinite(command):
        raise SimulationDivergence(f"non-finite {what} command {command!r}", state.time)
    if not state.is_finite():
        raise SimulationDivergence("non-finite plant state", state.time)


# --- End-Effector ---

def step_end_effector(state, actuator, carriage, tissue, torque_cmd, profile, dt, external_force=0.0):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_finite(state, torque_cmd, 'torque')

    r = carriage.geometry.pulley_radius
    contact_tissue = tissue if carriage.belt_stiffness is None else tissue.in_series(carriage.belt_stiffness)
    tau = actuator.clamp_torque(torque_cmd)
    j_eff = carriage.effective_inertia(actuator)

    # Linearly-implicit friction + viscous damping, explicit contact.
    eps = actuator.friction_smoothing
    th = math.tanh(state.omega / eps)
    fric = actuator.backdrive_friction_torque * th
    dfric = actuator.backdrive_friction_torque * (1.0 - th * th) / eps
    b = actuator.viscous_damping
    drive = tau - r * (state.contact_force + external_force) - fric - b * state.omega
    omega = state.omega + dt * drive / (j_eff + dt * (b + dfric))
    theta = state.theta + dt * omega

    if theta <= 0.0:
        theta, omega = 0.0, 0.0
    elif theta >= carriage.max_theta:
        theta, omega = carriage.max_theta, 0.0

    t = state.time + dt
    p_pos, p_vel = platform_motion(profile, t)
    x = belt_displacement(carriage.geometry, theta)
    x_dot = r * omega
    force = _probe_contact(carriage, contact_tissue, x, x_dot, p_pos, p_vel)
    return PlantState(
        theta=theta, omega=omega,
        probe_position=x, probe_velocity=x_dot,
        platform_position=p_pos, platform_velocity=p_vel,
        contact_force=force, time=t,
    )


def initial_end_effector_state(carriage, tissue, profile, t0=0.0):
    """Carriage extended until the tip just touches the surface (zero force)."""
    p_pos, p_vel = platform_motion(profile, t0)
    touch = carriage.mount_height - (tissue.surface_rest_position + p_pos)
    x = min(max(touch, 0.0), carriage.travel_limit)
    theta = x / carriage.geometry.pulley_radius
    contact_tissue = tissue if carriage.belt_stiffness is None else tissue.in_series(carriage.belt_stiffness)
    force = _probe_contact(carriage, contact_tissue, x, 0.0, p_pos, p_vel)
    return PlantState(theta=theta, probe_position=x, platform_position=p_pos,
                      platform_velocity=p_vel, contact_force=force, time=t0)


# --- Rigid Arm ---

def step_arm(state, servo, tissue, position_cmd, profile, dt, carriage=None):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_finite(state, position_cmd, 'position')
    carriage = carriage or CarriageModel()

    setpoint, next_latch = state.servo_setpoint, state.next_latch_time
    if state.time + 1e-12 >= next_latch:
        setpoint = position_cmd
        period = 1.0 / servo.command_rate
        while next_latch <= state.time + 1e-12:
            next_latch += period

    v_des = (setpoint - state.probe_position) / servo.tracking_time_constant
    v_des = max(-servo.velocity_limit, min(servo.velocity_limit, v_des))
    dv_max = servo.acceleration_limit * dt
    v = state.probe_velocity + max(-dv_max, min(dv_max, v_des - state.probe_velocity))
    x = state.probe_position + dt * v

    t = state.time + dt
    p_pos, p_vel = platform_motion(profile, t)
    force = _probe_contact(carriage, tissue.in_series(servo.structural_stiffness), x, v, p_pos, p_vel)
    return PlantState(
        probe_position=x, probe_velocity=v,
        platform_position=p_pos, platform_velocity=p_vel,
        contact_force=force, time=t,
        servo_setpoint=setpoint, next_latch_time=next_latch,
    )


def initial_arm_state(carriage, tissue, profile, t0=0.0):
    p_pos, p_vel = platform_motion(profile, t0)
    x = carriage.mount_height - (tissue.surface_rest_position + p_pos)
    return PlantState(probe_position=x, platform_position=p_pos, platform_velocity=p_vel,
                      time=t0, servo_setpoint=x, next_latch_time=t0)


def mechanical_energy(state, actuator, carriage, tissue):
    """Rotor/carriage kinetic energy plus the elastic energy stored in the tissue."""
    j_eff = carriage.effective_inertia(actuator)
    delta = penetration(carriage, tissue, state)
    return 0.5 * j_eff * state.omega ** 2 + 0.5 * tissue.stiffness * delta ** 2


def arm_mechanical_energy(state, servo, carriage, tissue):
    """End-mass kinetic energy plus the energy stored in the tissue and structure springs."""
    delta = penetration(carriage, tissue, state)
    k = tissue.in_series(servo.structural_stiffness).stiffness
    return 0.5 * servo.effective_end_mass * state.probe_velocity ** 2 + 0.5 * k * delta ** 2


# --- Plant Engines ---

class EndEffectorPlant:
    """Compliant end-effector: torque in, contact force out."""
    architecture = 'end_effector'

    def __init__(self, actuator, carriage, tissue, profile):
        self.actuator = actuator
        self.carriage = carriage
        self.tissue = tissue
        self.profile = profile

    def initial_state(self):
        return initial_end_effector_state(self.carriage, self.tissue, self.profile)

    def step(self, state, command, dt):
        return step_end_effector(state, self.actuator, self.carriage, self.tissue,
                                 command, self.profile, dt)


class ArmPlant:
    """Rigid arm with a position servo: setpoint in, contact force out."""
    architecture = 'arm'

    def __init__(self, servo, carriage, tissue, profile):
        self.servo = servo
        self.carriage = carriage
        self.tissue = tissue
        self.profile = profile

    def initial_state(self):
        return initial_arm_state(self.carriage, self.tissue, self.profile)

    def step(self, state, command, dt):
        return step_arm(state, self.servo, self.tissue, command, self.profile, dt,
                        carriage=self.carriage)
