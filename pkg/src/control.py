"""
Discrete PID force controllers for both architectures plus the gain bank.

Controller state is a value: pid_step returns a new PidState rather than
mutating, so concurrent scenarios never share anything.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import ConfigError
from .params import load_gain_bank

logger = logging.getLogger(__name__)

ARCHITECTURES = ('end_effector', 'arm')


@dataclass(frozen=True)
class PidGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for name in ('kp', 'ki', 'kd'):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"PID gain {name} must be finite and >= 0, got {v!r}")

    def as_dict(self):
        return {'kp': self.kp, 'ki': self.ki, 'kd': self.kd}


@dataclass(frozen=True)
class PidConfig:
    gains: PidGains
    sample_period: float = 0.01
    output_min: float = -3.0
    output_max: float = 3.0
    integral_min: float = -3.0
    integral_max: float = 3.0
    derivative_filter_coeff: float = 0.9

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ConfigError("sample_period must be positive")
        if not self.output_min < self.output_max:
            raise ConfigError("output_min must be below output_max")
        if not self.integral_min <= self.integral_max:
            raise ConfigError("integral_min must not exceed integral_max")
        if not 0.0 <= self.derivative_filter_coeff < 1.0:
            raise ConfigError("derivative_filter_coeff must lie in [0, 1)")

    @classmethod
    def symmetric(cls, gains, sample_period, limit, derivative_filter_coeff=0.9):
        """Output and integral both clamped to +/- limit (conditional anti-windup)."""
        return cls(gains=gains, sample_period=sample_period,
                   output_min=-limit, output_max=limit,
                   integral_min=-limit, integral_max=limit,
                   derivative_filter_coeff=derivative_filter_coeff)


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    previous_error: float = 0.0
    previous_derivative: float = 0.0
    # False until the first sample so the first step has no derivative kick.
    primed: bool = False

    def reset(self):
        return PidState()


def _clamp(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def pid_step(state, config, error):
    """
    One controller update at config.sample_period.

    command = kp*e + I + D where I accumulates ki*e*T (clamped to the integral
    range) and D is the first-order filtered derivative of the error:
        D = c*D_prev + (1 - c) * kd * (e - e_prev) / T
    """
    if not math.isfinite(error):
        raise ValueError(f"pid_step got non-finite error {error!r}")
    g = config.gains
    T = config.sample_period

    integral = _clamp(state.integral + g.ki * error * T, config.integral_min, config.integral_max)
    if state.primed:
        raw = (error - state.previous_error) / T
        c = config.derivative_filter_coeff
        derivative = c * state.previous_derivative + (1.0 - c) * g.kd * raw
    else:
        derivative = 0.0

    command = _clamp(g.kp * error + integral + derivative, config.output_min, config.output_max)
    return command, PidState(integral=integral, previous_error=error,
                             previous_derivative=derivative, primed=True)


# --- Architecture Controllers ---

def end_effector_force_controller(target, measured, state, config):
    """Current-based: PID output is the motor torque command in N*m."""
    return pid_step(state, config, target - measured)


def arm_force_controller(target, measured, state, config, current_pos, output_scale=1e-3):
    """Position-based: PID output (clamped per step) scaled to metres of setpoint advance."""
    delta, state = pid_step(state, config, target - measured)
    return current_pos + output_scale * delta, state


def controller_config(architecture, gains, params, sample_period):
    c = params['controllers']
    coeff = c['derivative_filter_coeff']
    if architecture == 'end_effector':
        return PidConfig.symmetric(gains, sample_period, c['end_effector']['output_limit_nm'], coeff)
    if architecture == 'arm':
        return PidConfig.symmetric(gains, sample_period, c['arm']['output_limit'], coeff)
    raise ConfigError(f"Unknown architecture '{architecture}'. Known: {ARCHITECTURES}")


# --- Gain Bank ---

class GainBank:
    """Gain table keyed by controller id, with the row -> experiment condition map."""

    def __init__(self, data):
        try:
            self._gains = {int(k): PidGains(float(v['kp']), float(v['ki']), float(v['kd']))
                           for k, v in data['gains'].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Malformed gain bank: {exc}") from exc
        self._conditions = {int(k): dict(v) for k, v in data.get('conditions', {}).items()}
        self.sudden_end_effector_row = int(data.get('sudden_end_effector_row', 2))

    @classmethod
    def from_file(cls, path=None):
        return cls(load_gain_bank(path))

    @property
    def ids(self):
        return sorted(self._gains)

    def gains(self, controller_id):
        if controller_id not in self._gains:
            raise ConfigError(f"Unknown controller id {controller_id!r}. Known: {self.ids}")
        return self._gains[controller_id]

    def condition(self, controller_id):
        self.gains(controller_id)
        return dict(self._conditions.get(controller_id, {}))

    def table(self):
        """Aligned text table: id | architecture | tissue | motion | target | kp | ki | kd."""
        header = f"{'ID':>3} | {'Architecture':<12} | {'Tissue':<8} | {'Motion':<9} | {'Target N':>8} | {'kp':>7} | {'ki':>7} | {'kd':>7}"
        lines = [header, '-' * len(header)]
        for cid in self.ids:
            g = self._gains[cid]
            c = self._conditions.get(cid, {})
            lines.append(
                f"{cid:>3} | {c.get('architecture', '-'):<12} | {c.get('tissue', '-'):<8} | "
                f"{c.get('motion', '-'):<9} | {c.get('target_n', float('nan')):>8.1f} | "
                f"{g.kp:>7g} | {g.ki:>7g} | {g.kd:>7g}")
        return "\n".join(lines)


@lru_cache(maxsize=1)
def default_gain_bank():
    return GainBank.from_file()


def gain_bank(controller_id):
    return default_gain_bank().gains(controller_id)


# --- Tuning Rule ---

def ziegler_nichols(ultimate_gain, ultimate_period):
    """Classic PID rule from the ultimate gain and period."""
    if not (ultimate_gain > 0 and ultimate_period > 0):
        raise ValueError(
            f"Ziegler-Nichols needs Ku > 0 and Tu > 0, got Ku={ultimate_gain}, Tu={ultimate_period}")
    ku, tu = ultimate_gain, ultimate_period
    gains = PidGains(kp=0.6 * ku, ki=1.2 * ku / tu, kd=0.075 * ku * tu)
    logger.info("Ziegler-Nichols: Ku=%.4g Tu=%.4g -> %s", ku, tu, gains)
    return gains
