"""
Experiment conditions: the builtin matrix and YAML scenario files.

A scenario file is one YAML (or JSON) mapping whose keys mirror ScenarioSpec:

    name: ee_breathing_porcine_5N
    architecture: end_effector        # or: arm
    tissue: porcine                   # preset name, or {stiffness_n_m, damping_ns_m, ...}
    profile: {type: breathing, amplitude: 0.0099, cycles_per_minute: 14.6}
    target_force: 5.0
    duration: 8.0
    replicates: 3
    controller: 8                     # gain bank id, or {kp, ki, kd}
    seed: 20240917
    # optional: schedule, sensor, heterogeneity, transient_cut, codec_in_loop
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import yaml

from .control import ARCHITECTURES, PidGains, default_gain_bank
from .engine import LoopSchedule, SensorModel
from .errors import ConfigError
from .params import load_params
from .plant import (
    Breathing, Static, SuddenPulse, TissueModel, profile_from_mapping,
    profile_to_mapping, tissue_preset,
)

logger = logging.getLogger(__name__)

MAX_TARGET_FORCE_N = 62.2  # rated torque through the pulley, 3 significant figures

_SCHEDULE_KEYS = {'physics_dt', 'sensor_rate', 'control_rate', 'servo_rate', 'control_latency'}
_SENSOR_KEYS = {'noise_std', 'quantization', 'seed'}
_FILE_KEYS = {'name', 'architecture', 'tissue', 'profile', 'target_force', 'duration', 'replicates',
              'controller', 'schedule', 'seed', 'sensor', 'heterogeneity', 'transient_cut',
              'codec_in_loop'}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    architecture: str
    tissue: TissueModel
    profile: object
    target_force: float
    duration: float = 8.0
    replicates: int = 3
    controller: Union[int, PidGains] = 2
    schedule: LoopSchedule = field(default_factory=LoopSchedule)
    seed: int = 20240917
    heterogeneity: float = 0.0
    sensor: SensorModel = field(default_factory=SensorModel)
    transient_cut: Optional[float] = None
    codec_in_loop: bool = False
    tissue_name: str = 'custom'

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"{self.name}: unknown architecture '{self.architecture}'")
        if not 0 < self.target_force <= MAX_TARGET_FORCE_N:
            raise ConfigError(
                f"{self.name}: target_force {self.target_force} N outside (0, {MAX_TARGET_FORCE_N}]")
        if not self.duration > 0:
            raise ConfigError(f"{self.name}: duration must be positive")
        if self.replicates < 1:
            raise ConfigError(f"{self.name}: replicates must be >= 1")
        if not 0 <= self.heterogeneity < 1:
            raise ConfigError(f"{self.name}: heterogeneity must lie in [0, 1)")
        if self.transient_cut is not None and not 0 <= self.transient_cut < self.duration:
            raise ConfigError(f"{self.name}: transient_cut must lie in [0, duration)")

    @property
    def is_static(self):
        return isinstance(self.profile, Static)

    def window_start(self, params=None):
        """Start of the metrics window; static runs skip the approach transient."""
        if self.transient_cut is not None:
            return self.transient_cut
        h = (params or load_params())['harness']
        return h['transient_cut_static_s'] if self.is_static else h['transient_cut_motion_s']

    def validate(self, bank=None):
        if not isinstance(self.controller, PidGains):
            (bank or default_gain_bank()).gains(self.controller)
        self.schedule.validate()
        return self


def motion_profile(kind, params):
    m = params['motion']
    if kind == 'static':
        return Static()
    if kind == 'breathing':
        b = m['breathing']
        return Breathing.from_cycles_per_minute(b['amplitude_m'], b['cycles_per_minute'])
    if kind == 'sudden':
        p = m['sudden_pulse']
        return SuddenPulse(amplitude=p['amplitude_m'], rise=p['rise_s'], fall=p['fall_s'], onset=p['onset_s'])
    raise ConfigError(f"Unknown motion condition '{kind}'")


def _abbrev(architecture):
    return 'ee' if architecture == 'end_effector' else 'arm'


def _condition_spec(row, cond, params, seed, replicates, schedule):
    tissue, heterogeneity = tissue_preset(params, cond['tissue'])
    target = float(cond['target_n'])
    return ScenarioSpec(
        name=f"{_abbrev(cond['architecture'])}_{cond['motion']}_{cond['tissue']}_{target:g}N",
        architecture=cond['architecture'],
        tissue=tissue,
        profile=motion_profile(cond['motion'], params),
        target_force=target,
        duration=params['harness']['duration_s'],
        replicates=replicates,
        controller=row,
        schedule=schedule,
        seed=seed,
        heterogeneity=heterogeneity,
        sensor=SensorModel.from_params(params),
        tissue_name=cond['tissue'],
    )


def builtin_scenarios(params=None, bank=None, seed=None):
    """
    The full experiment matrix, ordered: rows 1-14 of the gain bank, then the
    sudden-movement pair (end-effector, arm).
    """
    params = params or load_params()
    bank = bank or default_gain_bank()
    h = params['harness']
    seed = h['default_seed'] if seed is None else seed
    schedule = LoopSchedule.from_params(params)

    specs, sudden = [], []
    for row in bank.ids:
        cond = bank.condition(row)
        if cond.get('motion') == 'sudden':
            sudden.append(_condition_spec(row, cond, params, seed, h['sudden_replicates'], schedule))
        else:
            specs.append(_condition_spec(row, cond, params, seed, h['replicates'], schedule))

    ee_row = bank.sudden_end_effector_row
    ee_cond = dict(bank.condition(ee_row), motion='sudden', target_n=sudden[0].target_force if sudden else 5.0)
    ee_sudden = _condition_spec(ee_row, ee_cond, params, seed, h['sudden_replicates'], schedule)
    return specs + [ee_sudden] + sudden


# --- Scenario Files ---

def _tissue_from_value(value, params):
    if isinstance(value, str):
        tissue, heterogeneity = tissue_preset(params, value)
        return tissue, heterogeneity, value
    if isinstance(value, dict):
        return TissueModel.from_mapping(value), float(value.get('heterogeneity', 0.0)), 'custom'
    raise ConfigError(f"tissue must be a preset name or a mapping, got {value!r}")


def _controller_from_value(value):
    if isinstance(value, dict):
        return PidGains(float(value['kp']), float(value['ki']), float(value['kd']))
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"controller must be an id or {{kp, ki, kd}}, got {value!r}") from exc


def _sub_mapping(data, key, allowed):
    sub = data.get(key) or {}
    unknown = set(sub) - allowed
    if unknown:
        raise ConfigError(f"unknown {key} keys: {sorted(unknown)}")
    return sub


def spec_from_mapping(data, params=None):
    params = params or load_params()
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ('name', 'architecture', 'tissue', 'target_force'):
        if key not in data:
            raise ConfigError(f"scenario is missing required key '{key}'")

    h = params['harness']
    tissue, heterogeneity, tissue_name = _tissue_from_value(data['tissue'], params)
    schedule = replace(LoopSchedule.from_params(params), **_sub_mapping(data, 'schedule', _SCHEDULE_KEYS))
    sensor = replace(SensorModel.from_params(params), **_sub_mapping(data, 'sensor', _SENSOR_KEYS))
    try:
        return ScenarioSpec(
            name=str(data['name']),
            architecture=data['architecture'],
            tissue=tissue,
            profile=profile_from_mapping(data.get('profile') or {'type': 'static'}),
            target_force=float(data['target_force']),
            duration=float(data.get('duration', h['duration_s'])),
            replicates=int(data.get('replicates', h['replicates'])),
            controller=_controller_from_value(data.get('controller', 2)),
            schedule=schedule,
            seed=int(data.get('seed', h['default_seed'])),
            heterogeneity=float(data.get('heterogeneity', heterogeneity)),
            sensor=sensor,
            transient_cut=data.get('transient_cut'),
            codec_in_loop=bool(data.get('codec_in_loop', False)),
            tissue_name=tissue_name,
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed scenario '{data.get('name')}': {exc}") from exc


def spec_to_mapping(spec):
    s = spec.schedule
    return {
        'name': spec.name,
        'architecture': spec.architecture,
        'tissue': {
            'stiffness_n_m': spec.tissue.stiffness,
            'damping_ns_m': spec.tissue.damping,
            'surface_rest_position_m': spec.tissue.surface_rest_position,
        },
        'heterogeneity': spec.heterogeneity,
        'profile': profile_to_mapping(spec.profile),
        'target_force': spec.target_force,
        'duration': spec.duration,
        'replicates': spec.replicates,
        'controller': spec.controller.as_dict() if isinstance(spec.controller, PidGains) else spec.controller,
        'schedule': {'physics_dt': s.physics_dt, 'sensor_rate': s.sensor_rate,
                     'control_rate': s.control_rate, 'servo_rate': s.servo_rate,
                     'control_latency': s.control_latency},
        'seed': spec.seed,
        'sensor': {'noise_std': spec.sensor.noise_std, 'quantization': spec.sensor.quantization,
                   'seed': spec.sensor.seed},
        'transient_cut': spec.transient_cut,
        'codec_in_loop': spec.codec_in_loop,
    }


def load_scenario(path, params=None):
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"Scenario file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Malformed scenario file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Scenario file {path} must contain a mapping")
    spec = spec_from_mapping(data, params)
    logger.info("Loaded scenario %s from %s", spec.name, path)
    return spec


def save_scenario(spec, path):
    with open(path, 'w') as f:
        yaml.safe_dump(spec_to_mapping(spec), f, sort_keys=False)
