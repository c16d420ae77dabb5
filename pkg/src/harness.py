"""
Batch execution of scenarios and the swept-sine bandwidth measurement.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .control import PidGains
from .diagnostic import ContactDiagnostic
from .engine import LoopSchedule, SensorModel, run_replicates, run_scenario
from .errors import ConfigError, SimulationDivergence
from .params import load_params
from .plant import Static, tissue_preset
from .scenarios import ScenarioSpec
from .stats import Metrics, compute_metrics, pooled_metrics

logger = logging.getLogger(__name__)


@dataclass
class ReportRow:
    name: str
    architecture: str
    target_force: float
    controller: object
    replicates: List[Metrics] = field(default_factory=list)
    pooled: Optional[Metrics] = None
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None
    traces: list = field(default_factory=list, repr=False, compare=False)

    @property
    def ok(self):
        return self.error is None

    def as_dict(self):
        return {
            'name': self.name,
            'architecture': self.architecture,
            'target_force': self.target_force,
            'controller': self.controller.as_dict() if isinstance(self.controller, PidGains) else self.controller,
            'replicates': [m.as_dict() for m in self.replicates],
            'pooled': self.pooled.as_dict() if self.pooled else None,
            'diagnostics': self.diagnostics,
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            name=d['name'],
            architecture=d['architecture'],
            target_force=d['target_force'],
            controller=_controller_from_dict(d['controller']),
            replicates=[Metrics.from_dict(m) for m in d.get('replicates', [])],
            pooled=Metrics.from_dict(d['pooled']) if d.get('pooled') else None,
            diagnostics=d.get('diagnostics', {}),
            error=d.get('error'),
        )


def _controller_from_dict(value):
    if isinstance(value, dict):
        return PidGains(float(value['kp']), float(value['ki']), float(value['kd']))
    return value


def evaluate_scenario(spec, params=None, keep_traces=False):
    """Runs every replicate of one scenario; failures become a row with `error` set."""
    params = params or load_params()
    h = params['harness']
    row = ReportRow(spec.name, spec.architecture, spec.target_force, spec.controller)
    try:
        spec.validate()
        traces = run_replicates(spec, params=params)
        cut = spec.window_start(params)
        band = h['settling_band']
        row.replicates = [compute_metrics(t, spec.target_force, cut, band) for t in traces]
        row.pooled = pooled_metrics(traces, spec.target_force, cut, band)
        # Contact diagnostics over the first replicate; loss counts after first contact.
        row.diagnostics = ContactDiagnostic(traces[0], spec.target_force,
                                            h['contact_loss_threshold_n']).detect_contributions()
        if keep_traces:
            row.traces = traces
    except Exception as exc:  # noqa: BLE001 - reported per row, batch continues
        logger.error("Scenario %s failed: %s", spec.name, exc)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _evaluate_job(job):
    spec, params, keep_traces = job
    return evaluate_scenario(spec, params, keep_traces)


def run_matrix(specs, parallelism=1, params=None, keep_traces=False):
    """Rows come back in input order; results do not depend on parallelism."""
    specs = list(specs)
    if not specs:
        raise ValueError("run_matrix needs at least one scenario")
    params = params or load_params()
    jobs = [(s, params, keep_traces) for s in specs]
    logger.info("Running %d scenarios (parallelism=%d)", len(specs), parallelism)
    if parallelism <= 1:
        return [_evaluate_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_evaluate_job, jobs))


# --- Bandwidth ---

def _lock_in(values, time, frequency):
    """Complex amplitude of the `frequency` component (mean removed)."""
    w = 2.0 * math.pi * frequency
    v = values - values.mean()
    return 2.0 * np.mean(v * np.exp(-1j * w * time))


def _sweep_spec(architecture, frequency, amplitude, params, seed):
    bw = params['bandwidth']
    tissue, _ = tissue_preset(params, bw['tissue'])
    cycles = math.ceil(max(bw['min_cycles'], bw['min_window_s'] * frequency))
    window = cycles / frequency
    spec = ScenarioSpec(
        name=f"bandwidth_{architecture}_{frequency:g}Hz",
        architecture=architecture,
        tissue=tissue,
        profile=Static(),
        target_force=bw['center_force_n'],
        duration=bw['settle_s'] + window,
        replicates=1,
        controller=bw['controllers'][architecture],
        schedule=LoopSchedule.from_params(params),
        seed=seed,
        sensor=SensorModel.from_params(params),
        tissue_name=bw['tissue'],
    )
    center = bw['center_force_n']
    w = 2.0 * math.pi * frequency

    def reference(t):
        return center + amplitude * math.sin(w * t)

    return spec, reference


def frequency_response(architecture, frequencies, amplitude, params=None, seed=None):
    """[(frequency, amplitude ratio, phase rad)] of measured force against the swept reference."""
    params = params or load_params()
    seed = params['harness']['default_seed'] if seed is None else seed
    settle = params['bandwidth']['settle_s']
    response = []
    for f in frequencies:
        spec, reference = _sweep_spec(architecture, f, amplitude, params, seed)
        try:
            trace = run_scenario(spec, params=params, reference=reference)
        except SimulationDivergence as exc:
            raise SimulationDivergence(f"bandwidth sweep unstable at {f:g} Hz: {exc}") from exc
        mask = trace.time >= settle - 1e-12
        t = trace.time[mask]
        y = _lock_in(trace.measured[mask], t, f)
        r = _lock_in(trace.target[mask], t, f)
        ratio = abs(y) / abs(r)
        response.append((f, float(ratio), float(np.angle(y / r))))
        logger.info("%s @ %g Hz: |H| = %.3f", architecture, f, ratio)
    return response


def crossover_frequency(response, level=1.0 / math.sqrt(2.0)):
    """First -3 dB crossing, interpolated linearly in log-frequency / dB."""
    prev = None
    for f, ratio, _ in response:
        if ratio < level:
            if prev is None:
                return f
            f0, r0 = prev
            db0, db1, dbl = (20 * math.log10(x) for x in (max(r0, 1e-12), max(ratio, 1e-12), level))
            frac = (db0 - dbl) / (db0 - db1)
            return 10 ** (math.log10(f0) + frac * (math.log10(f) - math.log10(f0)))
        prev = (f, ratio)
    logger.warning("No -3 dB crossing up to %g Hz; reporting the sweep limit", response[-1][0])
    return response[-1][0]


def measure_bandwidth(architecture, amplitudes=None, params=None, frequencies=None, seed=None):
    """Closed-loop -3 dB bandwidth in Hz, the lowest over the requested amplitudes."""
    params = params or load_params()
    bw = params['bandwidth']
    if architecture not in bw['controllers']:
        raise ConfigError(f"no bandwidth controller configured for architecture '{architecture}'")
    amplitudes = amplitudes or bw['amplitudes_n']
    frequencies = frequencies or bw['frequencies_hz']
    return min(crossover_frequency(frequency_response(architecture, frequencies, a, params, seed))
               for a in amplitudes)
