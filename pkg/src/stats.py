import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import TraceError


@dataclass(frozen=True)
class Metrics:
    mean: float
    rmse: float
    min: float
    max: float
    settling_time: float   # NaN when the error never stays inside the band
    samples: int = 0

    def as_dict(self):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (float('nan') if v is None else v) for k, v in d.items()})


def _window(trace, transient_cut):
    if len(trace) == 0:
        raise TraceError(f"trace '{trace.name}' is empty")
    mask = trace.time >= transient_cut - 1e-12
    if not mask.any():
        raise TraceError(
            f"no samples in '{trace.name}' at or after transient_cut={transient_cut} s")
    return mask


def settling_time(time, measured, target, band=0.10):
    """First time after which |measured - target| stays below band * target."""
    outside = np.flatnonzero(np.abs(measured - target) >= band * abs(target))
    if outside.size == 0:
        return float(time[0])
    last = outside[-1]
    return float(time[last + 1]) if last + 1 < len(time) else math.nan


def summarize(values, target):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise TraceError("cannot summarise an empty sample window")
    err = values - target
    return float(values.mean()), float(np.sqrt(np.mean(err * err))), float(values.min()), float(values.max())


def compute_metrics(trace, target, transient_cut=0.0, band=0.10):
    mask = _window(trace, transient_cut)
    measured = trace.measured[mask]
    mean, rmse, lo, hi = summarize(measured, target)
    return Metrics(mean=mean, rmse=rmse, min=lo, max=hi,
                   settling_time=settling_time(trace.time[mask], measured, target, band),
                   samples=int(measured.size))


def pooled_metrics(traces, target, transient_cut=0.0, band=0.10):
    """
    Statistics of the concatenated post-transient windows of all replicates.
    Settling time is the worst replicate's.
    """
    if not traces:
        raise TraceError("pooled_metrics needs at least one trace")
    windows = [t.measured[_window(t, transient_cut)] for t in traces]
    pooled = np.concatenate(windows)
    mean, rmse, lo, hi = summarize(pooled, target)
    settle = [compute_metrics(t, target, transient_cut, band).settling_time for t in traces]
    return Metrics(mean=mean, rmse=rmse, min=lo, max=hi,
                   settling_time=float(max(settle)) if not any(math.isnan(s) for s in settle) else math.nan,
                   samples=int(pooled.size))
