import logging
import math

import numpy as np
from scipy.signal import find_peaks

from .control import PidGains, ziegler_nichols
from .engine import LoopSchedule, SensorModel, run_scenario
from .errors import ConfigError, SimulationDivergence
from .params import load_params
from .plant import Static, tissue_preset
from .scenarios import ScenarioSpec

logger = logging.getLogger(__name__)


class ZieglerNicholsTuner:
    def __init__(self, architecture='end_effector', profile=None, tissue='porcine', params=None):
        self.params = params or load_params()
        self.architecture = architecture
        self.profile = profile or Static()
        self.tissue, _ = tissue_preset(self.params, tissue)
        self.tissue_name = tissue

        t = self.params['tuning']
        self.gain_low = t['gain_low']
        self.gain_high = t['gain_high']
        self.iterations = t['iterations']
        self.duration = t['duration_s']
        self.settle = t['settle_s']
        self.target = t['target_force_n']
        self.ratio_band = tuple(t['ratio_band'])

    def _spec(self, gain):
        return ScenarioSpec(
            name=f"zn_{self.architecture}_kp{gain:.4g}",
            architecture=self.architecture,
            tissue=self.tissue,
            profile=self.profile,
            target_force=self.target,
            duration=self.duration,
            replicates=1,
            controller=PidGains(kp=gain, ki=0.0, kd=0.0),
            schedule=LoopSchedule.from_params(self.params),
            sensor=SensorModel.from_params(self.params),
            tissue_name=self.tissue_name,
        )

    def oscillation(self, gain):
        """
        (amplitude ratio per period, period s) of the P-only response.
        Ratio is 0 for a response with no repeated peaks and inf if the run diverges.
        """
        try:
            trace = run_scenario(self._spec(gain), params=self.params)
        except SimulationDivergence:
            return math.inf, math.nan
        mask = trace.time >= self.settle
        t, y = trace.time[mask], trace.measured[mask]
        y = y - y.mean()
        peaks, _ = find_peaks(y)
        peaks = peaks[y[peaks] > 1e-6]
        if len(peaks) < 3:
            return 0.0, math.nan
        amps = y[peaks]
        ratio = (amps[-1] / amps[0]) ** (1.0 / (len(amps) - 1))
        period = float(np.median(np.diff(t[peaks])))
        return float(ratio), period

    def find_ultimate_gain(self):
        """Bisection (in log gain) on the P-only gain until oscillation neither decays nor grows."""
        lo, hi = self.gain_low, self.gain_high
        band_lo, band_hi = self.ratio_band
        ratio, period = self.oscillation(hi)
        if ratio < band_lo:
            raise ConfigError(
                f"no sustained oscillation up to kp={hi:g} for {self.architecture}; raise tuning.gain_high")
        best = (hi, period)
        for i in range(self.iterations):
            mid = math.sqrt(lo * hi)
            ratio, p = self.oscillation(mid)
            logger.info("ZN sweep %d: kp=%.5g ratio=%.3f period=%s", i, mid, ratio, p)
            if band_lo <= ratio <= band_hi:
                return mid, p
            if ratio < band_lo:
                lo = mid
            else:
                hi = mid
                if math.isfinite(p):
                    best = (mid, p)
        ku, tu = best
        if not math.isfinite(tu):
            raise ConfigError(f"ultimate period undefined for {self.architecture} at kp={ku:g}")
        return ku, tu

    def tune(self):
        ku, tu = self.find_ultimate_gain()
        gains = ziegler_nichols(ku, tu)
        return {
            "architecture": self.architecture,
            "ultimate_gain": round(ku, 6),
            "ultimate_period_s": round(tu, 6),
            "gains": gains.as_dict(),
        }
