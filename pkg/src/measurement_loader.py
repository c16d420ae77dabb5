import numpy as np
import pandas as pd

from .engine import TRACE_COLUMNS, SimTrace
from .errors import TraceError


class TraceCsvParser:
    """Reads a trace CSV written by reporting.emit_csv back into a SimTrace."""

    def __init__(self, csv_path):
        self.path = csv_path
        self.df = pd.read_csv(csv_path, dtype=float, float_precision='round_trip')
        if tuple(self.df.columns) != TRACE_COLUMNS:
            raise TraceError(
                f"{csv_path}: unexpected header {list(self.df.columns)}, expected {list(TRACE_COLUMNS)}")

    def to_trace(self, name=None):
        cols = [np.ascontiguousarray(self.df[c].to_numpy(dtype=float)) for c in TRACE_COLUMNS]
        return SimTrace(*cols, name=name or self.path)


def load_trace_csv(path):
    return TraceCsvParser(path).to_trace()
