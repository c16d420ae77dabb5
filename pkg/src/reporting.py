"""
Trace CSVs and matrix reports (aligned text table + JSON).
"""
import json
import logging
import math
import os

import pandas as pd

from .engine import TRACE_COLUMNS
from .errors import TraceError
from .harness import ReportRow

logger = logging.getLogger(__name__)


def _write_failed(path, exc):
    return OSError(exc.errno, f"cannot write {path}: {exc.strerror or exc}", path)


def emit_csv(trace, path):
    if len(trace) == 0:
        raise TraceError(f"refusing to write empty trace '{trace.name}' to {path}")
    df = pd.DataFrame(trace.as_dict(), columns=list(TRACE_COLUMNS))
    try:
        df.to_csv(path, index=False, float_format='%.17g')
    except OSError as exc:
        raise _write_failed(path, exc) from exc
    logger.info("Wrote %d samples to %s", len(trace), path)
    return path


def _fmt(v, spec):
    return 'n/a' if v is None or (isinstance(v, float) and math.isnan(v)) else format(v, spec)


def format_report_table(rows):
    header = (f"{'Scenario':<30} | {'Ctrl':>4} | {'Target N':>8} | {'Mean N':>7} | {'RMSe N':>7} | "
              f"{'Min N':>7} | {'Max N':>7} | {'Settle s':>8} | {'Loss s':>6} | Status")
    lines = [header, '-' * len(header)]
    for row in rows:
        ctrl = row.controller if isinstance(row.controller, int) else 'cust'
        if not row.ok:
            lines.append(f"{row.name:<30} | {ctrl:>4} | {row.target_force:>8.2f} | {'':>7} | {'':>7} | "
                         f"{'':>7} | {'':>7} | {'':>8} | {'':>6} | FAIL {row.error}")
            continue
        p = row.pooled
        loss = row.diagnostics.get('contact_loss_s')
        lines.append(
            f"{row.name:<30} | {ctrl:>4} | {row.target_force:>8.2f} | {p.mean:>7.3f} | {p.rmse:>7.3f} | "
            f"{p.min:>7.3f} | {p.max:>7.3f} | {_fmt(p.settling_time, '>8.2f'):>8} | "
            f"{_fmt(loss, '>6.2f'):>6} | ok (n={len(row.replicates)})")
    return "\n".join(lines)


def report_paths(path):
    stem, ext = os.path.splitext(path)
    if ext == '.json':
        return stem + '.txt', path
    return path, stem + '.json'


def emit_report(rows, path):
    """Writes the text table at `path` and the structured report beside it (.json)."""
    text_path, json_path = report_paths(path)
    payload = {'rows': [r.as_dict() for r in rows]}
    try:
        with open(text_path, 'w') as f:
            f.write(format_report_table(rows) + "\n")
        with open(json_path, 'w') as f:
            json.dump(payload, f, indent=2)
    except OSError as exc:
        raise _write_failed(exc.filename or path, exc) from exc
    logger.info("Report for %d scenarios written to %s and %s", len(rows), text_path, json_path)
    return text_path, json_path


def load_report(path):
    _, json_path = report_paths(path)
    try:
        with open(json_path, 'r') as f:
            payload = json.load(f)
    except FileNotFoundError as exc:
        raise FileNotFoundError(exc.errno, f"report not found: {json_path}", json_path) from exc
    return [ReportRow.from_dict(d) for d in payload['rows']]
