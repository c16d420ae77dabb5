import os
import sys
from dataclasses import replace

import numpy as np
import pytest

# Add the project root to sys.path to allow imports from src
current_dir = os.path.dirname(__file__)
project_root = os.path.abspath(os.path.join(current_dir, os.pardir))
sys.path.insert(0, project_root)

from src.engine import run_scenario
from src.harness import run_matrix
from src.params import load_params
from src.scenarios import builtin_scenarios
from src.stats import compute_metrics

BREATHING_TARGETS = (2.5, 5.0, 10.0, 15.0)
SETTLED_S = 1.0


@pytest.fixture(scope="module")
def params():
    return load_params()


@pytest.fixture(scope="module")
def specs(params):
    return builtin_scenarios(params)


@pytest.fixture(scope="module")
def rows(specs, params):
    """The full builtin matrix, run once in parallel and shared by every check below."""
    return run_matrix(specs, parallelism=2, params=params, keep_traces=True)


@pytest.fixture(scope="module")
def by_name(rows):
    return {r.name: r for r in rows}


def _fine(spec):
    return replace(spec, schedule=spec.schedule.with_physics_dt(spec.schedule.physics_dt / 2))


# --- Matrix ---

def test_matrix_completes_in_order(specs, rows):
    assert len(rows) == 16
    assert [r.name for r in rows] == [s.name for s in specs]
    assert all(r.ok for r in rows), [r.error for r in rows if not r.ok]


def test_serial_report_identical_to_parallel(specs, rows, params):
    serial = run_matrix(specs, parallelism=1, params=params)
    assert [r.as_dict() for r in serial] == [r.as_dict() for r in rows]


# --- End-Effector Gain Bank ---

@pytest.mark.parametrize("row_id", range(1, 11))
def test_gain_row_settles_on_its_condition(rows, params, row_id):
    [row] = [r for r in rows if r.controller == row_id and 'sudden' not in r.name]
    limit = params['controllers']['end_effector']['output_limit_nm']
    for trace in row.traces:
        settled = trace.time >= SETTLED_S
        # no saturated oscillation once the approach is over
        assert np.all(np.abs(trace.command[settled]) < limit)
        m = compute_metrics(trace, row.target_force, transient_cut=SETTLED_S)
        assert abs(m.mean - row.target_force) <= 0.05 * row.target_force
        assert m.rmse <= 0.25 * row.target_force


# --- Tracking Claims ---

@pytest.mark.parametrize("target", [2.5, 5.0, 10.0])
def test_static_tracking(by_name, target):
    pooled = by_name[f"ee_static_porcine_{target:g}N"].pooled
    assert abs(pooled.mean - target) <= 0.1
    assert pooled.rmse <= 0.1


def test_breathing_favours_end_effector(by_name):
    ee = [by_name[f"ee_breathing_porcine_{t:g}N"].pooled.rmse for t in BREATHING_TARGETS]
    arm = [by_name[f"arm_breathing_porcine_{t:g}N"].pooled.rmse for t in BREATHING_TARGETS]
    assert all(e < a for e, a in zip(ee, arm))
    assert np.mean(ee) < 0.5 * np.mean(arm)


@pytest.mark.parametrize("target", [2.5, 15.0])
def test_force_range_under_breathing(by_name, target):
    pooled = by_name[f"ee_breathing_porcine_{target:g}N"].pooled
    assert abs(pooled.mean - target) <= 0.05 * target


def test_sudden_movement_peaks(by_name):
    ee = by_name['ee_sudden_porcine_5N'].diagnostics
    arm = by_name['arm_sudden_porcine_5N'].diagnostics
    assert ee['peak_force_N'] < arm['peak_force_N']
    assert ee['contact_loss_s'] <= arm['contact_loss_s']


# --- Physics Step ---

@pytest.mark.parametrize("index", range(16))
def test_physics_step_refinement(specs, by_name, params, index):
    spec = specs[index]
    cut = spec.window_start(params)
    coarse = compute_metrics(by_name[spec.name].traces[0], spec.target_force, cut).rmse
    fine = compute_metrics(run_scenario(_fine(spec), params=params), spec.target_force, cut).rmse
    assert abs(fine - coarse) / coarse < 0.02


def test_halving_physics_step_barely_moves_force_trace(specs, by_name, params):
    spec = next(s for s in specs if s.name == 'ee_breathing_porcine_5N')
    coarse = by_name[spec.name].traces[0].true_force
    fine = run_scenario(_fine(spec), params=params).true_force
    assert len(fine) == len(coarse)
    rms = np.sqrt(np.mean((fine - coarse) ** 2))
    assert rms < 0.005 * np.sqrt(np.mean(coarse ** 2))
