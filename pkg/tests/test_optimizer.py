import copy
import math
import os
import sys

import pytest

# Add the project root to sys.path to allow imports from src
current_dir = os.path.dirname(__file__)
project_root = os.path.abspath(os.path.join(current_dir, os.pardir))
sys.path.insert(0, project_root)

from src.errors import ConfigError
from src.optimizer import ZieglerNicholsTuner
from src.params import load_params


@pytest.fixture(scope="module")
def quick_params():
    params = copy.deepcopy(load_params())
    params['tuning'].update(iterations=6, duration_s=2.0)
    return params


def test_low_gain_does_not_oscillate(quick_params):
    ratio, period = ZieglerNicholsTuner(params=quick_params).oscillation(0.01)
    assert ratio == 0.0
    assert math.isnan(period)


def test_tune_end_effector(quick_params):
    result = ZieglerNicholsTuner('end_effector', params=quick_params).tune()
    assert 0.01 < result['ultimate_gain'] <= 20.0
    assert result['ultimate_period_s'] > 0
    gains = result['gains']
    assert gains['kp'] == pytest.approx(0.6 * result['ultimate_gain'], rel=1e-4)
    assert gains['ki'] > 0 and gains['kd'] > 0


def test_no_oscillation_in_range_raises(quick_params):
    params = copy.deepcopy(quick_params)
    params['tuning']['gain_high'] = 0.02
    with pytest.raises(ConfigError):
        ZieglerNicholsTuner(params=params).find_ultimate_gain()
