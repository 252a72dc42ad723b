import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from greenedge.controller import SiteParams
from greenedge.energy import BatteryParams, EnergyParams, VmParams


def make_params(gamma_max=10.0, m_min=1, **energy_kw):
    vm = VmParams(gamma_max=gamma_max, m_min=m_min)
    return SiteParams(energy=EnergyParams(vm=vm, **energy_kw), battery=BatteryParams())


@pytest.fixture
def params():
    return make_params()


@pytest.fixture
def params5():
    return make_params(gamma_max=5.0)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
