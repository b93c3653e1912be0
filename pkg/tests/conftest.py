import numpy as np
import pytest

from ccsusy.models import PRESET_NAMES, figure_preset
from ccsusy.scattering import ChannelSet
from ccsusy.susy import FactorizationSpec, U0Parametrization, transform


@pytest.fixture(scope="session")
def presets():
    out = {}
    for name in PRESET_NAMES:
        p = figure_preset(name)
        out[name] = (p, transform(p.spec, U0Parametrization(p.u0)))
    return out


@pytest.fixture(scope="session")
def fig_channels():
    return ChannelSet((10.0, 0.0))


@pytest.fixture(scope="session")
def fig1_spec(fig_channels):
    return FactorizationSpec.from_kappa(fig_channels, 3.0, channel=1)


@pytest.fixture(scope="session")
def fig_u0():
    return np.array([[-2.0, 0.6], [0.6, -2.0]])


_criteria = {}


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = props["criterion"]
    failed = report.failed or (report.when == "call" and report.outcome != "passed")
    if report.when == "call" or failed:
        ok = _criteria.get(key, True) and not failed
        _criteria[key] = ok


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(f"{'PASS' if _criteria[key] else 'FAIL'}  {key}")
