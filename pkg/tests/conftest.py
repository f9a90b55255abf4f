import numpy as np
import pytest

from artifact.calibration_global import GlobalCalibration, resolve_localization
from artifact.flows import AzimuthalFlow, rigid_rotation, zero_flow
from artifact.scene import disk_diameter
from artifact.weights import WeightField

SHEAR = (1.0, 0.5)


@pytest.fixture(scope="session")
def rigid_scene():
    return disk_diameter(rigid_rotation(1.0), horizon=1.0)


@pytest.fixture(scope="session")
def shear_scene():
    return disk_diameter(AzimuthalFlow(*SHEAR), horizon=0.5)


@pytest.fixture(scope="session")
def static_scene():
    return disk_diameter(zero_flow(), horizon=1.0)


@pytest.fixture(scope="session")
def rigid_loc(rigid_scene):
    return resolve_localization(rigid_scene)


@pytest.fixture(scope="session")
def shear_loc(shear_scene):
    return resolve_localization(shear_scene)


@pytest.fixture(scope="session")
def rigid_cal(rigid_scene, rigid_loc):
    return GlobalCalibration(rigid_scene, rigid_loc)


@pytest.fixture(scope="session")
def rigid_weight(rigid_scene, rigid_loc):
    return WeightField(rigid_scene, rigid_loc)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria ledger: one PASS/FAIL line per criterion in the terminal summary
_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    results = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        results[number] = line
        reporter = request.config.pluginmanager.get_plugin("terminalreporter")
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        terminalreporter.write_line(results.get(number, f"FAIL criterion {number}: not run"))
