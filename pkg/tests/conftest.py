import math

import numpy as np
import pytest

from micromaser import PumpConfig
from micromaser.fock import DensityMatrix, FockSpace

SOLVABLE_GT = math.pi / math.sqrt(2)
BETA1 = math.sin(SOLVABLE_GT) ** 2


def random_state(space: FockSpace, rng, diagonal=False) -> DensityMatrix:
    d = space.dim
    if diagonal:
        pops = rng.random(d)
        return DensityMatrix.from_populations(pops / pops.sum(), space)
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return DensityMatrix(rho / np.trace(rho).real, space)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def fig4_cfg():
    return PumpConfig(gt_int=1.54, nex=5.0, nbar=0.145, p=0.5)


# one summary line per acceptance criterion ------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, False])
    if rep.failed:
        entry[1] = False
    if rep.when == "call":
        entry[2] = True


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, ran = _CRITERIA[number]
        verdict = "PASS" if ok and ran else ("FAIL" if ran or not ok else "SKIP")
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
