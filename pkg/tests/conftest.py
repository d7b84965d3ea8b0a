import numpy as np
import pytest

from mcarma_whittle.objectives import ParamSpace
from mcarma_whittle.zoo import FAMILIES


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    return FAMILIES[request.param]


@pytest.fixture
def space_of():
    return lambda name, delta=1.0: ParamSpace.from_family(name, delta)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one PASS/FAIL line each in the terminal summary
_CRITERIA = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        _CRITERIA.append((mark.args[0], "PASS" if rep.passed else "FAIL", item.name, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, name, detail in sorted(_CRITERIA):
        terminalreporter.write_line(f"{status} criterion {num} ({name}): {detail}")
