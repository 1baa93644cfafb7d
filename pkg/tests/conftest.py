import re
import warnings

import numpy as np
import pytest

# criterion number -> {"title": str, "tests": [(name, passed, details)]}
_CRITERIA = {}

PHI3 = np.array([[2.0, 3.0], [4.0, 5.0], [2.0, 1.0]])
PHI_X2 = np.array([[2.0, 3.0], [4.0, 5.0], [6.0, 7.0]])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        number, title = marker.args
        entry = _CRITERIA.setdefault(number, {"title": title, "tests": []})
        details = ", ".join(f"{k}={v}" for k, v in rep.user_properties)
        entry["tests"].append((item.name, rep.passed, details))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        ok = all(passed for _, passed, _ in entry["tests"])
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number}: {entry['title']}")
        for name, passed, details in entry["tests"]:
            part = re.sub(r"^test_", "", name)
            mark = "ok  " if passed else "FAIL"
            tr.write_line(f"        {mark} {part}" + (f" [{details}]" if details else ""))


@pytest.fixture
def phi3():
    return PHI3.copy()


@pytest.fixture
def contextual_blocks():
    return [PHI3.copy(), PHI_X2.copy()]


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
