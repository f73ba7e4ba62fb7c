from __future__ import annotations

import pytest

from synlearn.circuit import load_bundled
from synlearn.faults import FaultTemplate, build_prior
from synlearn.spacetime import build_spacetime_code

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion with a timing budget")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    if rep.when == "setup" and rep.passed:
        return
    _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, secs = _ACCEPTANCE[number]
        terminalreporter.write_line(f"AC{number:<2} {verdict}  {title}  ({secs:.1f} s)")


@pytest.fixture(scope="session")
def rep_code():
    return build_spacetime_code(load_bundled("repetition_d3_r3"))


@pytest.fixture(scope="session")
def rep_model(rep_code):
    return FaultTemplate().build(rep_code, 5e-4)


@pytest.fixture(scope="session")
def rep_prior(rep_model):
    return build_prior(rep_model)


@pytest.fixture(scope="session")
def small_code():
    return build_spacetime_code(load_bundled("repetition_d3_r1"))
