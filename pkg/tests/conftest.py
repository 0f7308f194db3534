from pathlib import Path

import pytest
import sympy as sp

from condsym import JetContext, parse_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


@pytest.fixture(scope="session")
def load():
    cache = {}

    def _load(name):
        if name not in cache:
            cache[name] = parse_problem((PROBLEMS / f"{name}.prob").read_text())
        return cache[name]

    return _load


@pytest.fixture
def ctx2():
    return JetContext(("x", "t"), ("u",), 4)


@pytest.fixture
def J(ctx2):
    return ctx2.parse_jet


@pytest.fixture
def xt(ctx2):
    return ctx2.x


@pytest.fixture(scope="session")
def params():
    return sp.symbols("c c1 c2")


_criteria: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    _criteria.setdefault(marker.args[0], []).append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        results = _criteria[n]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} ({sum(results)}/{len(results)} checks)")
