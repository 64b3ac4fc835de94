import pytest

from indefsl.bc import named_bc
from indefsl.expr import parse
from indefsl.weights import parse_weight

SGN = ("sgn(x)", (-1.0, 1.0), [0.0], ["x", "x"])
LOG = (
    "sgn(x)/((1-abs(x))*log((1-abs(x))/e)^2)",
    (-1.0, 1.0),
    [0.0],
    ["1/(1/log1p(x)-1)", "-1/(1/log1p(-x)-1)"],
)
WOD = ("1/(x*(1-log(abs(x)))^2)", (-1.0, 1.0), [0.0], ["-1/(1-log(-x))", "1/(1-log(x))"])


@pytest.fixture(scope="session")
def sgn():
    return parse_weight(*SGN)


@pytest.fixture(scope="session")
def logw():
    return parse_weight(*LOG)


@pytest.fixture(scope="session")
def wod():
    return parse_weight(*WOD)


@pytest.fixture(scope="session")
def base_log():
    """Positive weight ``1/(x (1 - log x)^2)`` on ``[0, 1]``."""
    return parse_weight("1/(x*(1-log(x))^2)", (0.0, 1.0), [], "1/(1-log(x))")


@pytest.fixture(scope="session")
def zero():
    return parse("0")


@pytest.fixture(scope="session")
def periodic():
    return named_bc("periodic")


@pytest.fixture(scope="session")
def dirichlet():
    return named_bc("dirichlet")


# -- acceptance summary -----------------------------------------------------

_ACCEPTANCE: dict[int, list] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    entry = _ACCEPTANCE.setdefault(number, [title, True])
    if report.failed:
        entry[1] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
