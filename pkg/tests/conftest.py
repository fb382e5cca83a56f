import numpy as np
import pytest

from resolvent_lab import opfactory


@pytest.fixture(scope="session")
def L_matrix():
    """L = -f'' + ξ D^α_{0+} with alpha_rl = 1/4, ξ = 0.2, cached per size."""
    cache = {}

    def build(N, alpha_rl=0.25, xi=0.2):
        key = (N, alpha_rl, xi)
        if key not in cache:
            spec = opfactory.OperatorSpec(kind="rl_perturbed", N=N, alpha_rl=alpha_rl, xi=xi)
            cache[key] = opfactory.assemble(spec)
        return cache[key]

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and report.when == "call":
        number = int(report.nodeid.split("test_criterion_")[1][:2])
        _CRITERIA[number] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if _CRITERIA[number] else 'FAIL'}")
