import pytest

from nclg import get_backend, set_backend
from nclg._backend import HAVE_NUMBA

BACKENDS = ["numpy"] + (["numba"] if HAVE_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = get_backend()
    set_backend(request.param)
    yield request.param
    set_backend(prev)


_REPORT = []


@pytest.fixture(scope="session")
def report():
    """Collects one status line per acceptance criterion for the terminal summary."""
    def add(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _REPORT.append(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
