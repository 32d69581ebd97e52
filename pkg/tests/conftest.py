import pytest

from neurospike import _backend, lif

BACKENDS = _backend.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture(scope="session")
def nominal_trace():
    return lif.simulate_scenario(lif.fig3_nominal())


@pytest.fixture(scope="session")
def noisy_trace():
    return lif.simulate_scenario(lif.fig3_noisy_asym(seed=11))


@pytest.fixture(scope="session")
def certified_trace():
    return lif.simulate_scenario(lif.certified_scenario())


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
