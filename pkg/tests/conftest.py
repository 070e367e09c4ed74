import pytest

from tangent_groupoid.manifest import bundled


@pytest.fixture(scope="session")
def heisenberg():
    return bundled("heisenberg3")


@pytest.fixture(scope="session")
def engel():
    return bundled("engel4")


@pytest.fixture(scope="session")
def twisted():
    return bundled("twisted-heisenberg")


@pytest.fixture(scope="session")
def abelian():
    return bundled("abelian-3")


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import RESULTS
    except ImportError:
        try:
            from test_acceptance import RESULTS
        except ImportError:
            return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
