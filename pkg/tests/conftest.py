import pytest

from pfdecompose import load_case_study
from pfdecompose.engine import decompose


@pytest.fixture(scope="session")
def case_study():
    return load_case_study()


@pytest.fixture(scope="session")
def case_study_computed():
    return load_case_study(computed=True)


@pytest.fixture(scope="session")
def case_result(case_study):
    return decompose(case_study)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
