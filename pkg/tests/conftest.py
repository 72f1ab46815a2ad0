import numpy as np
import pytest

# filled by tests/test_acceptance.py: criterion number -> (passed, title, detail)
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {k:2d}: {title}  [{detail}]")
