import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def record(request):
    """Record one acceptance line: ``record(n, passed, detail)``."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def _record(n: int, passed: bool, detail: str):
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'} {detail}"
        lines.append((n, line))
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
