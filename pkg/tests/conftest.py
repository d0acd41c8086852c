import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "salbench", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("salbench")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=["compiled", "python"])
def backend(request):
    """Runs a test once per available kernel backend, restoring the default afterwards."""
    from salbench import tensor as T

    if request.param not in T.available_backends():
        pytest.skip("compiled kernels not built")
    saved = T.BACKEND
    T.set_backend(request.param)
    yield request.param
    T.set_backend(saved)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_line():
    """Records one PASS/FAIL line per acceptance criterion; the lines are echoed in the terminal summary."""

    def record(number: int, ok: bool, detail: str, seconds: float) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  ({seconds:.1f} s)"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
