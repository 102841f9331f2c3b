import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from superlattice.interference import Grid, SuperlatticeConfig
from superlattice.phasematch import PumpSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

L = 1e-3
L_GAP = 8.2e-3
PUMP = PumpSpec(532e-9, 3e-3, np.deg2rad(50.34))
PUMP_501 = PumpSpec(532e-9, 3e-3, np.deg2rad(50.1))


def uniform(n, pump=PUMP, **kw):
    return SuperlatticeConfig.uniform(n, L, L_GAP, pump=pump, **kw)


@pytest.fixture(scope="session")
def small_grid():
    # three rows around 610.4 nm, fine enough in angle to resolve N = 5 fringes
    return Grid.uniform(610.3e-9, 610.5e-9, 3, np.deg2rad(0.85), 601)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid.uniform(607e-9, 614e-9, 15, np.deg2rad(0.85), 121)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
