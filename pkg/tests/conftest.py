import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fessi.wavepacket import SpectralPhaseSpec, default_grid, make_gaussian_spectrum

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

E0 = 10000.0
SIGMA_E = 0.425
FIG3_PHASE = SpectralPhaseSpec({2: 0.34, 3: 1.05})


def pulse(sigma_E=SIGMA_E, phase=None, count=4096, span_sigmas=16.0):
    return make_gaussian_spectrum(default_grid(E0, sigma_E, count, span_sigmas), sigma_E, phase)


@pytest.fixture(scope="session")
def fig3_pulse():
    return pulse(phase=FIG3_PHASE)


@pytest.fixture(scope="session")
def tl_pulse():
    return pulse()


def rel_l2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))
                           if s.split()[1].rstrip(":").isdigit() else 99):
            terminalreporter.write_line(line)
