import numpy as np
import pytest

from phonon_stats.model import SystemParams


def fig1_params(kappa=5e-3, nbar=0.04, g=15.0, detuning_ratio=-0.7, two_omega=25.0):
    """Reference point: 2Omega/gamma = 25, Delta/(2Omega) = -0.7, g = 15, omega_ph = 35, gamma_c = 0.1."""
    return SystemParams.from_ratios(
        two_omega=two_omega, detuning_ratio=detuning_ratio, kappa=kappa, nbar=nbar, g=g, omega_ph=35.0, gamma_c=0.1
    )


@pytest.fixture
def fig1():
    return fig1_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
