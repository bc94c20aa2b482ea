import numpy as np
import pytest

from hybridprop import ClassicalState, build_oscillator_oscillator, build_spin_oscillator

SPIN = dict(epsilon=1.0, delta=0.5, mass=1.0, omega=1.0, gamma=0.1)
OSC = dict(N=32, omega_q=0.5, mass_q=1.0, mass_c=1.0, omega_c=1.0, lam=0.2)

ACCEPTANCE_LINES = []


def basis(n, k=0):
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


@pytest.fixture
def spin():
    return build_spin_oscillator(**SPIN)


@pytest.fixture
def osc():
    return build_oscillator_oscillator(**OSC)


@pytest.fixture
def start():
    return ClassicalState([1.0], [0.0])


@pytest.fixture
def acceptance_report():
    def report(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
