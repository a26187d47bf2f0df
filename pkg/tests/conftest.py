import math

import numpy as np
import pytest

from coopemit.dynamics import DriveKind, DriveProtocol, EmitterParams

# rates quoted for the measured emitter pair
LIFETIME_NS = 0.643
PULSED_DEPHASING_NS = 0.280
CW_DECAY_NS = 0.880  # (2 gamma)^-1 in the CW correlation
CW_DEPHASING_NS = 0.199

ACCEPTANCE_LINES: list = []


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def pulsed_params():
    return EmitterParams(gamma=1 / LIFETIME_NS, gamma_d=1 / PULSED_DEPHASING_NS)


@pytest.fixture
def pi_pulse():
    return DriveProtocol(kind=DriveKind.COHERENT_PULSED, pulse_area=math.pi)


@pytest.fixture
def cw_params():
    g = 1 / (2 * CW_DECAY_NS)
    return EmitterParams(gamma=g, gamma_p=g, gamma_d=1 / CW_DEPHASING_NS)


def random_density(rng, dim):
    """Random full-rank density matrix (Ginibre construction)."""
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho)
