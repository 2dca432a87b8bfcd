import math

import numpy as np
import pytest

from pinball import analysis, scan, tables
from pinball.dynamics import PhasePoint, trajectory

# one line per acceptance criterion, echoed after the run regardless of capture
ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every jitted kernel once so compile time never lands in a test."""
    circ = tables.circle()
    egg = tables.three_pointed_egg(0.08)
    trajectory(0.5, circ, PhasePoint(0.1, 0.2), 8)
    analysis.lyapunov(0.5, circ, PhasePoint(0.1, 0.2), n=50, discard=5)
    analysis.attractor_period(0.5, circ, PhasePoint(0.1, 0.2), discard=50, pmax=4)
    analysis.period3_gap(0.0, egg, n_theta=8, n_phi=8)
    analysis.slap_square_min_derivative(tables.cardioid(), n_grid=16)
    analysis.classify_basin(0.5, circ, np.array([0.0]), np.array([0.1]), n=40, discard=10)
    scan.chaotic_fraction(0.5, egg, n_ics=1, seed=0, n=50, discard=10)
    scan.symmetry_components(0.5, egg, PhasePoint(0.3, 0.1), n=200, discard=20)
    spec = scan.SweepSpec(lam_values=(0.5,), n_ics=2, n=60, discard=10, seed=0)
    scan.bifurcation_scan(circ, spec, keep=4, pmax=4)


@pytest.fixture(scope="session")
def all_tables():
    return [
        tables.circle(),
        tables.ellipse(2.0),
        tables.cardioid(),
        tables.cuspless_cardioid(),
        tables.three_pointed_egg(0.08),
    ]


@pytest.fixture(scope="session")
def eggshape():
    return tables.three_pointed_egg(0.08)


@pytest.fixture(scope="session")
def cuspless():
    return tables.cuspless_cardioid()
