import math
import os
import time

import numpy as np
import pytest

from gpcollapse import asymptotics, gp2d, kwong, potential

# regression constants frozen from the default shooting run (dr = 1e-3,
# bisection tol = 1e-12) and cross-checked against independent quadrature
B_STAR = 2.2062008646502
A_STAR = 11.700896524551585
M2 = 13.894861635161263


@pytest.fixture(scope="session")
def profile():
    return kwong.default_profile()


@pytest.fixture(scope="session")
def consts(profile):
    return kwong.kwong_constants(profile, powers=(0, 2, 4))


@pytest.fixture(scope="session")
def a_star(consts):
    return consts.a_star


@pytest.fixture(scope="session")
def harmonic():
    return potential.harmonic()


@pytest.fixture(scope="session")
def double_well():
    return potential.double_well(d=2.0, p=2.0)


# acceptance lines, printed in the terminal summary
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


@pytest.fixture(scope="session")
def harmonic_sweep_timed(harmonic, a_star, profile):
    """Default-window sweep of V = |x|² and its wall time."""
    a_list = asymptotics.window_couplings(a_star)
    workers = min(4, os.cpu_count() or 1)
    t0 = time.perf_counter()
    rep = asymptotics.sweep(harmonic, a_list, asymptotics.SweepOptions(workers=workers), profile=profile)
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def harmonic_sweep(harmonic_sweep_timed):
    return harmonic_sweep_timed[0]


@pytest.fixture(scope="session")
def ho_ground(harmonic, a_star, profile):
    return gp2d.minimize(harmonic, 0.0, gp2d.MinimizeOptions(L=8.0, n=256), a_star=a_star, profile=profile)


def gaussian_state(L=8.0, n=256):
    return gp2d.Field2D.from_function(
        lambda X, Y: math.pi**-0.5 * np.exp(-(X**2 + Y**2) / 2), L, n, normalize=False
    )
