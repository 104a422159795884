import time

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import pbdv

from magspec.geometry import ParametricBoundary, build_profile, profile, strip_metric
from magspec.harness import run_sweep
from magspec.model1d import reference_constants

SWEEP_H = (0.02, 0.014, 0.01, 0.007, 0.005)

ACCEPTANCE_LINES = []
TIMINGS = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


# independent oracle: the half-line Neumann ground state is a parabolic
# cylinder function D_nu(sqrt(2)(x + xi)) with mu = 2 nu + 1 and D_nu' = 0 at x = 0
def pcf_mu(xi):
    f = lambda v: pbdv(v, np.sqrt(2) * xi)[1]
    vs = np.linspace(-0.95, 2.0, 300)
    fv = [f(v) for v in vs]
    for a, b, fa, fb in zip(vs[:-1], vs[1:], fv[:-1], fv[1:]):
        if fa * fb < 0:
            return 2 * brentq(f, a, b, xtol=1e-15) + 1
    raise RuntimeError("no root")


@pytest.fixture(scope="session")
def pcf_theta0():
    xi0 = brentq(lambda x: pcf_mu(x) - x * x, -1.0, -0.5, xtol=1e-15)
    return xi0 * xi0, xi0


@pytest.fixture(scope="session")
def mc():
    return reference_constants()


@pytest.fixture(scope="session")
def ellipse():
    return profile(ParametricBoundary.ellipse(2.0, 1.0))


@pytest.fixture(scope="session")
def ellipse_metric(ellipse):
    return strip_metric(ellipse)


@pytest.fixture(scope="session")
def circle_metric():
    return strip_metric(build_profile(ParametricBoundary.circle(1.0)))


@pytest.fixture(scope="session")
def ellipse_sweep(ellipse_metric, mc):
    start = time.perf_counter()
    rep = run_sweep(ellipse_metric, mc, SWEEP_H)
    TIMINGS["sweep"] = time.perf_counter() - start
    return rep
