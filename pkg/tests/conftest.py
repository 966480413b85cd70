import math

import numpy as np
import pytest

from thinsteklov.core import Profile

SHIPPED_PROFILES = {
    "constant": Profile.constant(1.0),
    "polynomial": Profile.polynomial([1.0, 0.2, 0.1]),
    "cosine": Profile.cosine_bump(1.0, 0.3),
}


def bisect(f, a, b, tol=1e-15, maxiter=200):
    fa = f(a)
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fa * fm <= 0:
            b = m
        else:
            a, fa = m, fm
        if b - a < tol * max(1.0, abs(a)):
            break
    return 0.5 * (a + b)


def clamped_beam_roots(count):
    """Roots of cos(b) cosh(b) = 1 by bisection, b > 0.

    Written as cos(b) - 1/cosh(b) to avoid cosh overflow; the k-th root lies
    in ((k + 1/2) pi - 0.5, (k + 1/2) pi + 0.5).
    """
    f = lambda b: math.cos(b) - 1.0 / math.cosh(b)
    roots = []
    for k in range(1, count + 1):
        c = (k + 0.5) * math.pi
        roots.append(bisect(f, c - 0.5, c + 0.5))
    return np.array(roots)


def clamped_beam_eigenvalues(count, l=1.0):
    return (clamped_beam_roots(count) / (2.0 * l)) ** 4


@pytest.fixture(params=sorted(SHIPPED_PROFILES))
def shipped_profile(request):
    return SHIPPED_PROFILES[request.param]


@pytest.fixture(scope="session")
def beam_eigenvalues():
    return clamped_beam_eigenvalues(6)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
