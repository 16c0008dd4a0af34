import math

import numpy as np
import pytest

from kanova.decomposition import ProductKernel
from kanova.kernels import Kernel1D

ACCEPTANCE_LINES: list[str] = []

THETA_EXP = 1.0 / math.sqrt(2.0)


def gl_oracle(f, a=0.0, b=1.0, n=64, breaks=()):
    """Probability-normalized Gauss-Legendre on [a, b], composite over ``breaks``."""
    x, w = np.polynomial.legendre.leggauss(n)
    pts = [a] + sorted(p for p in breaks if a < p < b) + [b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        s = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * np.dot(w, f(s))
    return total / (b - a)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def gauss2():
    return ProductKernel.isotropic(Kernel1D.gaussian(THETA_EXP), 2)


@pytest.fixture(scope="session")
def gauss8():
    return ProductKernel.isotropic(Kernel1D.gaussian(THETA_EXP), 8)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
