from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from nvaxy.register import SpinRegister, reference_register

KHZ = 2 * np.pi * 1e3


@pytest.fixture(scope="session")
def reg() -> SpinRegister:
    return reference_register()


@pytest.fixture(scope="session")
def reg850() -> SpinRegister:
    return reference_register(B_gauss=850.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = z @ z.conj().T
    return rho / np.trace(rho)


def sign_at(positions, x):
    return (-1.0) ** np.searchsorted(np.sort(positions), x, side="right")


def quadrature_coefficients(positions, k):
    """``2 int_0^1 F(x) cos / sin(2 pi k x) dx`` by adaptive quadrature."""
    pts = list(np.sort(positions))
    a = 2 * quad(lambda x: sign_at(positions, x) * np.cos(2 * np.pi * k * x), 0, 1, points=pts, limit=200,
                 epsabs=1e-13, epsrel=1e-13)[0]
    b = 2 * quad(lambda x: sign_at(positions, x) * np.sin(2 * np.pi * k * x), 0, 1, points=pts, limit=200,
                 epsabs=1e-13, epsrel=1e-13)[0]
    return a, b


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts collected by ``test_acceptance``."""
    import sys

    module = sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
