import numpy as np
import pytest

from gbsde_lab.sublinear import GConfig, build_lattice
from gbsde_lab.yosida import GeneratorSpec

ACCEPTANCE_LINES = []


def custom_generator(f, u=0.0, L=0.0, h=0.0, T=1.0, name="custom"):
    """GeneratorSpec from a plain callable with constant u and h."""
    const = lambda c: (lambda t: np.zeros_like(np.asarray(t, dtype=float)) + c)  # noqa: E731
    return GeneratorSpec(f=f, u=const(u), L=L, h=const(h), M=u * u * T, T=T, name=name)


@pytest.fixture(scope="session")
def g_half():
    return GConfig(0.5, 1.0)


@pytest.fixture(scope="session")
def small_lattice(g_half):
    return build_lattice(1.0, 20, g_half, m_vol=3, truncation_factor=5.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
