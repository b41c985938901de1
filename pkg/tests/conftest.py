import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from aggdiff.density import Grid, make_density
from aggdiff.potential import weakly_confining_power
from aggdiff.steady import compute_steady

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def spec3():
    """Weakly confining power potential, alpha = 3, with m = 4."""
    return weakly_confining_power(3.0, m=4.0)


@pytest.fixture(scope="session")
def grid128():
    return Grid(4.0, 128)


@pytest.fixture(scope="session")
def steady128(spec3, grid128):
    return compute_steady(1.0, spec3, 4.0, 1e-10, grid128)


def box(grid, half=0.5, height=None):
    """Box on |x| <= half; unit mass unless a height is given."""
    rho = make_density(grid, lambda x: (np.abs(x) < half).astype(float), normalize=height is None)
    if height is not None:
        return rho.with_values(rho.values * height)
    return rho


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
