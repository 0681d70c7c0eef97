import numpy as np
import pytest

import gexpect as gx


@pytest.fixture(scope="session")
def grid256():
    return gx.TimeGrid(1.0, 256)


@pytest.fixture(scope="session")
def grid128():
    return gx.TimeGrid(1.0, 128)


@pytest.fixture(scope="session")
def grid50():
    return gx.TimeGrid(1.0, 50)


@pytest.fixture(scope="session")
def g_abs():
    """0.3|z1|: sublinear, y-free; the Ito-exact workhorse."""
    return gx.parse_generator("0.3*abs(z1)", 1, lipschitz=0.3)


@pytest.fixture(scope="session")
def g_neg_abs():
    """-0.3|z1|: concave, the frozen subadditivity counterexample."""
    return gx.parse_generator("0-0.3*abs(z1)", 1, lipschitz=0.3)


@pytest.fixture(scope="session")
def g_sqrt():
    """sqrt(1+z1^2)-1: convex in z but not positively homogeneous."""
    return gx.parse_generator("sqrt(1+z1*z1)-1", 1, lipschitz=1.0)


@pytest.fixture(scope="session")
def g_sin():
    """sin(y)*min(|z1|,1): genuinely y-dependent."""
    return gx.parse_generator("sin(y)*min(abs(z1),1)", 1, lipschitz=1.0)


@pytest.fixture(scope="session")
def g_zero():
    return gx.GeneratorSpec(body=lambda t, y, z: 0.0 * (y + z[0]),
                            dimension=1, lipschitz=0.0)


@pytest.fixture(scope="session")
def g_linear():
    """0.1y + 0.5z1: raw (unnormalized) linear driver with a closed form."""
    return gx.parse_generator("0.1*y + 0.5*z1", 1, lipschitz=0.6)


@pytest.fixture(scope="session")
def claim_x():
    return gx.parse_claim("x", 1)


@pytest.fixture(scope="session")
def claim_x2():
    return gx.parse_claim("x*x", 1)


@pytest.fixture(scope="session")
def paths50(grid50):
    return gx.simulate_paths(1, grid50, 20_000, seed=42)
