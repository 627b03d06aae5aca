import numpy as np
import pytest

from flab import Lattice, build_rates, make_b_function, make_potential, stationary_measure


@pytest.fixture(scope="session")
def sg():
    return make_b_function("scharfetter-gummel")


@pytest.fixture(scope="session")
def ou():
    """The Ornstein-Uhlenbeck benchmark u(x) = x^2/2 (continuum gap 1)."""
    return make_potential("quadratic", [0.5])


@pytest.fixture(scope="session")
def ou_chain(ou, sg):
    """Medium OU window: h = 0.2, |x| <= 8."""
    lat = Lattice(0.2, 40)
    r = build_rates(ou, sg, lat)
    m = stationary_measure(ou, lat)
    return lat, r, m


def random_poly_potential(rng):
    """Random degree-4 polynomial with coefficients scaled to keep the
    potential range modest on |x| <= 8 (no weight underflow)."""
    from flab import make_potential

    coeffs = rng.uniform(-1, 1, 5) * np.array([1.0, 0.5, 0.25, 0.1, 0.05])
    return make_potential("custom_poly", coeffs)
