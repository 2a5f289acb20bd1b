import numpy as np
import pytest

from revdem import shape
from revdem.body import MaterialParams
from revdem.template import build_template

TABLET = dict(band_radius=5.675e-3, band_height=4.0e-3, cap_height=1.23e-3)


@pytest.fixture(scope="session")
def tablet_profile():
    return shape.tablet_profile(**TABLET)


@pytest.fixture(scope="session")
def sphere_profile():
    return shape.sphere_profile(1.0)


@pytest.fixture(scope="session")
def sphere_template():
    return build_template(shape.sphere_profile(0.01), density=2500.0,
                          n_nodes=800)


@pytest.fixture(scope="session")
def spheroid_template():
    return build_template(shape.spheroid_profile(5e-3, 2.5e-3),
                          density=2500.0, n_nodes=1200)


@pytest.fixture(scope="session")
def tablet_template(tablet_profile):
    return build_template(tablet_profile, density=1191.3, n_nodes=2000)


@pytest.fixture()
def elastic_material():
    return MaterialParams(young=1e8, poisson=0.3, density=2500.0,
                          restitution_pp=1.0, restitution_pw=1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
