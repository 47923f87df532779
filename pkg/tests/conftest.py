import pytest

from optdesign.critical import morse_certify, solve_critical_points
from optdesign.manifold import problem_from_strings

TORUS_G = "(x^2+y^2+z^2+3)^2 - 16*(x^2+y^2)"
SPHERE_G = "x^2 + y^2 + z^2"
XYZ = ["x", "y", "z"]


def make_sphere_z(c=1.0, seed=42):
    return problem_from_strings(XYZ, [(SPHERE_G, 1.0)], "z", c, box=[(-2, 2)] * 3, seed=seed)


def make_sphere_zsq(c=1.0, seed=42):
    return problem_from_strings(XYZ, [(SPHERE_G, 1.0)], "z^2", c, box=[(-2, 2)] * 3, seed=seed)


def make_torus(objective, c, seed=42):
    return problem_from_strings(XYZ, [(TORUS_G, 0.0)], objective, c, box=[(-4, 4)] * 3, seed=seed)


@pytest.fixture(scope="session")
def sphere_z():
    return make_sphere_z()


@pytest.fixture(scope="session")
def torus_x():
    return make_torus("x", 3.0)


@pytest.fixture(scope="session")
def torus_z():
    return make_torus("z", 1.0)


@pytest.fixture(scope="session")
def sphere_zsq():
    return make_sphere_zsq()


@pytest.fixture(scope="session")
def sphere_z_catalog(sphere_z):
    return morse_certify(sphere_z, solve_critical_points(sphere_z))


@pytest.fixture(scope="session")
def torus_x_catalog(torus_x):
    return morse_certify(torus_x, solve_critical_points(torus_x))


@pytest.fixture(scope="session")
def torus_z_catalog(torus_z):
    return morse_certify(torus_z, solve_critical_points(torus_z))
