import numpy as np
import pytest

from varimin import shapes, varifold_from_mesh


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def ico3():
    return shapes.icosphere(refinements=3)


@pytest.fixture(scope="session")
def ico4():
    return shapes.icosphere(refinements=4)


@pytest.fixture(scope="session")
def ico5():
    return shapes.icosphere(refinements=5)


@pytest.fixture(scope="session")
def sphere_v3(ico3):
    return varifold_from_mesh(ico3)


@pytest.fixture(scope="session")
def sphere_v4(ico4):
    return varifold_from_mesh(ico4)


@pytest.fixture(scope="session")
def sphere_v5(ico5):
    return varifold_from_mesh(ico5)


@pytest.fixture(scope="session")
def torus_mesh():
    return shapes.torus(major=1.0, minor=0.4, n_major=96, n_minor=48)


@pytest.fixture(scope="session")
def torus_v(torus_mesh):
    return varifold_from_mesh(torus_mesh)
