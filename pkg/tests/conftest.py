import numpy as np
import pytest

from eitact import build_mesh, compute_jacobian, homogeneous_field, \
    solve_forward, to_nonredundant
from eitact.phantoms import BACKGROUND_CONDUCTIVITY


@pytest.fixture(scope="session")
def mesh1():
    return build_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return build_mesh(2)


@pytest.fixture(scope="session")
def background1(mesh1):
    return homogeneous_field(mesh1, BACKGROUND_CONDUCTIVITY)


@pytest.fixture(scope="session")
def background2(mesh2):
    return homogeneous_field(mesh2, BACKGROUND_CONDUCTIVITY)


@pytest.fixture(scope="session")
def v_bg2(mesh2, background2):
    return to_nonredundant(solve_forward(mesh2, background2)).values


@pytest.fixture(scope="session")
def jacobian1(mesh1, background1):
    return compute_jacobian(mesh1, background1)


@pytest.fixture(scope="session")
def jacobian2(mesh2, background2):
    return compute_jacobian(mesh2, background2)
