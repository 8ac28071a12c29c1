import numpy as np
import pytest

from snse.basis import get_basis


@pytest.fixture(scope="session")
def basis2():
    return get_basis(2)


@pytest.fixture(scope="session")
def basis4():
    return get_basis(4)


@pytest.fixture(scope="session")
def basis8():
    return get_basis(8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
