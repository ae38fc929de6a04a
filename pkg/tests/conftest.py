import pytest

from corrdyn.datasets import bundled_correspondence


@pytest.fixture(scope="session")
def corr_z2():
    return bundled_correspondence("z2")


@pytest.fixture(scope="session")
def corr_z3():
    return bundled_correspondence("z3")


@pytest.fixture(scope="session")
def corr_mobius():
    return bundled_correspondence("mobius")


@pytest.fixture(scope="session")
def corr_pair():
    return bundled_correspondence("mobius_pair")


@pytest.fixture(scope="session")
def corr_z2z3():
    return bundled_correspondence("z2_plus_z3")
