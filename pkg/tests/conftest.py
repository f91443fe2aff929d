import pytest

from mailvote.groups import MAIN, TOY11, TOY1009
from mailvote.rng import Drbg


@pytest.fixture
def main_grp():
    return MAIN


@pytest.fixture
def toy11():
    return TOY11


@pytest.fixture
def toy1009():
    return TOY1009


@pytest.fixture
def rng():
    return Drbg(1234)
