# tests/conftest.py
import pytest

from recurdim.ifs_core import build_system
from recurdim.potentials import Potential


@pytest.fixture
def dyadic():
    return build_system("badic:b=2")


@pytest.fixture
def triadic():
    return build_system("badic:b=3")


@pytest.fixture
def cantor():
    return build_system("cantor:b=3,digits=0|2")


@pytest.fixture
def cf2():
    return build_system("cf:amax=2")


@pytest.fixture
def zero():
    return Potential.const(0)


@pytest.fixture
def logderiv1():
    return Potential.logderiv(1)
