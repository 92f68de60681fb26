import pytest

from testfee import MixedDistribution, binary_optimal
from testfee.cli import table1_test


@pytest.fixture(scope="session")
def binary():
    return MixedDistribution.binary(0.0, 1.0, 0.5)


@pytest.fixture(scope="session")
def gstar():
    return binary_optimal(0.0, 1.0, 0.5).structure.dist


@pytest.fixture(scope="session")
def table1():
    return table1_test(1 / 9).to_distribution()
