import numpy as np
import pytest

from nds.code import ccsds_128_64, hamming_7_4


@pytest.fixture(scope="session")
def ccsds():
    return ccsds_128_64()


@pytest.fixture(scope="session")
def hamming():
    return hamming_7_4()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
