import numpy as np
import pytest

from nfmimo import Waveband


@pytest.fixture(scope="session")
def w() -> Waveband:
    return Waveband.from_ghz(28.0)


@pytest.fixture(scope="session")
def lam(w) -> float:
    return w.wavelength


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240628)
