import pytest

from frachh.kinetics import HHParams, equilibrium


@pytest.fixture(scope="session")
def eq0():
    return equilibrium(0.0)


@pytest.fixture(scope="session")
def classic_i10():
    return HHParams.classic(current_I=10.0)


@pytest.fixture(scope="session")
def classic_i10_noisy():
    return HHParams.classic(current_I=10.0, sigma=0.25)
