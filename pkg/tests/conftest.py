import numpy as np
import pytest

from thinflow.spectral import DomainSpec


@pytest.fixture
def small_domain() -> DomainSpec:
    return DomainSpec(l1=1.0, l2=1.0, eps=0.125, nu=1.0, n1=4, n2=4, n3=2)


@pytest.fixture
def thin_domain() -> DomainSpec:
    return DomainSpec(l1=1.5, l2=1.0, eps=0.2, nu=0.05, n1=6, n2=5, n3=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
