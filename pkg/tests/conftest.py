import pytest

from lattice.algebra import random_element
from lattice.nc_element import ThetaMatrix
from nonlinear.polynomial import power, zero_polynomial


@pytest.fixture(params=["zero", "golden"])
def theta2(request):
    """n = 2 的交換與非交換 θ"""
    return ThetaMatrix.zero(2) if request.param == "zero" else ThetaMatrix.golden(2)


@pytest.fixture
def golden3():
    return ThetaMatrix.golden(3)


@pytest.fixture
def scalar_theta():
    return ThetaMatrix.zero(1)


@pytest.fixture
def random_pair(theta2):
    return (random_element(theta2, 2, sigma=1.5, seed=11),
            random_element(theta2, 2, sigma=1.5, seed=12))


@pytest.fixture
def quadratic(scalar_theta):
    """u ↦ u²"""
    return power(scalar_theta, 2, 1.0)


@pytest.fixture
def linear_heat(scalar_theta):
    """N ≡ 0"""
    return zero_polynomial(scalar_theta)
