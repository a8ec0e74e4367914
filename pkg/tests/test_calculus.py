import math

import numpy as np
import pytest

from calculus.derivations import (derivation, gradient_family, hessian, laplacian, laplacian_power_apply,
                                  partial)
from calculus.sobolev import (SobolevParams, norm_equivalence_constants, sobolev_h_norm,
                              sobolev_w_norm, sobolev_w_norm_spectral, sobolev_w_seminorm)
from lattice.algebra import linear_combination, multiply, random_element
from lattice.errors import DimensionMismatchError, NCTorusError
from lattice.nc_element import MultiIndex, NCElement, ThetaMatrix


def test_partial_on_monomial():
    theta = ThetaMatrix.golden(2)
    image = partial(NCElement.monomial(theta, (3, -2)), 1)
    assert image.coefficient((3, -2)) == pytest.approx(2j * math.pi * -2)


def test_derivation_of_order_zero_is_identity(random_pair):
    a, _ = random_pair
    assert derivation(a, MultiIndex.zero(2)) is a


def test_derivation_rejects_wrong_dimension(random_pair):
    a, _ = random_pair
    with pytest.raises(DimensionMismatchError):
        derivation(a, MultiIndex((1, 0, 0)))


def test_leibniz_rule(random_pair):
    a, b = random_pair
    for j in range(2):
        left = partial(multiply(a, b), j)
        right = multiply(partial(a, j), b) + multiply(a, partial(b, j))
        assert left.allclose(right, atol=1e-10)


def test_laplacian_is_minus_sum_of_second_derivatives(random_pair):
    a, _ = random_pair
    expected = linear_combination([(-1.0, partial(a, j, 2)) for j in range(2)])
    assert laplacian(a).allclose(expected, atol=1e-10)


def test_laplacian_power_composes(random_pair):
    a, _ = random_pair
    twice = laplacian(laplacian(a))
    assert laplacian_power_apply(a, 2).allclose(twice, atol=1e-7)
    with pytest.raises(NCTorusError):
        laplacian_power_apply(a, -1)


def test_gradient_family_and_hessian_shapes(golden3):
    a = random_element(golden3, 1, seed=5)
    family = gradient_family(a, 2)
    assert len(family) == math.comb(3 + 2 - 1, 2)
    matrix = hessian(a)
    assert matrix.n == 3
    assert matrix.entry(0, 2).allclose(family.entry(MultiIndex((1, 0, 1))), atol=0.0)


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0, 2.5])
def test_h_norm_of_monomial(s):
    theta = ThetaMatrix.zero(2)
    value = sobolev_h_norm(NCElement.monomial(theta, (1, 2), 2.0), s)
    assert value == pytest.approx(2.0 * (1.0 + 4.0 * math.pi ** 2 * 5.0) ** (s / 2.0), rel=1e-14)


def test_h_norm_rejects_negative_order(random_pair):
    a, _ = random_pair
    with pytest.raises(NCTorusError):
        sobolev_h_norm(a, -1.0)


def test_spectral_w_norm_matches_seminorms(random_pair):
    a, _ = random_pair
    for k in range(4):
        seminorms = [sobolev_w_seminorm(a, j) for j in range(k + 1)]
        assert sobolev_w_norm_spectral(a, k) == pytest.approx(math.sqrt(sum(x * x for x in seminorms)), rel=1e-12)
        assert sobolev_w_norm(a, k) == pytest.approx(sum(seminorms), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_h_and_w_norms_are_equivalent_on_box(k, random_pair):
    a, _ = random_pair
    low, high = norm_equivalence_constants(k, 2, 2)
    h_norm = sobolev_h_norm(a, k)
    w_norm = sobolev_w_norm(a, k)
    assert low * h_norm <= w_norm * (1.0 + 1e-12)
    assert w_norm <= high * h_norm * (1.0 + 1e-12)


def test_sobolev_params_only_compute_for_p2(random_pair):
    a, _ = random_pair
    assert SobolevParams(s=1.0).h_norm(a) == sobolev_h_norm(a, 1.0)
    with pytest.raises(NCTorusError, match="p = 3"):
        SobolevParams(k=1, p=3.0).w_norm(a)


def test_sobolev_params_validate_order():
    with pytest.raises(NCTorusError):
        SobolevParams(k=1.5)


def test_zero_element_norms():
    zero = NCElement.zero(ThetaMatrix.zero(1))
    assert sobolev_h_norm(zero, 2.0) == 0.0
    assert sobolev_w_norm_spectral(zero, 2) == 0.0
    np.testing.assert_array_equal(laplacian(zero).coeffs, np.zeros(0))
