"""
標準導子 δ_j、Laplacian L = −Σ δ_j² 與梯度 / Hessian 家族

全部是 Fourier 對角乘子：
    δ^α U^m = (2πi)^{|α|} m^α U^m
    L U^m   = 4π²|m|² U^m
"""
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from lattice.algebra import l2_norm
from lattice.errors import DimensionMismatchError, NCTorusError
from lattice.nc_element import MultiIndex, NCElement, count_multi_indices, enumerate_multi_indices

FOUR_PI_SQUARED = 4.0 * math.pi ** 2
_I_POWERS = (1.0 + 0j, 1j, -1.0 + 0j, -1j)


def two_pi_i_power(order: int) -> complex:
    """(2πi)^order，i 的冪次取精確值"""
    return (2.0 * math.pi) ** order * _I_POWERS[order % 4]


def squared_modulus(points: np.ndarray) -> np.ndarray:
    """|m|² (浮點數)"""
    points = np.asarray(points, dtype=np.float64)
    return np.sum(points * points, axis=1)


def derivative_symbol(alpha: MultiIndex, points: np.ndarray) -> np.ndarray:
    """(2πi)^{|α|} m^α"""
    return two_pi_i_power(alpha.order) * alpha.monomial(points)


def laplacian_symbol(points: np.ndarray) -> np.ndarray:
    return FOUR_PI_SQUARED * squared_modulus(points)


def apply_symbol(a: NCElement, symbol: np.ndarray) -> NCElement:
    """對角乘子：c_m ↦ symbol(m)·c_m，乘積為 0 的係數會被移除"""
    return NCElement.from_arrays(a.theta, a.points, a.coeffs * symbol)


def _check_alpha(a: NCElement, alpha: MultiIndex) -> None:
    if alpha.n != a.n:
        raise DimensionMismatchError(f"多重指標維度 {alpha.n} 與元素維度 {a.n} 不一致")


def derivation(a: NCElement, alpha: MultiIndex) -> NCElement:
    """δ^α a"""
    _check_alpha(a, alpha)
    if alpha.order == 0:
        return a
    return apply_symbol(a, derivative_symbol(alpha, a.points))


def partial(a: NCElement, j: int, power: int = 1) -> NCElement:
    """δ_j^power a"""
    return derivation(a, MultiIndex.unit(a.n, j, power))


def laplacian(a: NCElement) -> NCElement:
    """L a"""
    return apply_symbol(a, laplacian_symbol(a.points))


def laplacian_power_apply(a: NCElement, ell: int) -> NCElement:
    """L^ℓ a"""
    if ell < 0:
        raise NCTorusError(f"Laplacian 冪次必須非負，收到 {ell}")
    if ell == 0:
        return a
    return apply_symbol(a, laplacian_symbol(a.points) ** ell)


@dataclass(frozen=True)
class DerivativeFamily:
    """∇^k_θ a = (δ^α a)_{α ∈ I_k}"""
    order: int
    indices: List[MultiIndex]
    entries: List[NCElement]

    def __post_init__(self):
        if len(self.indices) != len(self.entries):
            raise NCTorusError("導數家族的指標數與元素數不一致")

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, alpha: MultiIndex) -> NCElement:
        for index, element in zip(self.indices, self.entries):
            if index == alpha:
                return element
        raise KeyError(alpha.alpha)


@dataclass(frozen=True)
class HessianMatrix:
    """Hess_θ(a) = (δ_i δ_j a)_{i,j}"""
    entries: List[List[NCElement]]

    @property
    def n(self) -> int:
        return len(self.entries)

    def entry(self, i: int, j: int) -> NCElement:
        return self.entries[i][j]


def gradient_family(a: NCElement, k: int) -> DerivativeFamily:
    indices = enumerate_multi_indices(a.n, k)
    family = DerivativeFamily(k, indices, [derivation(a, alpha) for alpha in indices])
    if len(family) != count_multi_indices(a.n, k):
        raise NCTorusError(f"導數家族大小 {len(family)} 不等於 N_(k,n)")
    return family


def hessian(a: NCElement) -> HessianMatrix:
    rows = []
    for i in range(a.n):
        rows.append([derivation(a, MultiIndex.unit(a.n, i) + MultiIndex.unit(a.n, j)) for j in range(a.n)])
    return HessianMatrix(rows)


def family_l2_norm(family: DerivativeFamily) -> float:
    """(Σ_{α∈I_k} ‖δ^α a‖²_{L²})^{1/2}"""
    return math.sqrt(math.fsum(l2_norm(entry) ** 2 for entry in family.entries))


def hessian_l2_norm(matrix: HessianMatrix) -> float:
    return math.sqrt(math.fsum(l2_norm(entry) ** 2 for row in matrix.entries for entry in row))
