"""
Sobolev 範數尺度 H^s_θ 與 W^{k,2}_θ

權重 ⟨m⟩ = (1 + 4π²|m|²)^{1/2}。數值範數只在 p = 2 計算（Plancherel 精確）。
"""
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from calculus.derivations import FOUR_PI_SQUARED, family_l2_norm, gradient_family, squared_modulus
from lattice.errors import NCTorusError
from lattice.nc_element import LatticeBox, NCElement, enumerate_multi_indices


@dataclass(frozen=True)
class SobolevParams:
    """s：H 尺度階數；k：W 尺度階數；p：Lebesgue 指數（數值計算僅限 2）"""
    s: float = 0.0
    k: int = 0
    p: float = 2.0

    def __post_init__(self):
        if self.s < 0:
            raise NCTorusError(f"Sobolev 階數 s 必須非負，收到 {self.s}")
        if self.k < 0 or int(self.k) != self.k:
            raise NCTorusError(f"Sobolev 階數 k 必須為非負整數，收到 {self.k}")
        if self.p < 1:
            raise NCTorusError(f"Lebesgue 指數 p 必須 ≥ 1，收到 {self.p}")

    def require_numeric(self) -> None:
        if self.p != 2:
            raise NCTorusError(f"p = {self.p} 只能作為報告標籤，數值範數只支援 p = 2")

    def h_norm(self, a: NCElement) -> float:
        self.require_numeric()
        return sobolev_h_norm(a, self.s)

    def w_norm(self, a: NCElement) -> float:
        self.require_numeric()
        return sobolev_w_norm(a, self.k)


def bracket_weight(points: np.ndarray) -> np.ndarray:
    """⟨m⟩² = 1 + 4π²|m|²"""
    return 1.0 + FOUR_PI_SQUARED * squared_modulus(points)


def sobolev_h_norm(a: NCElement, s: float) -> float:
    """‖a‖_{H^s} = (Σ ⟨m⟩^{2s} |â(m)|²)^{1/2}"""
    if s < 0:
        raise NCTorusError(f"Sobolev 階數 s 必須非負，收到 {s}")
    if a.size == 0:
        return 0.0
    weights = bracket_weight(a.points) ** s
    return math.sqrt(math.fsum(weights * np.abs(a.coeffs) ** 2))


def sobolev_w_seminorm(a: NCElement, k: int) -> float:
    """|a|_{W^{k,2}} = ‖∇^k_θ a‖_{ℓ²(I_k; L²)}"""
    return family_l2_norm(gradient_family(a, k))


def sobolev_w_norm(a: NCElement, k: int) -> float:
    """‖a‖_{W^{k,2}} = Σ_{j≤k} |a|_{W^{j,2}}"""
    if k < 0:
        raise NCTorusError(f"Sobolev 階數 k 必須非負，收到 {k}")
    return math.fsum(sobolev_w_seminorm(a, j) for j in range(k + 1))


def w_weight(points: np.ndarray, k: int, exact_order: bool = False) -> np.ndarray:
    """
    Σ_{|α|≤k} (2π)^{2|α|} |m^α|²；exact_order=True 時只取 |α| = k
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[1]
    orders = [k] if exact_order else range(k + 1)
    total = np.zeros(points.shape[0])
    for j in orders:
        for alpha in enumerate_multi_indices(n, j):
            total += (2.0 * math.pi) ** (2 * j) * alpha.monomial(points) ** 2
    return total


def sobolev_w_norm_spectral(a: NCElement, k: int) -> float:
    """Plancherel 端 (Σ_m Σ_{|α|≤k} (2π)^{2|α|} |m^α|² |â(m)|²)^{1/2} = (Σ_j |a|²_{W^{j,2}})^{1/2}"""
    if a.size == 0:
        return 0.0
    return math.sqrt(math.fsum(w_weight(a.points, k) * np.abs(a.coeffs) ** 2))


def norm_equivalence_ratio(k: int, n: int, radius: int) -> Tuple[float, float]:
    """盒上 Σ_{|α|≤k}(2π)^{2|α|}|m^α|² / ⟨m⟩^{2k} 的 (最小值, 最大值)"""
    if k < 0:
        raise NCTorusError(f"k 必須非負，收到 {k}")
    points = LatticeBox(n, radius).points()
    ratio = w_weight(points, k) / bracket_weight(points) ** k
    return float(np.min(ratio)), float(np.max(ratio))


def norm_equivalence_constants(k: int, n: int, radius: int) -> Tuple[float, float]:
    """
    c·‖a‖_{H^k} ≤ ‖a‖_{W^{k,2}} ≤ C·‖a‖_{H^k}，適用於支撐在盒內的元素

    下界：Σ_j |a|_j ≥ (Σ_j |a|_j²)^{1/2}；上界：Σ_j |a|_j ≤ (k+1)^{1/2}(Σ_j |a|_j²)^{1/2}。
    """
    low, high = norm_equivalence_ratio(k, n, radius)
    return math.sqrt(low), math.sqrt((k + 1) * high)
