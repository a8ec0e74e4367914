"""
Sobolev 代數常數

    C_{k,n} = (Σ_m ⟨m⟩^{−2k})^{1/2}          ℓ¹ 嵌入：Σ|â(m)| ≤ C_{k,n}‖a‖_{H^k}
    C_k     = 2^{k−1}                        ⟨r+s⟩^k ≤ C_k(⟨r⟩^k + ⟨s⟩^k)
    A_{k,n} = 2·C_k·C_{k,n}                  ‖ab‖_{H^k} ≤ A_{k,n}‖a‖_{H^k}‖b‖_{H^k}
"""
import math
from functools import lru_cache
from typing import Optional

import numpy as np

from calculus.sobolev import bracket_weight, sobolev_h_norm
from lattice.algebra import multiply
from lattice.errors import DivergentSeriesError, NCTorusError
from lattice.nc_element import LatticeBox, NCElement
from nonlinear.polynomial import NCPolynomial

# 部分和盒的格點數上限
MAX_BOX_POINTS = 2_000_000


def require_algebra_order(k: int, n: int) -> None:
    if int(k) != k or k < 1:
        raise NCTorusError(f"代數常數只接受正整數 k，收到 {k}")
    if not 2 * k > n:
        raise DivergentSeriesError(f"series diverges, k must exceed n/2 (k={k}, n={n})")


def default_box_radius(n: int) -> int:
    return int((MAX_BOX_POINTS ** (1.0 / n) - 1) // 2)


def embedding_tail_bound(k: int, n: int, radius: int) -> float:
    """
    Σ_{|m|_∞ > B} ⟨m⟩^{−2k} ≤ 2n·3^{n−1}(4π²)^{−k} B^{n−2k}/(2k−n)

    |m|_∞ = j 的格點數 ≤ 2n(2j+1)^{n−1} ≤ 2n·3^{n−1}j^{n−1}，且 ⟨m⟩² ≥ 4π²j²。
    """
    if radius < 1:
        raise NCTorusError(f"尾項估計需要 B ≥ 1，收到 {radius}")
    return 2 * n * 3 ** (n - 1) * (4.0 * math.pi ** 2) ** (-k) * float(radius) ** (n - 2 * k) / (2 * k - n)


@lru_cache(maxsize=64)
def _embedding_partial_sum(k: float, n: int, radius: int) -> float:
    points = LatticeBox(n, radius).points()
    terms = np.sort(bracket_weight(points) ** (-k))
    return math.fsum(terms)


def l1_embedding_constant(k: float, n: int, radius: Optional[int] = None, tail: bool = True) -> float:
    """
    C_{k,n} 的上界：盒內部分和 + 積分比較尾項；tail=False 時只回傳部分和（下界）
    """
    if not 2 * k > n:
        raise DivergentSeriesError(f"series diverges, k must exceed n/2 (k={k}, n={n})")
    radius = default_box_radius(n) if radius is None else radius
    total = _embedding_partial_sum(float(k), n, radius)
    if tail:
        total += embedding_tail_bound(k, n, radius)
    return math.sqrt(total)


def combination_constant(k: int) -> float:
    """C_k = 2^{k−1}：⟨r+s⟩ ≤ ⟨r⟩ + ⟨s⟩ 再用 (x+y)^k ≤ 2^{k−1}(x^k + y^k)"""
    if k < 1:
        raise NCTorusError(f"k 必須 ≥ 1，收到 {k}")
    return 2.0 ** (k - 1)


def algebra_constant(k: int, n: int) -> float:
    """A_{k,n} = 2·C_k·C_{k,n}"""
    require_algebra_order(k, n)
    return 2.0 * combination_constant(k) * l1_embedding_constant(k, n)


def algebra_ratio(a: NCElement, b: NCElement, k: int) -> float:
    """‖ab‖_{H^k} / (‖a‖_{H^k}‖b‖_{H^k})"""
    denominator = sobolev_h_norm(a, k) * sobolev_h_norm(b, k)
    if denominator == 0.0:
        return 0.0
    return sobolev_h_norm(multiply(a, b), k) / denominator


def embedding_ratio(a: NCElement, k: int, constant: Optional[float] = None) -> float:
    """Σ|â(m)| / (C_{k,n}‖a‖_{H^k})"""
    constant = constant if constant is not None else l1_embedding_constant(k, a.n)
    denominator = constant * sobolev_h_norm(a, k)
    if denominator == 0.0:
        return 0.0
    return float(math.fsum(np.abs(a.coeffs))) / denominator


def growth_bound(polynomial: NCPolynomial, r: float, k: int) -> float:
    """Σ A^{2ν}(Π_j‖b_j‖_{H^k}) r^ν：‖u‖_{H^k} ≤ r 時 ‖N(u)‖_{H^k} 的上界"""
    constant = algebra_constant(k, polynomial.theta.n)
    return math.fsum(constant ** (2 * m.degree) * m.coefficient_norm_product(k) * r ** m.degree
                     for m in polynomial.monomials)


def lipschitz_bound(polynomial: NCPolynomial, radius: float, k: int) -> float:
    """Σ ν·A^{2ν}(Π_j‖b_j‖_{H^k}) R^{ν−1}：半徑 R 球內 N 的 Lipschitz 常數"""
    constant = algebra_constant(k, polynomial.theta.n)
    return math.fsum(m.degree * constant ** (2 * m.degree) * m.coefficient_norm_product(k)
                     * radius ** (m.degree - 1)
                     for m in polynomial.monomials if m.degree > 0)
