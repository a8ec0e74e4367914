"""
Galerkin 截斷空間：盒 |m|_∞ ≤ N 上的係數向量

求解器內部以 (2N+1)^n 長度的複數向量表示狀態（順序與 LatticeBox.points() 相同）。
非線性項也在稠密盒上計算：每對運算元半徑預先建好扭積表（索引、cocycle 相位與
彙總矩陣），中間結果只保留之後仍可能落回盒內的模態，因此與稀疏求值後再投影一致。
"""
import math
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from calculus.derivations import FOUR_PI_SQUARED, squared_modulus
from calculus.sobolev import bracket_weight
from lattice.algebra import paired_cocycle_exponent, project, unit_phase
from lattice.errors import DimensionMismatchError
from lattice.nc_element import LatticeBox, NCElement, ThetaMatrix
from nonlinear.polynomial import NCPolynomial

PHI_SERIES_SWITCH = 1e-8
PSI_SERIES_SWITCH = 0.1


def phi1(z: np.ndarray) -> np.ndarray:
    """φ₁(z) = (1 − e^{−z})/z；z < 1e−8 時用 1 − z/2 + z²/6"""
    z = np.asarray(z, dtype=np.float64)
    small = z < PHI_SERIES_SWITCH
    safe = np.where(small, 1.0, z)
    direct = -np.expm1(-safe) / safe
    series = 1.0 - z / 2.0 + z * z / 6.0
    return np.where(small, series, direct)


def psi(z: np.ndarray) -> np.ndarray:
    """
    ψ(z) = (1 − e^{−z} − z e^{−z})/z²，線性內插右端點權重的核心

    z < 0.1 時直接公式有相消誤差，改用 Σ_j (−1)^j (j+1) z^j/(j+2)!（取 8 項）。
    """
    z = np.asarray(z, dtype=np.float64)
    small = z < PSI_SERIES_SWITCH
    safe = np.where(small, 1.0, z)
    direct = (-np.expm1(-safe) - safe * np.exp(-safe)) / (safe * safe)
    series = np.zeros_like(z)
    for j in range(7, -1, -1):
        series = series * (-z) + (j + 1) / math.factorial(j + 2)
    return np.where(small, series, direct)


def box_index(points: np.ndarray, radius: int) -> np.ndarray:
    """格點在半徑 radius 的盒中的字典序位置"""
    width = 2 * radius + 1
    index = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(points.shape[1]):
        index = index * width + (points[:, j] + radius)
    return index


def resize_box(vectors: np.ndarray, n: int, radius: int, target: int) -> np.ndarray:
    """把盒向量（最後一軸）從半徑 radius 改成 target：變小時截掉外圍，變大時補 0"""
    if radius == target:
        return vectors
    batch = vectors.shape[:-1]
    array = vectors.reshape(batch + (2 * radius + 1,) * n)
    if radius > target:
        offset = radius - target
        window = (Ellipsis,) + (slice(offset, offset + 2 * target + 1),) * n
        return np.ascontiguousarray(array[window]).reshape(batch + (-1,))
    offset = target - radius
    result = np.zeros(batch + (2 * target + 1,) * n, dtype=np.complex128)
    result[(Ellipsis,) + (slice(offset, offset + 2 * radius + 1),) * n] = array
    return result.reshape(batch + (-1,))


class TwistedProductTable:
    """
    半徑 ra 與 rb 的稠密盒之扭積，結果只保留 |m|_∞ ≤ keep

    (ab)(m) = Σ_{r+s=m} ω_θ(r, s) a(r) b(s)：先逐對相乘再以稀疏矩陣彙總到輸出格點。
    """

    def __init__(self, theta: ThetaMatrix, ra: int, rb: int, keep: int):
        left = LatticeBox(theta.n, ra).points()
        right = LatticeBox(theta.n, rb).points()
        sums = left[:, None, :] + right[None, :, :]
        left_index, right_index = np.nonzero(np.max(np.abs(sums), axis=2) <= keep)
        self.left_index = left_index
        self.right_index = right_index
        self.phase = unit_phase(paired_cocycle_exponent(theta, left[left_index], right[right_index]))
        pairs = left_index.shape[0]
        targets = box_index(sums[left_index, right_index], keep)
        self.gather = sparse.csr_matrix((np.ones(pairs), (targets, np.arange(pairs))),
                                        shape=(LatticeBox(theta.n, keep).cardinality, pairs))

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """a、b 的最後一軸為盒向量；多列時逐列相乘"""
        products = a[..., self.left_index] * b[..., self.right_index] * self.phase
        if products.ndim == 1:
            return self.gather @ products
        return (self.gather @ products.T).T


@lru_cache(maxsize=128)
def _cached_table(entries: bytes, n: int, ra: int, rb: int, keep: int) -> TwistedProductTable:
    theta = ThetaMatrix(np.frombuffer(entries, dtype=np.float64).reshape(n, n))
    return TwistedProductTable(theta, ra, rb, keep)


def product_table(theta: ThetaMatrix, ra: int, rb: int, keep: int) -> TwistedProductTable:
    return _cached_table(theta.entries.tobytes(), theta.n, ra, rb, keep)


class MonomialPlan:
    """單項式 b_0 u b_1 ··· u b_ν 在盒上的求值步驟"""

    def __init__(self, theta: ThetaMatrix, coefficients: List[NCElement], cutoff: int):
        n = theta.n
        radii = [b.support_radius for b in coefficients]
        remaining = sum(radii[1:]) + cutoff * (len(coefficients) - 1)
        radius = min(radii[0], cutoff + remaining)
        self.start = resize_box(coefficients[0].to_dense(radii[0]).reshape(-1), n, radii[0], radius)
        self.steps: List[Tuple[TwistedProductTable, Optional[TwistedProductTable], np.ndarray]] = []
        for coefficient, coefficient_radius in zip(coefficients[1:], radii[1:]):
            remaining -= cutoff
            keep = min(radius + cutoff, cutoff + remaining)
            factor_table = product_table(theta, radius, cutoff, keep)
            radius = keep
            remaining -= coefficient_radius
            keep = min(radius + coefficient_radius, cutoff + remaining)
            dense = coefficient.to_dense(coefficient_radius).reshape(-1)
            if coefficient_radius == 0 and keep == radius:
                # 右乘 c·U^0 只是純量倍
                self.steps.append((factor_table, None, dense))
            else:
                self.steps.append((factor_table, product_table(theta, radius, coefficient_radius, keep), dense))
            radius = keep
        self.n = n
        self.radius = radius
        self.cutoff = cutoff

    def __call__(self, vectors: np.ndarray) -> np.ndarray:
        result = self.start
        for factor_table, coefficient_table, dense in self.steps:
            result = factor_table(result, vectors)
            result = dense[0] * result if coefficient_table is None else coefficient_table(result, dense)
        return resize_box(np.asarray(result), self.n, self.radius, self.cutoff)


class GalerkinSpace:
    """θ 與截斷半徑 N 決定的有限維空間"""

    def __init__(self, theta: ThetaMatrix, cutoff: int):
        self.theta = theta
        self.cutoff = cutoff
        self.box = LatticeBox(theta.n, cutoff)
        self.points = self.box.points()
        self.eigenvalues = FOUR_PI_SQUARED * squared_modulus(self.points)
        self.bracket_squared = bracket_weight(self.points)
        # 原點不算外殼
        self.shell_mask = self.box.shell(self.points, width=2) & np.any(self.points != 0, axis=1)
        self._plans: Dict[int, Tuple[NCPolynomial, List[MonomialPlan]]] = {}

    @property
    def dimension(self) -> int:
        return self.points.shape[0]

    def to_vector(self, a: NCElement) -> np.ndarray:
        return project(a, self.cutoff).to_dense(self.cutoff).reshape(-1)

    def to_element(self, vector: np.ndarray) -> NCElement:
        return NCElement.from_dense(self.theta, np.asarray(vector).reshape(self.box.shape))

    def norm(self, vector: np.ndarray, s: float) -> float:
        """‖·‖_{H^s}"""
        return math.sqrt(math.fsum(self.bracket_squared ** s * np.abs(vector) ** 2))

    def norms(self, vectors: np.ndarray, s: float) -> np.ndarray:
        """多個向量（列）的 H^s 範數"""
        weights = self.bracket_squared ** s
        return np.sqrt(np.sum(weights[None, :] * np.abs(vectors) ** 2, axis=1))

    def heat(self, vector: np.ndarray, t: float) -> np.ndarray:
        return np.exp(-self.eigenvalues * t) * vector

    def _plan(self, polynomial: NCPolynomial) -> List[MonomialPlan]:
        cached = self._plans.get(id(polynomial))
        if cached is not None and cached[0] is polynomial:
            return cached[1]
        if not polynomial.theta.same_as(self.theta):
            raise DimensionMismatchError("多項式與 Galerkin 空間的 θ 不同")
        plans = [MonomialPlan(self.theta, list(monomial.coefficients), self.cutoff)
                 for monomial in polynomial.monomials]
        self._plans[id(polynomial)] = (polynomial, plans)
        return plans

    def nonlinear(self, polynomial: NCPolynomial, vectors: np.ndarray) -> np.ndarray:
        """N(u) 投影回盒；vectors 可為單一向量 (D,) 或多列 (batch, D)"""
        vectors = np.asarray(vectors, dtype=np.complex128)
        if vectors.shape[-1] != self.dimension:
            raise DimensionMismatchError(f"向量長度 {vectors.shape[-1]} 與盒維度 {self.dimension} 不一致")
        total = np.zeros(vectors.shape, dtype=np.complex128)
        for plan in self._plan(polynomial):
            total = total + plan(vectors)
        return total

    def interval_weights(self, step: float, interpolation: str) -> Tuple[np.ndarray, np.ndarray]:
        """
        ∫_0^τ e^{−λ(τ−σ)} N(σ) dσ ≈ w_left·N_i + w_right·N_{i+1}

        linear：w_left = τψ(λτ)，w_right = τ(φ₁(λτ) − ψ(λτ))
        constant：w_left = τφ₁(λτ)，w_right = 0
        """
        z = self.eigenvalues * step
        if interpolation == "constant":
            return step * phi1(z), np.zeros_like(z)
        left = step * psi(z)
        return left, step * phi1(z) - left

    def shell_mass(self, vector: np.ndarray, k: float) -> float:
        """外殼 |m|_∞ ∈ {N−1, N} 的相對 H^k 平方質量"""
        weighted = self.bracket_squared ** k * np.abs(vector) ** 2
        total = math.fsum(weighted)
        if total == 0.0:
            return 0.0
        return math.fsum(weighted[self.shell_mask]) / total


def shell_mass(a: NCElement, k: float, cutoff: int) -> float:
    space = GalerkinSpace(a.theta, cutoff)
    return space.shell_mass(space.to_vector(a), k)
