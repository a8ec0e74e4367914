"""
熱半群 P_t = e^{−tL} 與混合算子 δ^α L^ℓ P_t

兩者都是 Fourier 對角乘子：
    P_t U^m            = e^{−4π²|m|²t} U^m
    δ^α L^ℓ P_t U^m    = (2πi)^{|α|} (4π²|m|²)^ℓ m^α e^{−4π²|m|²t} U^m
在 L² 上對角乘子的算子範數（亦即 cb 範數）等於 sup_m |symbol(m)|。
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from calculus.derivations import (FOUR_PI_SQUARED, derivative_symbol, laplacian_symbol,
                                  squared_modulus)
from lattice.errors import InvalidTimeError, NCTorusError, WitnessConstructionError
from lattice.nc_element import MultiIndex, NCElement, ThetaMatrix

# 證書失敗時搜尋半徑加倍的上限
MAX_SEARCH_POINTS = 20_000_000


def _require_positive_time(t: float) -> None:
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")


def heat_symbol(points: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-FOUR_PI_SQUARED * squared_modulus(points) * t)


@dataclass(frozen=True)
class MultiplierSymbol:
    """kind = 'heat' 或 'mixed'；mixed 需要 α 與 ℓ"""
    kind: str
    t: float
    alpha: Optional[MultiIndex] = None
    ell: int = 0

    def __post_init__(self):
        if self.kind not in ("heat", "mixed"):
            raise NCTorusError(f"未知的乘子種類 '{self.kind}'")
        if self.t < 0:
            raise InvalidTimeError(f"t 必須非負，收到 {self.t}")
        if self.kind == "mixed" and self.alpha is None:
            raise NCTorusError("mixed 乘子需要多重指標 α")
        if self.ell < 0:
            raise NCTorusError(f"ℓ 必須非負，收到 {self.ell}")

    @classmethod
    def heat(cls, t: float) -> "MultiplierSymbol":
        return cls("heat", t)

    @classmethod
    def mixed(cls, alpha: MultiIndex, ell: int, t: float) -> "MultiplierSymbol":
        return cls("mixed", t, alpha, ell)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        values = heat_symbol(points, self.t).astype(np.complex128)
        if self.kind == "heat":
            return values
        if self.ell > 0:
            values = values * laplacian_symbol(points) ** self.ell
        if self.alpha.order > 0:
            values = values * derivative_symbol(self.alpha, points)
        return values

    def modulus(self, points: np.ndarray) -> np.ndarray:
        return np.abs(self.evaluate(points))


def heat_apply(a: NCElement, t: float) -> NCElement:
    """P_t a；t = 0 為恆等"""
    if t < 0:
        raise InvalidTimeError(f"heat_apply 的 t 必須非負，收到 {t}")
    if t == 0:
        return a
    return NCElement.from_arrays(a.theta, a.points, a.coeffs * heat_symbol(a.points, t))


def mixed_apply(a: NCElement, alpha: MultiIndex, ell: int, t: float) -> NCElement:
    """
    δ^α L^ℓ P_t a

    係數依 P_t → L^ℓ → δ^α 的順序逐次相乘，與組合路徑的浮點運算完全相同。
    """
    if ell < 0:
        raise NCTorusError(f"ℓ 必須非負，收到 {ell}")
    image = heat_apply(a, t)
    coeffs = image.coeffs
    if ell > 0:
        coeffs = coeffs * laplacian_symbol(image.points) ** ell
    if alpha.order > 0:
        coeffs = coeffs * derivative_symbol(alpha, image.points)
    return NCElement.from_arrays(a.theta, image.points, coeffs)


def time_derivative(a: NCElement, ell: int, t: float) -> NCElement:
    """∂_t^ℓ P_t a = (−L)^ℓ P_t a"""
    image = mixed_apply(a, MultiIndex.zero(a.n), ell, t)
    if ell % 2 == 0:
        return image
    return NCElement.from_arrays(a.theta, image.points, -image.coeffs)


def radial_profile(x: float, alpha: MultiIndex, ell: int, t: float) -> float:
    """(2π)^{|α|} x^{|α|} (4π²x²)^ℓ e^{−4π²x²t}，|m| = x 時 |symbol| 的徑向上界"""
    order = alpha.order
    return (2.0 * math.pi) ** order * x ** order * (FOUR_PI_SQUARED * x * x) ** ell \
        * math.exp(-FOUR_PI_SQUARED * x * x * t)


def radial_profile_slope_sign(x: float, alpha: MultiIndex, ell: int, t: float) -> float:
    """d/dx log profile = (2ℓ+|α|)/x − 8π²xt；負值表示在 x 之後嚴格遞減"""
    return (2 * ell + alpha.order) / x - 2.0 * FOUR_PI_SQUARED * x * t


def initial_search_radius(alpha: MultiIndex, ell: int, t: float) -> int:
    """R* = ceil(2·sqrt((ℓ + |α|/2)/(4π²t)) + 2)"""
    return int(math.ceil(2.0 * math.sqrt((ell + alpha.order / 2.0) / (FOUR_PI_SQUARED * t)) + 2.0))


@dataclass
class OperatorNormResult:
    value: float
    argmax: Tuple[int, ...]
    search_radius: int
    certified: bool = field(default=True)


def _last_coordinate_candidates(prefix: np.ndarray, alpha: MultiIndex, ell: int, t: float) -> np.ndarray:
    """
    固定前 n−1 個座標 m'，最後一個座標 x ≥ 0 的最佳整數候選 ⌊x*⌋、⌊x*⌋+1

    x ↦ x^{α_n} (|m'|²+x²)^ℓ e^{−4π²(|m'|²+x²)t} 在 x > 0 上單峰；
    u = x*² 是 −8π²t·u² + (α_n + 2ℓ − 8π²t|m'|²)·u + α_n|m'|² = 0 的非負根。
    """
    c0 = np.sum(prefix.astype(np.float64) ** 2, axis=1)
    last = alpha.alpha[-1]
    a = 2.0 * FOUR_PI_SQUARED * t
    b = last + 2 * ell - a * c0
    u = np.maximum((b + np.sqrt(b * b + 4.0 * a * last * c0)) / (2.0 * a), 0.0)
    low = np.floor(np.sqrt(u)).astype(np.int64)
    return np.concatenate([np.column_stack([prefix, low]), np.column_stack([prefix, low + 1])])


def l2_operator_norm_search(alpha: MultiIndex, ell: int, t: float, n: int) -> OperatorNormResult:
    """
    sup_m |(2π)^{|α|} m^α (4π²|m|²)^ℓ e^{−4π²|m|²t}| 的精確搜尋

    |symbol| 只依 |m_j|，故只看非負卦限；前 n−1 個座標在 [0, R*] 內窮舉，最後一個座標取
    單峰函數的兩個整數候選。前綴超出 R* 的點 |m| > R*，若徑向輪廓在 R* 處已遞減且不超過
    已找到的最大值，搜尋即完整，否則 R* 加倍重搜。
    """
    _require_positive_time(t)
    if alpha.n != n:
        raise NCTorusError(f"多重指標維度 {alpha.n} 與 n={n} 不一致")
    if alpha.order == 0 and ell == 0:
        return OperatorNormResult(1.0, (0,) * n, 0)

    symbol = MultiplierSymbol.mixed(alpha, ell, t)
    radius = initial_search_radius(alpha, ell, t)
    while True:
        if (radius + 1) ** (n - 1) > MAX_SEARCH_POINTS:
            raise NCTorusError(f"搜尋盒過大 (R*={radius}, n={n})，t={t} 太小")
        prefix = np.zeros((1, 0), dtype=np.int64)
        if n > 1:
            axes = [np.arange(radius + 1, dtype=np.int64)] * (n - 1)
            prefix = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
        points = _last_coordinate_candidates(prefix, alpha, ell, t)
        values = symbol.modulus(points)
        best = int(np.argmax(values))
        value = float(values[best])
        slope = radial_profile_slope_sign(float(radius), alpha, ell, t)
        if slope < 0 and radial_profile(float(radius), alpha, ell, t) <= value:
            return OperatorNormResult(value, tuple(int(x) for x in points[best]), radius)
        radius *= 2


def l2_operator_norm(alpha: MultiIndex, ell: int, t: float, n: int) -> float:
    """‖δ^α L^ℓ P_t‖_{L²→L²}（= cb 範數）"""
    return l2_operator_norm_search(alpha, ell, t, n).value


def cb_norm_bracket(alpha: MultiIndex, t: float, n: int) -> Tuple[float, float]:
    """
    (sup|M_t^α|, ‖∂^α H_t‖_{L¹(T^n)})：下界為 L² 精確值，上界為週期化核的 L¹ 範數
    """
    from kernel.heat_kernel import periodized_l1_norm

    lower = l2_operator_norm(alpha, 0, t, n)
    upper = periodized_l1_norm(alpha, t, n)
    return lower, upper


def witness_index(t: float, n: int) -> int:
    """k_t = ⌊1/√(8π²nt)⌋"""
    _require_positive_time(t)
    return int(math.floor(1.0 / math.sqrt(2.0 * FOUR_PI_SQUARED * n * t)))


def sharpness_witness(alpha: MultiIndex, ell: int, t: float, n: int,
                      theta: Optional[ThetaMatrix] = None) -> Tuple[NCElement, float]:
    """
    單模態見證 a_t = U^{m_t}，m_t = (k_t, …, k_t)

    value = ‖δ^α L^ℓ P_t a_t‖_{L²} = (2π)^{|α|} (4π²nk_t²)^ℓ k_t^{|α|} e^{−4π²nk_t²t}
    """
    k_t = witness_index(t, n)
    if k_t == 0:
        raise WitnessConstructionError(f"t too large for witness construction (t={t}, n={n})")
    theta = theta or ThetaMatrix.zero(n)
    witness = NCElement.monomial(theta, (k_t,) * n)
    value = (2.0 * math.pi) ** alpha.order * (FOUR_PI_SQUARED * n * k_t ** 2) ** ell \
        * float(k_t) ** alpha.order * math.exp(-FOUR_PI_SQUARED * n * k_t ** 2 * t)
    return witness, value
