"""
A^∞_θ 的 *-代數結構：cocycle、扭積（twisted convolution）、伴隨、跡與範數

約定：U^m = U_1^{m_1} ··· U_n^{m_n}，交換關係 U_k U_j = e^{2πiθ_kj} U_j U_k。
在此約定下 U^r U^s = ω_θ(r, s) U^{r+s}，
    ω_θ(r, s) = exp(2πi Σ_{k>j} θ_kj r_k s_j)。
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lattice.errors import DimensionMismatchError, NCTorusError, SupportOverflowError
from lattice.nc_element import LatticeBox, NCElement, ThetaMatrix

PRODUCT_POLICIES = ("grow", "project", "reject")
PRODUCT_BACKENDS = ("sparse", "dense")


def unit_phase(x: np.ndarray) -> np.ndarray:
    """e^{2πix}，引數先取 mod 1 再以 (cos, sin) 求值，大指標時 |·| 仍維持機器精度"""
    x = np.asarray(x, dtype=np.float64)
    reduced = x - np.floor(x)
    angle = 2.0 * math.pi * reduced
    return np.cos(angle) + 1j * np.sin(angle)


def cocycle_exponent(theta: ThetaMatrix, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """
    Σ_{k>j} θ_kj r_k s_j（mod 1），r 形狀 (A, n)、s 形狀 (B, n)，回傳 (A, B)

    每一對 (k, j) 的整數乘積先精確算出，乘上 θ_kj 後立即取小數部分。
    """
    r = np.asarray(r, dtype=np.int64).reshape(-1, theta.n)
    s = np.asarray(s, dtype=np.int64).reshape(-1, theta.n)
    exponent = np.zeros((r.shape[0], s.shape[0]))
    entries = theta.entries
    for k in range(theta.n):
        for j in range(k):
            value = entries[k, j]
            if value == 0.0:
                continue
            term = value * np.multiply.outer(r[:, k], s[:, j]).astype(np.float64)
            exponent += term - np.floor(term)
    return exponent - np.floor(exponent)


def paired_cocycle_exponent(theta: ThetaMatrix, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    """逐列配對版本：r, s 形狀皆為 (K, n)，回傳 (K,)"""
    r = np.asarray(r, dtype=np.int64).reshape(-1, theta.n)
    s = np.asarray(s, dtype=np.int64).reshape(-1, theta.n)
    exponent = np.zeros(r.shape[0])
    for k in range(theta.n):
        for j in range(k):
            value = theta.entries[k, j]
            if value == 0.0:
                continue
            term = value * (r[:, k] * s[:, j]).astype(np.float64)
            exponent += term - np.floor(term)
    return exponent - np.floor(exponent)


def cocycle_matrix(theta: ThetaMatrix, r: np.ndarray, s: np.ndarray) -> np.ndarray:
    return unit_phase(cocycle_exponent(theta, r, s))


def cocycle(theta: ThetaMatrix, r: Sequence[int], s: Sequence[int]) -> complex:
    """ω_θ(r, s)"""
    r = np.asarray(r, dtype=np.int64).reshape(-1)
    s = np.asarray(s, dtype=np.int64).reshape(-1)
    if r.shape[0] != theta.n or s.shape[0] != theta.n:
        raise DimensionMismatchError(
            f"格點維度 ({r.shape[0]}, {s.shape[0]}) 與 θ 的維度 n={theta.n} 不一致")
    return complex(cocycle_matrix(theta, r, s)[0, 0])


def _candidate_radius(a: NCElement, b: NCElement) -> int:
    """{r+s} 的精確 |·|_∞ 上界：逐座標取 max(|max r_j + max s_j|, |min r_j + min s_j|)"""
    if a.size == 0 or b.size == 0:
        return 0
    high = a.points.max(axis=0) + b.points.max(axis=0)
    low = a.points.min(axis=0) + b.points.min(axis=0)
    return int(np.max(np.maximum(np.abs(high), np.abs(low))))


def _multiply_sparse(a: NCElement, b: NCElement, keep_radius: Optional[int]) -> NCElement:
    phases = cocycle_matrix(a.theta, a.points, b.points)
    weights = (a.coeffs[:, None] * b.coeffs[None, :]) * phases
    points = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, a.n)
    weights = weights.reshape(-1)
    if keep_radius is not None:
        inside = np.max(np.abs(points), axis=1) <= keep_radius
        points, weights = points[inside], weights[inside]
    return NCElement.from_arrays(a.theta, points, weights)


def _multiply_dense(a: NCElement, b: NCElement, keep_radius: Optional[int]) -> NCElement:
    radius_a, radius_b = a.support_radius, b.support_radius
    dense_b = b.to_dense(radius_b)
    box_b = LatticeBox(a.n, radius_b).points()
    result = np.zeros((2 * (radius_a + radius_b) + 1,) * a.n, dtype=np.complex128)
    for r, c_r in zip(a.points, a.coeffs):
        phase = cocycle_matrix(a.theta, r, box_b).reshape(dense_b.shape)
        window = tuple(slice(int(x) + radius_a, int(x) + radius_a + 2 * radius_b + 1) for x in r)
        result[window] += c_r * phase * dense_b
    product = NCElement.from_dense(a.theta, result)
    return project(product, keep_radius) if keep_radius is not None else product


def multiply(a: NCElement, b: NCElement, policy: str = "grow", radius: Optional[int] = None,
             backend: str = "sparse") -> NCElement:
    """
    扭積 (ab)^(m) = Σ_{r+s=m} ω_θ(r, s) â(r) b̂(s)

    policy:
        grow    支撐自由成長
        project 結果投影回 |m|_∞ ≤ radius（Galerkin 投影）
        reject  候選支撐超出 radius 即拋出 SupportOverflowError
    """
    a.check_compatible(b)
    if policy not in PRODUCT_POLICIES:
        raise NCTorusError(f"未知的乘積策略 '{policy}'，可用: {PRODUCT_POLICIES}")
    if backend not in PRODUCT_BACKENDS:
        raise NCTorusError(f"未知的乘積後端 '{backend}'，可用: {PRODUCT_BACKENDS}")
    if policy != "grow" and (radius is None or radius < 0):
        raise NCTorusError(f"策略 '{policy}' 需要非負的最大半徑")

    if a.size == 0 or b.size == 0:
        return NCElement.zero(a.theta)

    if policy == "reject":
        candidate = _candidate_radius(a, b)
        if candidate > radius:
            raise SupportOverflowError(f"乘積支撐半徑 {candidate} 超出上限 {radius}")

    keep_radius = radius if policy == "project" else None
    if backend == "dense":
        return _multiply_dense(a, b, keep_radius)
    return _multiply_sparse(a, b, keep_radius)


def adjoint(a: NCElement) -> NCElement:
    """(a*)^(p) = conj(â(−p)) · conj(ω_θ(−p, p))"""
    if a.size == 0:
        return a
    reflected = -a.points
    # p = −m：ω_θ(−p, p) = ω_θ(m, −m)
    phases = unit_phase(paired_cocycle_exponent(a.theta, a.points, reflected))
    return NCElement.from_arrays(a.theta, reflected, np.conj(a.coeffs) * np.conj(phases))


def trace(a: NCElement) -> complex:
    """τ(a) = â(0)"""
    return a.coefficient((0,) * a.n)


def fourier_coefficient(a: NCElement, m: Sequence[int]) -> complex:
    """â(m) = τ((U^m)* a)，經由 adjoint、multiply 與 trace 計算"""
    unit = NCElement.monomial(a.theta, m)
    return trace(multiply(adjoint(unit), a))


def l2_norm(a: NCElement) -> float:
    """‖a‖_{L²} = (Σ_m |â(m)|²)^{1/2}"""
    return float(math.sqrt(math.fsum(np.abs(a.coeffs) ** 2)))


def linf_upper(a: NCElement) -> float:
    """Σ_m |â(m)|，‖a‖_{L^∞} 的上界"""
    return float(math.fsum(np.abs(a.coeffs)))


def add(a: NCElement, b: NCElement) -> NCElement:
    a.check_compatible(b)
    return NCElement.from_arrays(
        a.theta, np.concatenate([a.points, b.points]), np.concatenate([a.coeffs, b.coeffs]))


def scale(a: NCElement, value: complex) -> NCElement:
    return NCElement.from_arrays(a.theta, a.points, a.coeffs * complex(value))


def linear_combination(terms: Sequence[Tuple[complex, NCElement]]) -> NCElement:
    """Σ λ_i a_i，依清單順序合併"""
    if not terms:
        raise NCTorusError("linear_combination 至少需要一項")
    theta = terms[0][1].theta
    for _, element in terms:
        terms[0][1].check_compatible(element)
    points = np.concatenate([element.points for _, element in terms])
    coeffs = np.concatenate([element.coeffs * complex(value) for value, element in terms])
    return NCElement.from_arrays(theta, points, coeffs)


def project(a: NCElement, radius: int) -> NCElement:
    """Galerkin 投影到 |m|_∞ ≤ radius"""
    if radius < 0:
        raise NCTorusError(f"投影半徑必須非負，收到 {radius}")
    if a.support_radius <= radius:
        return a
    inside = np.max(np.abs(a.points), axis=1) <= radius
    return NCElement(a.theta, a.points[inside], a.coeffs[inside])


def random_element(theta: ThetaMatrix, radius: int, sigma: float = 2.0, seed: int = 0,
                   amplitude: float = 1.0) -> NCElement:
    """
    盒 |m|_∞ ≤ radius 上的隨機元素：|c_m| = amplitude·(1+|m|²)^{−σ/2}，相位由種子決定
    """
    rng = np.random.default_rng(seed)
    points = LatticeBox(theta.n, radius).points()
    magnitudes = amplitude * (1.0 + np.sum(points.astype(np.float64) ** 2, axis=1)) ** (-sigma / 2.0)
    phases = unit_phase(rng.random(points.shape[0]))
    return NCElement.from_arrays(theta, points, magnitudes * phases)


def word_of(m: Sequence[int]) -> List[Tuple[int, int]]:
    """U^m 的生成元字：[(j, ±1), ...]，依 j 由小到大"""
    word = []
    for j, power in enumerate(m):
        sign = 1 if power > 0 else -1
        word.extend([(j, sign)] * abs(int(power)))
    return word


def symbolic_reorder(theta: ThetaMatrix, word: Sequence[Tuple[int, int]]) -> Tuple[complex, Tuple[int, ...]]:
    """
    以交換關係把生成元字化為正規序 U_1^{e_1} ··· U_n^{e_n}

    每次相鄰交換 U_k^a U_j^b → e^{2πiθ_kj ab} U_j^b U_k^a（k > j）。
    回傳 (累積相位, 指數 (e_1, …, e_n))。
    """
    letters = [(int(j), int(e)) for j, e in word]
    for j, e in letters:
        if not 0 <= j < theta.n or e not in (1, -1):
            raise NCTorusError(f"生成元字含非法字母 {(j, e)}")
    angles = []
    swapped = True
    while swapped:
        swapped = False
        for i in range(len(letters) - 1):
            (k, a), (j, b) = letters[i], letters[i + 1]
            if k > j:
                angles.append(theta.entries[k, j] * a * b)
                letters[i], letters[i + 1] = letters[i + 1], letters[i]
                swapped = True
    exponents = [0] * theta.n
    for j, e in letters:
        exponents[j] += e
    phase = complex(unit_phase(np.array(math.fsum(angles)))) if angles else 1.0 + 0j
    return phase, tuple(exponents)
