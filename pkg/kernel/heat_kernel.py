"""
歐氏與週期化高斯熱核及其導數的 L¹ 範數

    G_t(x) = (4πt)^{−n/2} e^{−|x|²/(4t)}           (R^n)
    H_t(x) = Σ_{k∈Z^n} G_t(x + k)                    (T^n = [−1/2, 1/2)^n)

∂^α G_t 與 ∂^α H_t 都能分解成一維因子的乘積，所有 L¹ 範數都由一維積分相乘得到。
一維積分在導數的零點處切段，每段被積函數不變號，交給 scipy.integrate.quad。
"""
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate, optimize, special

from calculus.derivations import derivative_symbol
from lattice.errors import InvalidTimeError, KernelTailError, NCTorusError
from lattice.nc_element import MultiIndex
from semigroup.heat_semigroup import heat_symbol

DEFAULT_TAIL_TOL = 1e-12
MIN_PERIODIZATION_RADIUS = 3


@dataclass(frozen=True)
class KernelQuery:
    """
    n：維度；alpha：導數階；t：時間
    nodes：每軸格點數下限（找根與梯形法）；half_width：歐氏積分半寬（以 √t 為單位）
    periodization_radius：週期化截斷 K（None 表示依尾項自動選取）
    """
    n: int
    alpha: MultiIndex
    t: float
    nodes: int = 2048
    half_width: float = 12.0
    periodization_radius: Optional[int] = None
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if not self.t > 0:
            raise InvalidTimeError(f"t 必須為正數，收到 {self.t}")
        if self.alpha.n != self.n:
            raise NCTorusError(f"多重指標維度 {self.alpha.n} 與 n={self.n} 不一致")
        if self.half_width < 10:
            raise NCTorusError(f"積分半寬 W 必須 ≥ 10，收到 {self.half_width}")
        if self.periodization_radius is not None and self.periodization_radius < MIN_PERIODIZATION_RADIUS:
            raise NCTorusError(f"週期化半徑 K 必須 ≥ {MIN_PERIODIZATION_RADIUS}，收到 {self.periodization_radius}")
        if self.nodes < 16:
            raise NCTorusError(f"格點數過少: {self.nodes}")


# --- 一維高斯因子 ---

def gaussian_1d_derivatives(order: int, t: float, x) -> np.ndarray:
    """
    D^0 g_t, …, D^order g_t 在 x 的值，形狀 (order+1, *x.shape)

    遞迴 D^{k+1}g = −(x/2t)·D^k g − (k/2t)·D^{k−1}g。
    """
    x = np.asarray(x, dtype=np.float64)
    values = np.empty((order + 1,) + x.shape)
    values[0] = np.exp(-x * x / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)
    if order >= 1:
        values[1] = -(x / (2.0 * t)) * values[0]
    for k in range(1, order):
        values[k + 1] = -(x / (2.0 * t)) * values[k] - (k / (2.0 * t)) * values[k - 1]
    return values


def gaussian_1d_derivative(order: int, t: float, x) -> np.ndarray:
    return gaussian_1d_derivatives(order, t, x)[order]


def gaussian_derivative_value(alpha: MultiIndex, t: float, x: Sequence[float]) -> float:
    """∂^α G_t(x) = Π_j ∂^{α_j} g_t(x_j)"""
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != alpha.n:
        raise NCTorusError(f"x 維度 {x.shape[0]} 與 α 維度 {alpha.n} 不一致")
    return float(np.prod([gaussian_1d_derivative(k, t, xj) for k, xj in zip(alpha.alpha, x)]))


def hermite_roots(order: int, t: float) -> np.ndarray:
    """D^order g_t 的零點 = 2√t·(H_order 的零點)"""
    if order == 0:
        return np.zeros(0)
    nodes, _ = special.roots_hermite(order)
    return np.sort(2.0 * math.sqrt(t) * nodes)


def _integrate_abs(func, breakpoints: Sequence[float]) -> float:
    pieces = []
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        value, _ = integrate.quad(func, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        pieces.append(abs(value))
    return math.fsum(pieces)


@lru_cache(maxsize=512)
def gaussian_1d_l1(order: int, t: float, half_width: float = 12.0) -> float:
    """∫_R |D^order g_t|，在 [−W√t, W√t] 上依零點切段積分"""
    if order == 0:
        return 1.0
    limit = half_width * math.sqrt(t)
    roots = [r for r in hermite_roots(order, t) if -limit < r < limit]
    return _integrate_abs(lambda x: float(gaussian_1d_derivative(order, t, x)), [-limit] + roots + [limit])


def gaussian_1d_l1_exact(order: int, t: float) -> float:
    """Σ 段上 |D^{order−1}g(b) − D^{order−1}g(a)|，兩端 ±∞ 處取 0"""
    if order == 0:
        return 1.0
    roots = hermite_roots(order, t)
    edges = np.concatenate([[0.0], gaussian_1d_derivative(order - 1, t, roots), [0.0]])
    return math.fsum(np.abs(np.diff(edges)))


def gaussian_l1_norm(alpha: MultiIndex, t: float, n: int, half_width: float = 12.0) -> float:
    """‖∂^α G_t‖_{L¹(R^n)}"""
    query = KernelQuery(n, alpha, t, half_width=half_width)
    return math.prod(gaussian_1d_l1(k, query.t, query.half_width) for k in alpha.alpha)


def gaussian_l1_norm_exact(alpha: MultiIndex, t: float, n: int) -> float:
    KernelQuery(n, alpha, t)
    return math.prod(gaussian_1d_l1_exact(k, t) for k in alpha.alpha)


# --- 週期化 ---

def periodization_tail_bound(t: float, order: int, radius: int) -> float:
    """
    ∫_{|y| ≥ K+1/2} |D^order g_t(y)| dy，即截斷 |j| > K 的平移項在一個週期上的 L¹ 上界

    order = 0 時為 erfc((K+1/2)/(2√t))；order ≥ 1 且 K+1/2 超過最大零點時，
    |D^order g| 在其外單調，尾積分恰為 2|D^{order−1}g(K+1/2)|。
    """
    edge = radius + 0.5
    if order == 0:
        return float(special.erfc(edge / (2.0 * math.sqrt(t))))
    roots = hermite_roots(order, t)
    if edge <= roots[-1]:
        return math.inf
    return 2.0 * abs(float(gaussian_1d_derivative(order - 1, t, edge)))


def periodization_radius(t: float, order: int, tol: float = DEFAULT_TAIL_TOL) -> int:
    """最小的 K ≥ 3 使尾項上界 ≤ tol"""
    radius = MIN_PERIODIZATION_RADIUS
    while periodization_tail_bound(t, order, radius) > tol:
        radius += 1
        if radius > 10_000:
            raise KernelTailError(f"找不到足夠的週期化半徑 (t={t}, order={order})")
    return radius


def _resolve_radius(query: KernelQuery, order: int) -> int:
    if query.periodization_radius is None:
        return periodization_radius(query.t, order, query.tail_tol)
    tail = periodization_tail_bound(query.t, order, query.periodization_radius)
    if tail > query.tail_tol:
        raise KernelTailError(
            f"K={query.periodization_radius} 的尾項上界 {tail:.3e} 超過容忍值 {query.tail_tol:.1e}，請增大 K")
    return query.periodization_radius


def periodized_1d_derivative(order: int, t: float, x, radius: int) -> np.ndarray:
    """Σ_{|j|≤K} D^order g_t(x + j)"""
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros(x.shape)
    for j in range(-radius, radius + 1):
        total = total + gaussian_1d_derivative(order, t, x + j)
    return total


def _periodic_roots(vector_func, func, grid_size: int) -> List[float]:
    grid = np.linspace(-0.5, 0.5, grid_size + 1)
    values = vector_func(grid)
    roots = []
    for i in range(grid_size):
        a, b = grid[i], grid[i + 1]
        fa, fb = values[i], values[i + 1]
        if fa == 0.0:
            roots.append(float(a))
        elif fa * fb < 0.0:
            roots.append(float(optimize.brentq(func, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    return sorted(set(r for r in roots if -0.5 < r < 0.5))


@lru_cache(maxsize=512)
def _periodized_1d_l1(order: int, t: float, radius: int, nodes: int, half_width: float) -> float:
    vector_func = lambda x: periodized_1d_derivative(order, t, x, radius)
    func = lambda x: float(vector_func(x))
    grid_size = max(nodes, int(math.ceil(40.0 / math.sqrt(t))))
    grid_size += grid_size % 2
    breakpoints = [-0.5] + _periodic_roots(vector_func, func, grid_size) + [0.5]
    spread = half_width * math.sqrt(t)
    if spread < 0.5:
        breakpoints.extend([-spread, spread])
    return _integrate_abs(func, sorted(set(breakpoints)))


def periodized_1d_l1(order: int, t: float, query: Optional[KernelQuery] = None) -> float:
    query = query or KernelQuery(1, MultiIndex((order,)), t)
    radius = _resolve_radius(query, order)
    return _periodized_1d_l1(order, t, radius, query.nodes, query.half_width)


def periodized_l1_norm(alpha: MultiIndex, t: float, n: int, query: Optional[KernelQuery] = None) -> float:
    """‖∂^α H_t‖_{L¹(T^n)}"""
    query = query or KernelQuery(n, alpha, t)
    factors = []
    for order in alpha.alpha:
        axis_query = replace(query, n=1, alpha=MultiIndex((order,)))
        factors.append(periodized_1d_l1(order, t, axis_query))
    return math.prod(factors)


def torus_symbol(alpha: MultiIndex, t: float, m: Sequence[int]) -> complex:
    """M_t^α(m) = (2πi)^{|α|} m^α e^{−4π²|m|²t}"""
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")
    point = np.asarray(m, dtype=np.int64).reshape(1, -1)
    if point.shape[1] != alpha.n:
        raise NCTorusError(f"格點維度 {point.shape[1]} 與 α 維度 {alpha.n} 不一致")
    return complex((derivative_symbol(alpha, point) * heat_symbol(point, t))[0])


def kernel_fourier_coefficient(alpha: MultiIndex, t: float, m: Sequence[int], grid: int = 2048,
                               query: Optional[KernelQuery] = None) -> complex:
    """
    ∫_{T^n} ∂^α H_t(x) e^{−2πi m·x} dx，每軸以均勻格點梯形法（週期函數時為譜精度）
    """
    query = query or KernelQuery(alpha.n, alpha, t)
    m = [int(x) for x in m]
    x = np.arange(grid) / grid - 0.5
    value = 1.0 + 0j
    for order, frequency in zip(alpha.alpha, m):
        radius = _resolve_radius(replace(query, n=1, alpha=MultiIndex((order,))), order)
        samples = periodized_1d_derivative(order, t, x, radius)
        value *= np.mean(samples * np.exp(-2j * math.pi * frequency * x))
    return complex(value)
