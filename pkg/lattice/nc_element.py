"""
非交換環面 T^n_θ 上元素的資料結構

元素以有限支撐的 Fourier 係數表示（Galerkin 截斷）：
    a = Σ_m c_m U^m,   U^m = U_1^{m_1} ··· U_n^{m_n}
支撐點以 (K, n) 整數陣列依字典序排序存放，係數以 (K,) 複數陣列存放。
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from lattice.errors import DimensionMismatchError, NCTorusError


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    """實反對稱 n×n 變形參數 θ"""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 1:
            raise DimensionMismatchError(f"θ 必須是 n×n 方陣 (n ≥ 1)，收到形狀 {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise NCTorusError("θ 含有非有限值")
        if np.any(np.diag(entries) != 0.0):
            raise NCTorusError("θ 的對角線必須為 0")
        if not np.array_equal(entries, -entries.T):
            raise NCTorusError("θ 必須反對稱 (θ_jk = -θ_kj)")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def lower(self) -> np.ndarray:
        """嚴格下三角部分 T[k, j] = θ_kj (k > j)，cocycle 的雙線性型"""
        return np.tril(self.entries, -1)

    @classmethod
    def zero(cls, n: int) -> "ThetaMatrix":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_lower(cls, n: int, values: Dict[Tuple[int, int], float]) -> "ThetaMatrix":
        """由 {(k, j): θ_kj}（k > j，0-based）建立，保證精確反對稱"""
        entries = np.zeros((n, n))
        for (k, j), value in values.items():
            if not k > j:
                raise NCTorusError(f"from_lower 只接受 k > j 的索引，收到 {(k, j)}")
            entries[k, j] = value
            entries[j, k] = -value
        return cls(entries)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "ThetaMatrix":
        return cls(np.array(rows, dtype=np.float64))

    @classmethod
    def golden(cls, n: int) -> "ThetaMatrix":
        """黃金比例反對稱矩陣：θ_kj = frac((k - j)·φ⁻¹)，k > j"""
        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        values = {(k, j): math.fmod((k - j) * inv_phi, 1.0) for k in range(n) for j in range(k)}
        return cls.from_lower(n, values)

    def same_as(self, other: "ThetaMatrix") -> bool:
        return self is other or (self.n == other.n and np.array_equal(self.entries, other.entries))

    def to_rows(self) -> List[List[float]]:
        return self.entries.tolist()


@dataclass(frozen=True)
class LatticeBox:
    """格點盒 {m ∈ Z^n : max_j |m_j| ≤ N}"""
    n: int
    radius: int

    def __post_init__(self):
        if self.n < 1 or self.radius < 0:
            raise NCTorusError(f"LatticeBox 需要 n ≥ 1 且 N ≥ 0，收到 n={self.n}, N={self.radius}")

    @property
    def cardinality(self) -> int:
        return (2 * self.radius + 1) ** self.n

    @property
    def shape(self) -> Tuple[int, ...]:
        return (2 * self.radius + 1,) * self.n

    def points(self) -> np.ndarray:
        """依字典序列出所有格點，形狀 (cardinality, n)"""
        axis = np.arange(-self.radius, self.radius + 1, dtype=np.int64)
        grids = np.meshgrid(*([axis] * self.n), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64).reshape(-1, self.n)
        return np.max(np.abs(points), axis=1, initial=0) <= self.radius

    def shell(self, points: np.ndarray, width: int = 2) -> np.ndarray:
        """外殼 |m|_∞ ∈ {N-width+1, …, N} 的遮罩"""
        sup = np.max(np.abs(np.asarray(points).reshape(-1, self.n)), axis=1, initial=0)
        return (sup > self.radius - width) & (sup <= self.radius)


@dataclass(frozen=True)
class MultiIndex:
    """多重指標 α ∈ N_0^n"""
    alpha: Tuple[int, ...]

    def __post_init__(self):
        alpha = tuple(int(a) for a in self.alpha)
        if len(alpha) == 0:
            raise NCTorusError("多重指標至少需要一個分量")
        if any(a < 0 for a in alpha):
            raise NCTorusError(f"多重指標分量必須為非負整數，收到 {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self) -> int:
        return len(self.alpha)

    @property
    def order(self) -> int:
        """|α| = α_1 + … + α_n"""
        return sum(self.alpha)

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n)

    @classmethod
    def unit(cls, n: int, j: int, power: int = 1) -> "MultiIndex":
        alpha = [0] * n
        alpha[j] = power
        return cls(tuple(alpha))

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if self.n != other.n:
            raise DimensionMismatchError(f"多重指標維度不同: {self.n} vs {other.n}")
        return MultiIndex(tuple(a + b for a, b in zip(self.alpha, other.alpha)))

    def monomial(self, points: np.ndarray) -> np.ndarray:
        """m^α 對每個格點求值（浮點數，避免大指數整數溢位）"""
        points = np.asarray(points, dtype=np.float64).reshape(-1, self.n)
        if self.order == 0:
            return np.ones(points.shape[0])
        return np.prod(points ** np.array(self.alpha, dtype=np.float64), axis=1)


def enumerate_multi_indices(n: int, k: int) -> List[MultiIndex]:
    """I_k = {α : |α| = k}，字典序由大到小排列第一分量"""
    if n < 1 or k < 0:
        raise NCTorusError(f"enumerate_multi_indices 需要 n ≥ 1, k ≥ 0，收到 n={n}, k={k}")
    if n == 1:
        return [MultiIndex((k,))]
    indices = []
    for first in range(k, -1, -1):
        for rest in enumerate_multi_indices(n - 1, k - first):
            indices.append(MultiIndex((first,) + rest.alpha))
    return indices


def count_multi_indices(n: int, k: int) -> int:
    """N_{k,n} = binom(n+k-1, k)"""
    return math.comb(n + k - 1, k)


def encode_points(points: np.ndarray, radius: int) -> np.ndarray:
    """把格點編碼成單一整數鍵；鍵的大小順序與字典序一致"""
    base = 2 * radius + 1
    keys = np.zeros(points.shape[0], dtype=np.int64)
    for j in range(points.shape[1]):
        keys = keys * base + (points[:, j] + radius)
    return keys


def decode_points(keys: np.ndarray, radius: int, n: int) -> np.ndarray:
    base = 2 * radius + 1
    points = np.empty((keys.shape[0], n), dtype=np.int64)
    rest = keys.copy()
    for j in range(n - 1, -1, -1):
        points[:, j] = rest % base - radius
        rest //= base
    return points


@dataclass(frozen=True, eq=False)
class NCElement:
    """
    A^∞_θ 元素的 Galerkin 截斷

    建構後不可變；請用 from_arrays / monomial / from_dict 等工廠方法，
    它們會合併重複格點、依字典序排序並移除恰為 0 的係數。
    """
    theta: ThetaMatrix
    points: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.int64)
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if points.ndim != 2 or points.shape[1] != self.theta.n:
            raise DimensionMismatchError(
                f"格點維度 {points.shape} 與 θ 的維度 n={self.theta.n} 不一致")
        if coeffs.shape != (points.shape[0],):
            raise NCTorusError("係數個數必須等於支撐點個數")
        if not np.all(np.isfinite(coeffs)):
            raise NCTorusError("係數含有 NaN 或 Inf")
        points.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "coeffs", coeffs)

    # --- 工廠方法 ---

    @classmethod
    def from_arrays(cls, theta: ThetaMatrix, points, coeffs) -> "NCElement":
        points = np.asarray(points, dtype=np.int64).reshape(-1, theta.n)
        coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(-1)
        if points.shape[0] != coeffs.shape[0]:
            raise NCTorusError("係數個數必須等於支撐點個數")
        if points.shape[0] == 0:
            return cls.zero(theta)
        radius = int(np.max(np.abs(points)))
        keys = encode_points(points, radius)
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        inverse = inverse.reshape(-1)
        # bincount 依固定順序累加，重複執行位元穩定
        real = np.bincount(inverse, weights=coeffs.real, minlength=unique_keys.shape[0])
        imag = np.bincount(inverse, weights=coeffs.imag, minlength=unique_keys.shape[0])
        merged = real + 1j * imag
        keep = merged != 0
        return cls(theta, decode_points(unique_keys[keep], radius, theta.n), merged[keep])

    @classmethod
    def zero(cls, theta: ThetaMatrix) -> "NCElement":
        return cls(theta, np.zeros((0, theta.n), dtype=np.int64), np.zeros(0, dtype=np.complex128))

    @classmethod
    def monomial(cls, theta: ThetaMatrix, m: Sequence[int], value: complex = 1.0) -> "NCElement":
        """value · U^m"""
        m = np.asarray(m, dtype=np.int64).reshape(1, -1)
        if m.shape[1] != theta.n:
            raise DimensionMismatchError(f"格點 {m.ravel().tolist()} 與 n={theta.n} 不一致")
        return cls.from_arrays(theta, m, [value])

    @classmethod
    def identity(cls, theta: ThetaMatrix, value: complex = 1.0) -> "NCElement":
        return cls.monomial(theta, (0,) * theta.n, value)

    @classmethod
    def from_dict(cls, theta: ThetaMatrix, coefficients: Dict[Tuple[int, ...], complex]) -> "NCElement":
        if not coefficients:
            return cls.zero(theta)
        points = np.array(list(coefficients.keys()), dtype=np.int64)
        return cls.from_arrays(theta, points, list(coefficients.values()))

    @classmethod
    def from_dense(cls, theta: ThetaMatrix, array: np.ndarray) -> "NCElement":
        """稠密後端 → 稀疏表示；array 形狀為 (2N+1,)^n，索引 m + N"""
        array = np.asarray(array, dtype=np.complex128)
        if array.ndim != theta.n or len(set(array.shape)) != 1 or array.shape[0] % 2 != 1:
            raise DimensionMismatchError(f"稠密陣列形狀 {array.shape} 與 n={theta.n} 不相容")
        box = LatticeBox(theta.n, (array.shape[0] - 1) // 2)
        return cls.from_arrays(theta, box.points(), array.reshape(-1))

    # --- 查詢 ---

    @property
    def n(self) -> int:
        return self.theta.n

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def support_radius(self) -> int:
        if self.size == 0:
            return 0
        return int(np.max(np.abs(self.points)))

    def coefficient(self, m: Sequence[int]) -> complex:
        m = np.asarray(m, dtype=np.int64).reshape(-1)
        if m.shape[0] != self.n:
            raise DimensionMismatchError(f"格點 {m.tolist()} 與 n={self.n} 不一致")
        hit = np.nonzero(np.all(self.points == m, axis=1))[0]
        return complex(self.coeffs[hit[0]]) if hit.size else 0j

    def as_dict(self) -> Dict[Tuple[int, ...], complex]:
        return {tuple(int(x) for x in p): complex(c) for p, c in zip(self.points, self.coeffs)}

    def to_dense(self, radius: Optional[int] = None) -> np.ndarray:
        radius = self.support_radius if radius is None else radius
        if self.support_radius > radius:
            raise NCTorusError(f"支撐半徑 {self.support_radius} 超出稠密盒半徑 {radius}")
        array = np.zeros((2 * radius + 1,) * self.n, dtype=np.complex128)
        if self.size:
            array[tuple((self.points + radius).T)] = self.coeffs
        return array

    def check_compatible(self, other: "NCElement") -> None:
        if not self.theta.same_as(other.theta):
            raise DimensionMismatchError("兩個元素的 θ 不同，無法進行二元運算")

    def max_difference(self, other: "NCElement") -> float:
        """兩元素在支撐聯集上的最大係數差"""
        self.check_compatible(other)
        diff = NCElement.from_arrays(
            self.theta, np.concatenate([self.points, other.points]),
            np.concatenate([self.coeffs, -other.coeffs]))
        return float(np.max(np.abs(diff.coeffs), initial=0.0))

    def allclose(self, other: "NCElement", atol: float = 1e-12) -> bool:
        return self.max_difference(other) <= atol

    # --- 運算子：細節在 lattice.algebra ---

    def __add__(self, other: "NCElement") -> "NCElement":
        from lattice.algebra import add
        return add(self, other)

    def __sub__(self, other: "NCElement") -> "NCElement":
        from lattice.algebra import add, scale
        return add(self, scale(other, -1.0))

    def __neg__(self) -> "NCElement":
        from lattice.algebra import scale
        return scale(self, -1.0)

    def __mul__(self, other):
        from lattice.algebra import multiply, scale
        if isinstance(other, NCElement):
            return multiply(self, other)
        return scale(self, other)

    def __rmul__(self, other):
        from lattice.algebra import scale
        return scale(self, other)

    def __repr__(self) -> str:
        return f"NCElement(n={self.n}, size={self.size}, radius={self.support_radius})"
