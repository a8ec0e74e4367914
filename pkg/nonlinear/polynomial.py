"""
非交換多項式

    N(u) = Σ_ν Σ_μ b_{ν,μ,0} u b_{ν,μ,1} u ··· u b_{ν,μ,ν}

每個單項式是 ν+1 個係數 b_0, …, b_ν 的清單；ν = 0 時就是常數項 b_0。
"""
import json
import os
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

import numpy as np

from calculus.sobolev import sobolev_h_norm
from lattice.algebra import linear_combination, multiply, project
from lattice.errors import ConfigError, DimensionMismatchError, NCTorusError
from lattice.nc_element import NCElement, ThetaMatrix
from lattice.serialization import read_element


@dataclass(frozen=True)
class Monomial:
    coefficients: List[NCElement]

    def __post_init__(self):
        if not self.coefficients:
            raise NCTorusError("單項式至少需要一個係數 b_0")
        first = self.coefficients[0]
        for coefficient in self.coefficients[1:]:
            if not first.theta.same_as(coefficient.theta):
                raise DimensionMismatchError("單項式的係數必須共用同一個 θ")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def theta(self) -> ThetaMatrix:
        return self.coefficients[0].theta

    def coefficient_norm_product(self, k: float) -> float:
        """Π_j ‖b_j‖_{H^k}"""
        return float(np.prod([sobolev_h_norm(b, k) for b in self.coefficients]))

    def evaluate(self, u: NCElement, cutoff: Optional[int] = None) -> NCElement:
        """b_0 u b_1 ··· u b_ν，由左至右以 grow 策略相乘，最後才投影"""
        return self.evaluate_word([u] * self.degree, cutoff)

    def evaluate_word(self, factors: Sequence[NCElement], cutoff: Optional[int] = None) -> NCElement:
        """b_0 f_1 b_1 f_2 ··· f_ν b_ν，各槽位可放不同元素（伸縮恆等式用）"""
        if len(factors) != self.degree:
            raise NCTorusError(f"需要 {self.degree} 個因子，收到 {len(factors)}")
        result = self.coefficients[0]
        for factor, coefficient in zip(factors, self.coefficients[1:]):
            result.check_compatible(factor)
            result = multiply(multiply(result, factor), coefficient)
        return project(result, cutoff) if cutoff is not None else result


@dataclass(frozen=True)
class NCPolynomial:
    monomials: List[Monomial]

    def __post_init__(self):
        if not self.monomials:
            raise NCTorusError("多項式至少需要一個單項式")
        first = self.monomials[0].theta
        for monomial in self.monomials[1:]:
            if not first.same_as(monomial.theta):
                raise DimensionMismatchError("多項式的單項式必須共用同一個 θ")

    @property
    def degree(self) -> int:
        """q = max ν"""
        return max(monomial.degree for monomial in self.monomials)

    @property
    def theta(self) -> ThetaMatrix:
        return self.monomials[0].theta

    def __add__(self, other: "NCPolynomial") -> "NCPolynomial":
        return NCPolynomial(list(self.monomials) + list(other.monomials))

    def evaluate(self, u: NCElement, cutoff: Optional[int] = None) -> NCElement:
        return evaluate(self, u, cutoff)

    def __call__(self, u: NCElement, cutoff: Optional[int] = None) -> NCElement:
        return evaluate(self, u, cutoff)


def evaluate(polynomial: NCPolynomial, u: NCElement, cutoff: Optional[int] = None) -> NCElement:
    """依清單順序逐項求值後相加"""
    if not polynomial.theta.same_as(u.theta):
        raise DimensionMismatchError("多項式與輸入元素的 θ 不同")
    values = [monomial.evaluate(u) for monomial in polynomial.monomials]
    total = linear_combination([(1.0, value) for value in values])
    return project(total, cutoff) if cutoff is not None else total


def telescoped_terms(monomial: Monomial, u: NCElement, v: NCElement) -> List[NCElement]:
    """
    M(u) − M(v) = Σ_{i=1}^{ν} b_0 u ··· u b_{i−1} (u−v) b_i v ··· v b_ν

    第 i 項：前 i−1 個槽位放 u，第 i 個放 u−v，其餘放 v。
    """
    difference = u - v
    terms = []
    for i in range(monomial.degree):
        factors = [u] * i + [difference] + [v] * (monomial.degree - i - 1)
        terms.append(monomial.evaluate_word(factors))
    return terms


def zero_polynomial(theta: ThetaMatrix) -> NCPolynomial:
    return NCPolynomial([Monomial([NCElement.zero(theta)])])


def power(theta: ThetaMatrix, degree: int, coefficient: complex = 1.0) -> NCPolynomial:
    """c·u^ν（b_0 = c·U^0，其餘 b_j = U^0）"""
    if degree < 0:
        raise NCTorusError(f"次數必須非負，收到 {degree}")
    unit = NCElement.identity(theta)
    return NCPolynomial([Monomial([NCElement.identity(theta, coefficient)] + [unit] * degree)])


def parse_complex(value: Any, key: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(key, f"無法解析為複數: {value!r}")


def parse_element_spec(spec: Any, theta: ThetaMatrix, base_dir: str = ".", key: str = "element") -> NCElement:
    """元素描述：檔案路徑、純量（c·U^0）、[re, im]、{"mode": [...], "value": ...} 或 {"terms": [...]}"""
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
        return read_element(path, theta)
    if isinstance(spec, (int, float)) or (isinstance(spec, list) and len(spec) == 2
                                         and all(isinstance(x, (int, float)) for x in spec)):
        return NCElement.identity(theta, parse_complex(spec, key))
    if isinstance(spec, dict):
        if "terms" in spec:
            terms = [parse_element_spec(term, theta, base_dir, f"{key}.terms[{i}]")
                     for i, term in enumerate(spec["terms"])]
            return linear_combination([(1.0, term) for term in terms])
        if "mode" not in spec:
            raise ConfigError(key, "係數物件需要 'mode' 或 'terms'")
        mode = spec["mode"]
        if len(mode) != theta.n:
            raise ConfigError(f"{key}.mode", f"長度 {len(mode)} 與 n={theta.n} 不一致")
        return NCElement.monomial(theta, mode, parse_complex(spec.get("value", 1.0), f"{key}.value"))
    raise ConfigError(key, f"無法辨識的係數描述: {spec!r}")


def load_polynomial(spec: Any, theta: ThetaMatrix, base_dir: str = ".") -> NCPolynomial:
    """
    多項式描述：
        {"power": ν, "coefficient": c}      c·u^ν
        [[b_0, b_1, ...], ...]              單項式清單，每個 b_j 可為
                                            元素檔路徑、純量、[re, im]、{"mode": [...], "value": ...}
        "path/to/polynomial.json"           上述任一格式的 JSON 檔
    """
    if isinstance(spec, str):
        path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
        if not os.path.exists(path):
            raise ConfigError("polynomial", f"找不到多項式描述檔 {path}")
        with open(path, "r", encoding="utf-8") as f:
            return load_polynomial(json.load(f), theta, os.path.dirname(path) or ".")
    if isinstance(spec, dict):
        if "power" not in spec:
            raise ConfigError("polynomial", "物件格式需要 'power' 鍵")
        degree = spec["power"]
        if not isinstance(degree, int) or degree < 0:
            raise ConfigError("polynomial.power", f"必須為非負整數，收到 {degree!r}")
        return power(theta, degree, parse_complex(spec.get("coefficient", 1.0), "polynomial.coefficient"))
    if isinstance(spec, list):
        if not spec:
            raise ConfigError("polynomial", "單項式清單不可為空")
        monomials = []
        for i, monomial in enumerate(spec):
            if not isinstance(monomial, list) or not monomial:
                raise ConfigError(f"polynomial[{i}]", "每個單項式必須是非空的係數清單")
            monomials.append(Monomial([
                parse_element_spec(b, theta, base_dir, f"polynomial[{i}][{j}]") for j, b in enumerate(monomial)]))
        return NCPolynomial(monomials)
    raise ConfigError("polynomial", f"無法辨識的多項式描述: {spec!r}")
