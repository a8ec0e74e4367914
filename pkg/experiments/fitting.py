"""
log–log 斜率擬合（最小平方法）
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from lattice.errors import NCTorusError


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float

    def within(self, expected: float, tol: float, r2_min: float) -> bool:
        return abs(self.slope - expected) <= tol and self.r_squared >= r2_min


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """對 (log x, log y) 做普通最小平方法"""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.size < 3:
        raise NCTorusError("斜率擬合至少需要 3 個等長的資料點")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise NCTorusError("log–log 擬合只接受正值")
    result = stats.linregress(np.log(xs), np.log(ys))
    return SlopeFit(float(result.slope), float(result.intercept), float(result.rvalue ** 2))


def band_ratio(values: Sequence[float]) -> float:
    """max/min，用於「落在 c 倍範圍內」的檢查"""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or np.any(values <= 0):
        raise NCTorusError("band_ratio 只接受非空的正值序列")
    return float(np.max(values) / np.min(values))
