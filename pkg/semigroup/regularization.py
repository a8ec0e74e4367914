"""
熱半群的正則化推論：Sobolev 增益、Hessian 界與強連續性
"""
import math
from typing import List, Sequence, Tuple

from calculus.derivations import hessian, hessian_l2_norm
from calculus.sobolev import sobolev_h_norm, sobolev_w_norm, sobolev_w_seminorm
from lattice.algebra import l2_norm
from lattice.errors import InvalidTimeError, NCTorusError
from lattice.nc_element import NCElement
from semigroup.heat_semigroup import heat_apply


def _safe_ratio(numerator: float, denominator: float) -> float:
    if denominator == 0.0:
        return 0.0 if numerator == 0.0 else math.inf
    return numerator / denominator


def sobolev_regularize(a: NCElement, k: int, r: int, t: float) -> Tuple[NCElement, float]:
    """
    回傳 (P_t a, ‖P_t a‖_{W^{k+r,2}} / ((1 + t^{−r/2})·‖a‖_{W^{k,2}}))
    """
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")
    if k < 0 or r < 0:
        raise NCTorusError(f"k, r 必須非負，收到 k={k}, r={r}")
    image = heat_apply(a, t)
    ratio = _safe_ratio(sobolev_w_norm(image, k + r), (1.0 + t ** (-r / 2.0)) * sobolev_w_norm(a, k))
    return image, ratio


def sobolev_regularize_seminorm(a: NCElement, k: int, r: int, t: float) -> float:
    """t^{r/2}·|P_t a|_{W^{k+r,2}} / |a|_{W^{k,2}}"""
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")
    image = heat_apply(a, t)
    return _safe_ratio(t ** (r / 2.0) * sobolev_w_seminorm(image, k + r), sobolev_w_seminorm(a, k))


def hessian_bound_ratio(a: NCElement, t: float) -> float:
    """t·‖Hess_θ(P_t a)‖ / ‖a‖_{L²}"""
    if not t > 0:
        raise InvalidTimeError(f"t 必須為正數，收到 {t}")
    return _safe_ratio(t * hessian_l2_norm(hessian(heat_apply(a, t))), l2_norm(a))


def strong_continuity_profile(a: NCElement, k: float, times: Sequence[float]) -> List[float]:
    """‖P_t a − a‖_{H^k} 沿給定時間序列"""
    return [sobolev_h_norm(heat_apply(a, t) - a, k) for t in times]


def is_monotone_nonincreasing(values: Sequence[float], slack: float = 0.0) -> bool:
    return all(later <= earlier + slack for earlier, later in zip(values, values[1:]))
