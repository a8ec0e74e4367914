"""
半線性熱方程 ∂_t u + Lu = N(u) 的 mild solution

    (Φu)(t) = P_t u₀ + ∫_0^t P_{t−s} N(u(s)) ds

Picard 迭代在保證區間 [0, T] 上收斂到 Φ 的不動點；T 由
    ‖u₀‖ + T·M_R ≤ R,   T·L_R ≤ 1/2
決定，M_R、L_R 來自 nonlinear.sobolev_algebra 的成長與 Lipschitz 界。
"""
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from calculus.sobolev import sobolev_h_norm
from lattice.errors import DivergentSeriesError, NCTorusError
from lattice.nc_element import NCElement
from nonlinear.polynomial import NCPolynomial
from nonlinear.sobolev_algebra import growth_bound, lipschitz_bound
from solver.galerkin import GalerkinSpace

STATUSES = ("completed", "blowup_detected", "tolerance_failure")
INTERPOLATIONS = ("linear", "constant")
SCHEMES = ("picard", "exp-euler")


def _log(log_writer, message: str):
    """統一的日誌記錄方法，只寫入 log 檔"""
    if log_writer:
        log_writer.log_only(message)


@dataclass(frozen=True)
class SolverConfig:
    """
    k：Sobolev 階（需 k > n/2）；cutoff：Galerkin 截斷半徑 N；ball_radius：R（None 表示 max(2.5‖u₀‖, 1)）
    Picard：picard_step 為格距上限，每個視窗至少 min_window_steps 段
    exp-Euler：h 起始步長，growth_tol 單步成長上限，h_min 步長下限
    """
    k: int = 1
    cutoff: int = 4
    ball_radius: Optional[float] = None
    picard_step: float = 1e-3
    picard_tol: float = 1e-12
    picard_max_iter: int = 60
    min_window_steps: int = 32
    contraction_slack: float = 0.05
    interpolation: str = "linear"
    initial_guess: str = "heat"
    scheme: str = "picard"
    h: float = 1e-3
    h_min: float = 1e-12
    growth_tol: float = 0.01
    T_end: float = 1.0
    threshold: float = 1e3
    shell_warning: float = 1e-8

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise NCTorusError(f"k 必須為正整數，收到 {self.k}")
        if self.cutoff < 0:
            raise NCTorusError(f"截斷半徑必須非負，收到 {self.cutoff}")
        if self.ball_radius is not None and not self.ball_radius > 0:
            raise NCTorusError(f"球半徑 R 必須為正，收到 {self.ball_radius}")
        if not (self.h > 0 and self.picard_step > 0 and self.T_end > 0):
            raise NCTorusError("h、picard_step 與 T_end 必須為正")
        if self.ball_radius is not None and not self.threshold > self.ball_radius:
            raise NCTorusError(f"門檻 Θ={self.threshold} 必須大於 R={self.ball_radius}")
        if self.interpolation not in INTERPOLATIONS:
            raise NCTorusError(f"未知的內插方式 '{self.interpolation}'，可用: {INTERPOLATIONS}")
        if self.initial_guess not in ("heat", "zero"):
            raise NCTorusError(f"未知的初始猜測 '{self.initial_guess}'")
        if self.scheme not in SCHEMES:
            raise NCTorusError(f"未知的方法 '{self.scheme}'，可用: {SCHEMES}")
        if self.min_window_steps < 1 or self.picard_max_iter < 1:
            raise NCTorusError("min_window_steps 與 picard_max_iter 必須 ≥ 1")

    def validate_dimension(self, n: int) -> None:
        if not 2 * self.k > n:
            raise DivergentSeriesError(f"k must exceed n/2 (k={self.k}, n={n})")


@dataclass
class SolutionTrajectory:
    times: List[float]
    states: List[NCElement]
    h_k_norms: List[float]
    h_k1_norms: List[float]
    status: str
    k: int
    contraction_factors: List[float] = field(default_factory=list)
    shell_masses: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    constants: Dict[str, float] = field(default_factory=dict)
    window_bounds: List[Tuple[int, int]] = field(default_factory=list)
    t_max_interval: Optional[Tuple[float, float]] = None
    t_max_estimate: Optional[float] = None
    time_offset: float = 0.0
    extras: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise NCTorusError(f"未知的狀態 '{self.status}'")
        length = len(self.times)
        if length == 0 or self.times[0] != 0.0:
            raise NCTorusError("時間序列必須從 0 開始")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise NCTorusError("時間序列必須嚴格遞增")
        if not (len(self.states) == len(self.h_k_norms) == len(self.h_k1_norms) == length):
            raise NCTorusError("狀態與範數序列長度必須等於時間點數")

    @property
    def final_time(self) -> float:
        return self.times[-1]

    @property
    def max_contraction(self) -> float:
        return max(self.contraction_factors, default=0.0)

    def summary(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "k": self.k,
            "final_time": self.final_time + self.time_offset,
            "time_offset": self.time_offset,
            "steps": len(self.times) - 1,
            "windows": len(self.window_bounds),
            "final_h_k_norm": self.h_k_norms[-1],
            "max_h_k_norm": max(self.h_k_norms),
            "max_contraction_factor": self.max_contraction,
            "max_shell_mass": max(self.shell_masses, default=0.0),
            "t_max_interval": list(self.t_max_interval) if self.t_max_interval else None,
            "t_max_estimate": self.t_max_estimate,
            "constants": dict(self.constants),
            "warnings": list(self.warnings),
        }


def local_existence_time(u0_norm: float, growth: float, lipschitz: float, radius: float,
                         cap: Optional[float] = None) -> float:
    """T = min((R − ‖u₀‖)/M_R, 1/(2L_R))；兩者分母皆為 0 時回傳 cap（未給則 +∞）"""
    if not radius > 2.0 * u0_norm:
        raise NCTorusError(f"需要 R > 2‖u₀‖，收到 R={radius}, ‖u₀‖={u0_norm}")
    candidates = []
    if growth > 0:
        candidates.append((radius - u0_norm) / growth)
    if lipschitz > 0:
        candidates.append(1.0 / (2.0 * lipschitz))
    if not candidates:
        return cap if cap is not None else math.inf
    value = min(candidates)
    return min(value, cap) if cap is not None else value


def default_ball_radius(u0_norm: float, cfg: SolverConfig) -> float:
    """R = max(2.5‖u₀‖, 1)；設定的 R 只在滿足 R > 2‖u₀‖ 時採用"""
    if cfg.ball_radius is not None and cfg.ball_radius > 2.0 * u0_norm:
        return cfg.ball_radius
    return max(2.5 * u0_norm, 1.0)


def ball_constants(u0_norm: float, polynomial: NCPolynomial, cfg: SolverConfig) -> Tuple[float, float, float]:
    """(R, L_R, M_R)"""
    radius = default_ball_radius(u0_norm, cfg)
    return radius, lipschitz_bound(polynomial, radius, cfg.k), growth_bound(polynomial, radius, cfg.k)


def _window_grid(horizon: float, cfg: SolverConfig) -> Tuple[int, float]:
    steps = max(cfg.min_window_steps, int(math.ceil(horizon / cfg.picard_step - 1e-9)))
    return steps, horizon / steps


def _duhamel_vectors(space: GalerkinSpace, v0: np.ndarray, nonlinear_values: np.ndarray,
                     step: float, interpolation: str) -> np.ndarray:
    """均勻格點上的 Φu；傳播子逐模態精確積分，N 依 interpolation 內插"""
    count = nonlinear_values.shape[0]
    left, right = space.interval_weights(step, interpolation)
    decay = np.exp(-space.eigenvalues * step)
    output = np.empty_like(nonlinear_values)
    output[0] = v0
    heat_part = v0.copy()
    integral = np.zeros_like(v0)
    for i in range(count - 1):
        integral = decay * integral + left * nonlinear_values[i] + right * nonlinear_values[i + 1]
        heat_part = decay * heat_part
        output[i + 1] = heat_part + integral
    return output


def duhamel_map(states: Sequence[NCElement], u0: NCElement, polynomial: NCPolynomial,
                times: Sequence[float], cutoff: int, interpolation: str = "linear") -> List[NCElement]:
    """
    (Φu)(t_i)，times 必須為從 0 開始的均勻格點
    """
    times = np.asarray(times, dtype=np.float64)
    if len(states) != times.shape[0] or times.shape[0] < 2 or times[0] != 0.0:
        raise NCTorusError("duhamel_map 需要從 0 開始、與狀態等長的時間格點")
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-12, atol=0.0):
        raise NCTorusError("duhamel_map 只支援均勻格點")
    space = GalerkinSpace(u0.theta, cutoff)
    values = space.nonlinear(polynomial, np.array([space.to_vector(state) for state in states]))
    output = _duhamel_vectors(space, space.to_vector(u0), values, float(steps[0]), interpolation)
    return [space.to_element(vector) for vector in output]


@dataclass
class WindowResult:
    times: np.ndarray
    vectors: np.ndarray
    factors: List[float]
    iterations: int
    distance: float
    status: str


def _picard_window(space: GalerkinSpace, v0: np.ndarray, polynomial: NCPolynomial, horizon: float,
                   cfg: SolverConfig, log_writer=None) -> WindowResult:
    steps, step = _window_grid(horizon, cfg)
    times = step * np.arange(steps + 1)
    heat_part = np.exp(-np.outer(times, space.eigenvalues)) * v0[None, :]
    current = heat_part if cfg.initial_guess == "heat" else np.zeros_like(heat_part)
    current[0] = v0

    factors: List[float] = []
    previous = None
    distance = math.inf
    for iteration in range(1, cfg.picard_max_iter + 1):
        values = space.nonlinear(polynomial, current)
        image = _duhamel_vectors(space, v0, values, step, cfg.interpolation)
        distance = float(np.max(space.norms(image - current, cfg.k)))
        scale = max(1.0, float(np.max(space.norms(image, cfg.k))))
        # 只在距離明顯高於捨入誤差時量測收縮因子
        if previous is not None and previous > 1e-10 * scale:
            factors.append(distance / previous)
        current = image
        previous = distance
        _log(log_writer, f"    [Picard] iter {iteration}: sup distance {distance:.3e}")
        if distance <= cfg.picard_tol * scale:
            status = "completed"
            if factors and max(factors) > 0.5 + cfg.contraction_slack:
                status = "tolerance_failure"
            return WindowResult(times, current, factors, iteration, distance, status)
    return WindowResult(times, current, factors, cfg.picard_max_iter, distance, "tolerance_failure")


def _build_trajectory(space: GalerkinSpace, times: np.ndarray, vectors: np.ndarray, status: str,
                      cfg: SolverConfig, log_writer=None, k: Optional[int] = None) -> SolutionTrajectory:
    k = cfg.k if k is None else k
    shell = [space.shell_mass(vector, k) for vector in vectors]
    warnings = []
    worst = max(shell, default=0.0)
    if worst > cfg.shell_warning:
        warnings.append(f"Galerkin 截斷指標 {worst:.3e} 超過 {cfg.shell_warning:.1e}，請增大 cutoff")
        _log(log_writer, f"⚠️ [Solver] shell mass {worst:.3e} above {cfg.shell_warning:.1e}")
    return SolutionTrajectory(
        times=[float(t) for t in times],
        states=[space.to_element(vector) for vector in vectors],
        h_k_norms=[float(x) for x in space.norms(vectors, k)],
        h_k1_norms=[float(x) for x in space.norms(vectors, k + 1)],
        status=status,
        k=k,
        shell_masses=shell,
        warnings=warnings,
    )


def picard_solve(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig,
                 horizon: Optional[float] = None, log_writer=None) -> SolutionTrajectory:
    """保證區間 [0, T] 上的 Picard 迭代；horizon 可再縮短 T"""
    cfg.validate_dimension(u0.n)
    space = GalerkinSpace(u0.theta, cfg.cutoff)
    v0 = space.to_vector(u0)
    u0_norm = space.norm(v0, cfg.k)
    radius, lipschitz, growth = ball_constants(u0_norm, polynomial, cfg)
    existence = local_existence_time(u0_norm, growth, lipschitz, radius)
    window = min(existence, cfg.T_end, horizon if horizon is not None else math.inf)

    result = _picard_window(space, v0, polynomial, window, cfg, log_writer)
    trajectory = _build_trajectory(space, result.times, result.vectors, result.status, cfg, log_writer)
    trajectory.contraction_factors = result.factors
    trajectory.window_bounds = [(0, len(result.times) - 1)]
    trajectory.constants = {"R": radius, "L_R": lipschitz, "M_R": growth, "T": window,
                            "T_local": existence, "iterations": result.iterations,
                            "final_distance": result.distance}
    _log(log_writer, f"[Picard] T={window:.4e} R={radius:.4e} L_R={lipschitz:.4e} "
                     f"M_R={growth:.4e} iterations={result.iterations} status={result.status}")
    return trajectory


def picard_continue(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig,
                    log_writer=None) -> SolutionTrajectory:
    """
    以局部存在時間為視窗逐段重啟 Picard 並黏接，直到 T_end 或 ‖u‖_{H^k} > Θ
    """
    cfg.validate_dimension(u0.n)
    space = GalerkinSpace(u0.theta, cfg.cutoff)
    current = space.to_vector(u0)
    times = [0.0]
    vectors = [current]
    factors: List[float] = []
    bounds: List[Tuple[int, int]] = []
    status = "completed"
    elapsed = 0.0
    min_window = math.inf

    while cfg.T_end - elapsed > 1e-14 * max(1.0, cfg.T_end):
        norm = space.norm(current, cfg.k)
        if norm > cfg.threshold:
            status = "blowup_detected"
            break
        radius, lipschitz, growth = ball_constants(norm, polynomial, cfg)
        window = min(local_existence_time(norm, growth, lipschitz, radius), cfg.T_end - elapsed)
        if window < 1e-14:
            status = "tolerance_failure"
            break
        result = _picard_window(space, current, polynomial, window, cfg, log_writer)
        factors.extend(result.factors)
        start = len(times) - 1
        times.extend(float(elapsed + t) for t in result.times[1:])
        vectors.extend(result.vectors[1:])
        bounds.append((start, len(times) - 1))
        elapsed += window
        min_window = min(min_window, window)
        current = result.vectors[-1]
        _log(log_writer, f"[Picard window {len(bounds)}] t={elapsed:.6f} T={window:.4e} "
                         f"norm={space.norm(current, cfg.k):.6e}")
        if result.status != "completed":
            status = result.status
            break

    trajectory = _build_trajectory(space, np.array(times), np.array(vectors), status, cfg, log_writer)
    trajectory.contraction_factors = factors
    trajectory.window_bounds = bounds
    trajectory.constants = {"windows": float(len(bounds)),
                            "min_window": min_window if bounds else 0.0}
    return trajectory


def solve(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig, log_writer=None) -> SolutionTrajectory:
    """依 cfg.scheme 選擇 Picard 續接或指數 Euler"""
    if cfg.scheme == "picard":
        return picard_continue(u0, polynomial, cfg, log_writer)
    from solver.time_stepping import solve_until_blowup
    return solve_until_blowup(u0, polynomial, cfg, log_writer)


@dataclass
class DependenceReport:
    sup_difference: float
    gronwall_bound: float
    initial_difference: float
    lipschitz: float
    horizon: float
    max_contraction: float = 0.0

    @property
    def holds(self) -> bool:
        return self.sup_difference <= self.gronwall_bound * (1.0 + 1e-12)


def continuous_dependence(u0: NCElement, v0: NCElement, polynomial: NCPolynomial,
                          cfg: SolverConfig, log_writer=None) -> DependenceReport:
    """
    同一個球、同一個 T 與同一組格點上解兩次，比較 sup_t‖u − v‖_{H^k} 與 e^{L_R T}‖u₀ − v₀‖_{H^k}
    """
    cfg.validate_dimension(u0.n)
    u0.check_compatible(v0)
    space = GalerkinSpace(u0.theta, cfg.cutoff)
    first, second = space.to_vector(u0), space.to_vector(v0)
    largest = max(space.norm(first, cfg.k), space.norm(second, cfg.k))
    radius, lipschitz, growth = ball_constants(largest, polynomial, cfg)
    horizon = min(local_existence_time(largest, growth, lipschitz, radius), cfg.T_end)
    shared = replace(cfg, ball_radius=radius)

    u = _picard_window(space, first, polynomial, horizon, shared, log_writer)
    v = _picard_window(space, second, polynomial, horizon, shared, log_writer)
    difference = float(np.max(space.norms(u.vectors - v.vectors, cfg.k)))
    initial = space.norm(first - second, cfg.k)
    return DependenceReport(difference, math.exp(lipschitz * horizon) * initial, initial, lipschitz, horizon,
                            max(u.factors + v.factors, default=0.0))


def mild_residual(trajectory: SolutionTrajectory, polynomial: NCPolynomial, cfg: SolverConfig) -> List[float]:
    """逐格點 ‖u(t) − (Φu)(t)‖_{H^k}，每個 Picard 視窗以視窗起點為初值"""
    theta = trajectory.states[0].theta
    space = GalerkinSpace(theta, cfg.cutoff)
    vectors = np.array([space.to_vector(state) for state in trajectory.states])
    bounds = trajectory.window_bounds or [(0, len(trajectory.times) - 1)]
    residuals = [0.0] * len(trajectory.times)
    for start, end in bounds:
        step = (trajectory.times[end] - trajectory.times[start]) / (end - start)
        window = vectors[start:end + 1]
        values = space.nonlinear(polynomial, np.asarray(window))
        image = _duhamel_vectors(space, window[0], values, step, cfg.interpolation)
        for offset, value in enumerate(space.norms(image - window, trajectory.k)):
            residuals[start + offset] = float(value)
    return residuals


def bootstrap_regularity(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig, r: int,
                         epsilon: float, log_writer=None) -> SolutionTrajectory:
    """
    在 t = ε 重啟 r 次，每次把工作空間從 H^{k+j−1} 提升到 H^{k+j}；
    回傳最後一段（帶 H^{k+r} 範數）的軌跡，time_offset 為累積的重啟時間
    """
    if r < 0 or not epsilon > 0:
        raise NCTorusError(f"需要 r ≥ 0 與 ε > 0，收到 r={r}, ε={epsilon}")
    if r == 0:
        return picard_solve(u0, polynomial, cfg, log_writer=log_writer)

    current = u0
    elapsed = 0.0
    stage_norms = []
    for j in range(1, r + 1):
        stage_cfg = replace(cfg, k=cfg.k + j - 1, T_end=epsilon, ball_radius=None)
        stage = picard_solve(current, polynomial, stage_cfg, log_writer=log_writer)
        if stage.status != "completed":
            stage.time_offset = elapsed
            return stage
        current = stage.states[-1]
        elapsed += stage.final_time
        gained = sobolev_h_norm(current, cfg.k + j)
        stage_norms.append({"stage": j, "time": elapsed, "order": cfg.k + j, "norm": gained})
        _log(log_writer, f"[Bootstrap] stage {j}: t={elapsed:.4e} ‖u‖_H^{cfg.k + j}={gained:.6e}")

    final = picard_solve(current, polynomial, replace(cfg, k=cfg.k + r, ball_radius=None),
                         log_writer=log_writer)
    final.time_offset = elapsed
    final.extras["stage_norms"] = stage_norms
    return final
