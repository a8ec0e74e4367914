"""
指數 Euler 時間推進與 blow-up 偵測

    u⁺ = P_h u + h·φ₁(hL)·N(u)

φ₁ 逐模態作用；零模態上 φ₁(0) = 1，即 L 的核上的前向 Euler。
"""
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lattice.errors import NCTorusError
from lattice.nc_element import NCElement
from nonlinear.polynomial import NCPolynomial
from solver.galerkin import GalerkinSpace, phi1
from solver.mild_solution import (SolutionTrajectory, SolverConfig, _build_trajectory, _log,
                                  ball_constants, local_existence_time, picard_solve)


def _step_vector(space: GalerkinSpace, vector: np.ndarray, h: float, polynomial: NCPolynomial) -> np.ndarray:
    z = space.eigenvalues * h
    return np.exp(-z) * vector + h * phi1(z) * space.nonlinear(polynomial, vector)


def exp_euler_step(u: NCElement, h: float, polynomial: NCPolynomial, cutoff: int) -> NCElement:
    if not h > 0:
        raise NCTorusError(f"步長 h 必須為正，收到 {h}")
    space = GalerkinSpace(u.theta, cutoff)
    return space.to_element(_step_vector(space, space.to_vector(u), h, polynomial))


@dataclass
class MarchResult:
    times: List[float]
    vectors: List[np.ndarray]
    status: str
    crossing_time: Optional[float]
    remaining_time: Optional[float]
    halvings: int
    final_step: float


def _march(space: GalerkinSpace, v0: np.ndarray, polynomial: NCPolynomial, cfg: SolverConfig,
           h: float, growth_tol: float, log_writer=None) -> MarchResult:
    """
    單步成長 (‖u⁺‖ − ‖u‖)/max(‖u‖, 1) 超過 growth_tol 時步長減半重試，步長不回升；
    ‖u‖_{H^k} > Θ 時停止並記錄越界時間
    """
    times = [0.0]
    vectors = [v0]
    norm = space.norm(v0, cfg.k)
    elapsed = 0.0
    halvings = 0
    if norm > cfg.threshold:
        _log(log_writer, f"[exp-Euler] ‖u₀‖ = {norm:.6e} > Θ at t=0")
        return MarchResult(times, vectors, "blowup_detected", 0.0, 0.0, halvings, h)
    while cfg.T_end - elapsed > 1e-14 * max(1.0, cfg.T_end):
        step = min(h, cfg.T_end - elapsed)
        candidate = _step_vector(space, vectors[-1], step, polynomial)
        candidate_norm = space.norm(candidate, cfg.k)
        if (candidate_norm - norm) / max(norm, 1.0) > growth_tol:
            h /= 2.0
            halvings += 1
            if h < cfg.h_min:
                _log(log_writer, f"❌ [exp-Euler] step underflow at t={elapsed:.6e}")
                return MarchResult(times, vectors, "tolerance_failure", None, None, halvings, h)
            continue
        elapsed += step
        times.append(elapsed)
        vectors.append(candidate)
        previous_norm, norm = norm, candidate_norm
        if norm > cfg.threshold:
            rate = (norm - previous_norm) / step
            remaining = norm / rate if rate > 0 else 0.0
            _log(log_writer, f"[exp-Euler] ‖u‖ > Θ at t={elapsed:.8f} (h={h:.3e}, halvings={halvings})")
            return MarchResult(times, vectors, "blowup_detected", elapsed, remaining, halvings, h)
    return MarchResult(times, vectors, "completed", None, None, halvings, h)


def blowup_interval(coarse: MarchResult, fine: MarchResult) -> Tuple[Tuple[float, float], float]:
    """
    兩次細分的越界時間 τ₁、τ₂ 與 Richardson 值 τ_R = 2τ₂ − τ₁；
    剩餘時間以 ‖u‖/(d‖u‖/dt) 估計（超線性成長時為上界）
    """
    candidates = [coarse.crossing_time, fine.crossing_time, 2.0 * fine.crossing_time - coarse.crossing_time]
    remaining = max(coarse.remaining_time, fine.remaining_time)
    interval = (min(candidates), max(candidates) + remaining)
    return interval, candidates[2] + fine.remaining_time


def solve_until_blowup(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig,
                       log_writer=None) -> SolutionTrajectory:
    """
    以 (h, growth_tol) 與 (h/2, growth_tol/2) 兩次推進；皆越過 Θ 時回報 T_max 區間與估計值
    """
    cfg.validate_dimension(u0.n)
    space = GalerkinSpace(u0.theta, cfg.cutoff)
    v0 = space.to_vector(u0)
    coarse = _march(space, v0, polynomial, cfg, cfg.h, cfg.growth_tol, log_writer)
    result = coarse
    interval = estimate = None
    if coarse.status == "blowup_detected":
        fine = _march(space, v0, polynomial, cfg, cfg.h / 2.0, cfg.growth_tol / 2.0, log_writer)
        if fine.status == "blowup_detected":
            interval, estimate = blowup_interval(coarse, fine)
            _log(log_writer, f"[exp-Euler] T_max ∈ [{interval[0]:.6f}, {interval[1]:.6f}], "
                             f"estimate {estimate:.6f}")
        result = fine

    trajectory = _build_trajectory(space, np.array(result.times), np.array(result.vectors),
                                   result.status, cfg, log_writer)
    trajectory.window_bounds = []
    trajectory.t_max_interval = interval
    trajectory.t_max_estimate = estimate
    trajectory.constants = {"halvings": float(result.halvings), "final_step": result.final_step}
    if interval is not None:
        trajectory.extras["crossing_times"] = [coarse.crossing_time, result.crossing_time]
    return trajectory


def exp_euler_march(u0: NCElement, polynomial: NCPolynomial, h: float, steps: int,
                    cutoff: int) -> List[NCElement]:
    """固定步長推進 steps 步（不減半）"""
    if steps < 0:
        raise NCTorusError(f"步數必須非負，收到 {steps}")
    space = GalerkinSpace(u0.theta, cutoff)
    vector = space.to_vector(u0)
    states = [space.to_element(vector)]
    for _ in range(steps):
        vector = _step_vector(space, vector, h, polynomial)
        states.append(space.to_element(vector))
    return states


@dataclass
class ConvergenceReport:
    horizon: float
    steps: List[int]
    errors: List[float]
    orders: List[float]

    @property
    def mean_order(self) -> float:
        return float(np.mean(self.orders)) if self.orders else math.nan


def scheme_convergence(u0: NCElement, polynomial: NCPolynomial, cfg: SolverConfig,
                       refinements: Sequence[int] = (8, 16, 32), reference_steps: int = 512,
                       log_writer=None) -> ConvergenceReport:
    """
    在保證區間 [0, T] 上，比較 h = T/m 的指數 Euler 終值與細格點 Picard 參考解
    """
    cfg.validate_dimension(u0.n)
    space = GalerkinSpace(u0.theta, cfg.cutoff)
    u0_norm = space.norm(space.to_vector(u0), cfg.k)
    radius, lipschitz, growth = ball_constants(u0_norm, polynomial, cfg)
    horizon = min(local_existence_time(u0_norm, growth, lipschitz, radius), cfg.T_end)
    reference = picard_solve(u0, polynomial, replace(cfg, picard_step=horizon / reference_steps,
                                                     min_window_steps=reference_steps),
                             horizon=horizon, log_writer=log_writer)
    if reference.status != "completed":
        raise NCTorusError("Picard 參考解未收斂，無法量測收斂階")

    target = space.to_vector(reference.states[-1])
    errors = []
    for count in refinements:
        final = exp_euler_march(u0, polynomial, horizon / count, count, cfg.cutoff)[-1]
        errors.append(space.norm(space.to_vector(final) - target, cfg.k))
        _log(log_writer, f"[convergence] steps={count} error={errors[-1]:.6e}")
    orders = [math.log(errors[i] / errors[i + 1]) / math.log(refinements[i + 1] / refinements[i])
              for i in range(len(errors) - 1) if errors[i + 1] > 0]
    return ConvergenceReport(horizon, list(refinements), errors, orders)
