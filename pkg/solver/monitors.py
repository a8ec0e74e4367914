"""
軌跡監測與輸出
"""
import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from calculus.sobolev import sobolev_h_norm
from lattice.serialization import write_element
from nonlinear.polynomial import NCPolynomial, evaluate
from solver.mild_solution import SolutionTrajectory

TRAJECTORY_FIELDS = ["t", "h_k_norm", "h_k1_norm", "residual", "shell_mass"]


@dataclass
class SmoothingReport:
    """M_T、逐時間點比值與最大比值（經驗常數）"""
    sup_nonlinearity: float
    times: List[float]
    ratios: List[float]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)


def smoothing_bound(t: float, u0_norm: float, sup_nonlinearity: float) -> float:
    """(1 + t^{−1/2})‖u₀‖_{H^k} + M_T(t + t^{1/2})"""
    root = math.sqrt(t)
    return (1.0 + 1.0 / root) * u0_norm + sup_nonlinearity * (t + root)


def smoothing_monitor(trajectory: SolutionTrajectory, polynomial: NCPolynomial,
                      k: Optional[int] = None, cutoff: Optional[int] = None) -> SmoothingReport:
    """
    ‖u(t)‖_{H^{k+1}} / [(1 + t^{−1/2})‖u₀‖_{H^k} + M_T(t + t^{1/2})]，t = 0 不計
    """
    k = trajectory.k if k is None else k
    sup_nonlinearity = max(sobolev_h_norm(evaluate(polynomial, state, cutoff), k)
                           for state in trajectory.states)
    u0_norm = sobolev_h_norm(trajectory.states[0], k)
    times, ratios = [], []
    for t, state in zip(trajectory.times[1:], trajectory.states[1:]):
        bound = smoothing_bound(t, u0_norm, sup_nonlinearity)
        times.append(t)
        ratios.append(sobolev_h_norm(state, k + 1) / bound if bound > 0 else 0.0)
    return SmoothingReport(sup_nonlinearity, times, ratios)


def write_trajectory(directory: str, trajectory: SolutionTrajectory,
                     residuals: Optional[Sequence[float]] = None,
                     summary_extra: Optional[Dict[str, Any]] = None) -> str:
    """
    directory/
        states/state_<i>.txt     每個時間點的元素檔
        trajectory.csv           t, h_k_norm, h_k1_norm, residual, shell_mass
        run_summary.json         狀態、T_max 區間與經驗常數
    """
    states_dir = os.path.join(directory, "states")
    os.makedirs(states_dir, exist_ok=True)
    width = max(5, len(str(len(trajectory.states))))
    for index, state in enumerate(trajectory.states):
        write_element(os.path.join(states_dir, f"state_{index:0{width}d}.txt"), state)

    residuals = list(residuals) if residuals is not None else [math.nan] * len(trajectory.times)
    shell = trajectory.shell_masses or [math.nan] * len(trajectory.times)
    csv_path = os.path.join(directory, "trajectory.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=TRAJECTORY_FIELDS)
        writer.writeheader()
        for i, t in enumerate(trajectory.times):
            writer.writerow({
                "t": repr(t + trajectory.time_offset),
                "h_k_norm": repr(trajectory.h_k_norms[i]),
                "h_k1_norm": repr(trajectory.h_k1_norms[i]),
                "residual": repr(float(residuals[i])),
                "shell_mass": repr(float(shell[i])),
            })

    summary = trajectory.summary()
    if summary_extra:
        summary.update(summary_extra)
    with open(os.path.join(directory, "run_summary.json"), "w", encoding="utf-8") as f:
        json.dump(summary, f, ensure_ascii=False, indent=2, default=str)
    return csv_path
