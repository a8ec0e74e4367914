import csv
import json
import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from experiments.commands import RunContext, run_solve
from experiments.spec import load_spec
from lattice.algebra import random_element
from lattice.errors import DivergentSeriesError, NCTorusError
from lattice.nc_element import LatticeBox, NCElement, ThetaMatrix
from nonlinear.polynomial import Monomial, NCPolynomial, power, zero_polynomial
from semigroup.heat_semigroup import heat_apply
from solver.galerkin import GalerkinSpace, box_index, phi1, psi, resize_box, shell_mass
from solver.mild_solution import (SolutionTrajectory, SolverConfig, ball_constants, bootstrap_regularity,
                                  continuous_dependence, duhamel_map, local_existence_time, mild_residual,
                                  picard_continue, picard_solve, solve)
from solver.monitors import TRAJECTORY_FIELDS, smoothing_bound, smoothing_monitor, write_trajectory
from solver.time_stepping import exp_euler_march, exp_euler_step, scheme_convergence, solve_until_blowup
from utils.worker_pool import WorkerPool

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# 粗格點設定：每個 Picard 視窗 8 段，用於需要多個視窗的續接測試
COARSE = dict(min_window_steps=8, picard_step=1e-2)


def scalar_ode(c: float, t: float) -> float:
    """u' = u², u(0) = c 的精確解"""
    return c / (1.0 - c * t)


@pytest.fixture
def half(scalar_theta):
    return NCElement.identity(scalar_theta, 0.5)


# --- φ 函數 ---


def test_phi_functions_at_zero():
    assert float(phi1(np.array(0.0))) == 1.0
    assert float(psi(np.array(0.0))) == 0.5


@pytest.mark.parametrize(("func", "switch"), [(phi1, 1e-8), (psi, 0.1)])
def test_phi_functions_are_continuous_at_series_switch(func, switch):
    below = float(func(np.array(switch * (1.0 - 1e-9))))
    above = float(func(np.array(switch)))
    assert below == pytest.approx(above, rel=1e-10)


def test_psi_matches_direct_formula_for_large_argument():
    z = np.array([0.5, 2.0, 30.0])
    expected = (1.0 - np.exp(-z) - z * np.exp(-z)) / z ** 2
    np.testing.assert_allclose(psi(z), expected, rtol=1e-14)


# --- 保證區間 ---


@pytest.mark.parametrize(
    ("args", "expected"),
    [
        ((0.4, 10.0, 1.0, 1.0), 0.06),
        ((0.4, 1.0, 1.0, 1.0), 0.5),
        ((0.4, 0.0, 0.0, 1.0), math.inf),
    ],
)
def test_local_existence_time(args, expected):
    assert local_existence_time(*args) == pytest.approx(expected)


def test_local_existence_time_cap():
    assert local_existence_time(0.4, 0.0, 0.0, 1.0, cap=2.0) == 2.0
    assert local_existence_time(0.4, 10.0, 1.0, 1.0, cap=0.01) == 0.01


def test_local_existence_time_requires_large_ball():
    with pytest.raises(NCTorusError, match="R > 2"):
        local_existence_time(0.5, 1.0, 1.0, 1.0)


def test_configured_ball_radius_used_only_when_large_enough(quadratic):
    cfg = SolverConfig(ball_radius=3.0)
    assert ball_constants(1.0, quadratic, cfg)[0] == 3.0
    assert ball_constants(2.0, quadratic, cfg)[0] == 5.0
    assert ball_constants(0.1, quadratic, SolverConfig())[0] == 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 0},
        {"interpolation": "cubic"},
        {"initial_guess": "random"},
        {"scheme": "rk4"},
        {"ball_radius": 10.0, "threshold": 5.0},
        {"h": 0.0},
    ],
)
def test_solver_config_validation(kwargs):
    with pytest.raises(NCTorusError):
        SolverConfig(**kwargs)


def test_solver_requires_algebra_order():
    theta = ThetaMatrix.golden(2)
    with pytest.raises(DivergentSeriesError, match="k must exceed n/2"):
        picard_solve(NCElement.identity(theta, 0.1), power(theta, 2), SolverConfig(k=1))


def test_trajectory_requires_time_grid_from_zero(half):
    with pytest.raises(NCTorusError):
        SolutionTrajectory([0.1], [half], [0.5], [0.5], "completed", 1)
    with pytest.raises(NCTorusError):
        SolutionTrajectory([0.0], [half], [0.5], [0.5], "exploded", 1)


# --- Duhamel 映射 ---


def test_duhamel_with_constant_nonlinearity(scalar_theta):
    u0 = NCElement.from_dict(scalar_theta, {(0,): 0.3, (1,): 0.1})
    times = np.linspace(0.0, 0.1, 11)
    images = duhamel_map([u0] * len(times), u0, power(scalar_theta, 0, 2.0), times, cutoff=2)
    for t, image in zip(times, images):
        assert image.coefficient((0,)).real == pytest.approx(0.3 + 2.0 * t, rel=1e-12)
        assert image.coefficient((1,)).real == pytest.approx(0.1 * math.exp(-4.0 * math.pi ** 2 * t), rel=1e-12)


def test_duhamel_without_nonlinearity_is_heat_flow(scalar_theta, linear_heat):
    u0 = random_element(scalar_theta, 2, seed=1)
    times = np.linspace(0.0, 0.05, 6)
    images = duhamel_map([u0] * len(times), u0, linear_heat, times, cutoff=2)
    assert images[-1].allclose(heat_apply(u0, 0.05), atol=1e-15)


def test_duhamel_rejects_nonuniform_grid(half, quadratic):
    with pytest.raises(NCTorusError):
        duhamel_map([half] * 3, half, quadratic, [0.0, 0.1, 0.3], cutoff=0)


# --- Picard ---


def test_picard_without_nonlinearity(scalar_theta, linear_heat):
    u0 = random_element(scalar_theta, 2, seed=3)
    trajectory = picard_solve(u0, linear_heat, SolverConfig(cutoff=2, T_end=0.1))
    assert trajectory.status == "completed"
    assert trajectory.final_time == pytest.approx(0.1)
    assert trajectory.states[-1].allclose(heat_apply(u0, trajectory.final_time), atol=1e-14)


def test_picard_matches_scalar_ode(half, quadratic):
    trajectory = picard_solve(half, quadratic, SolverConfig(cutoff=0))
    assert trajectory.status == "completed"
    assert trajectory.max_contraction <= 0.55
    T = trajectory.constants["T"]
    assert T == pytest.approx(trajectory.final_time)
    assert trajectory.states[-1].coefficient((0,)).real == pytest.approx(scalar_ode(0.5, T), rel=1e-8)


def test_picard_fixed_point_is_independent_of_initial_guess(half, quadratic):
    from_heat = picard_solve(half, quadratic, SolverConfig(cutoff=0))
    from_zero = picard_solve(half, quadratic, SolverConfig(cutoff=0, initial_guess="zero"))
    for a, b in zip(from_heat.states, from_zero.states):
        assert a.allclose(b, atol=1e-10)


def test_picard_continuation_follows_scalar_ode(half, quadratic):
    cfg = SolverConfig(cutoff=0, T_end=0.1, **COARSE)
    trajectory = picard_continue(half, quadratic, cfg)
    assert trajectory.status == "completed"
    assert len(trajectory.window_bounds) > 1
    assert trajectory.final_time == pytest.approx(0.1)
    for t, state in zip(trajectory.times, trajectory.states):
        assert state.coefficient((0,)).real == pytest.approx(scalar_ode(0.5, t), rel=1e-6)
    assert max(mild_residual(trajectory, quadratic, cfg)) <= 1e-10


def test_picard_continuation_with_dissipative_cubic(scalar_theta, half):
    cubic = power(scalar_theta, 3, -1.0)
    trajectory = solve(half, cubic, SolverConfig(cutoff=0, T_end=0.02, **COARSE))
    assert trajectory.status == "completed"
    exact = 0.5 / math.sqrt(1.0 + 2.0 * 0.25 * 0.02)
    assert trajectory.states[-1].coefficient((0,)).real == pytest.approx(exact, rel=1e-6)
    assert trajectory.h_k_norms[-1] < trajectory.h_k_norms[0]


def test_picard_continuation_stops_above_threshold(half, quadratic):
    cfg = SolverConfig(cutoff=0, T_end=1.0, threshold=0.55, **COARSE)
    trajectory = picard_continue(half, quadratic, cfg)
    assert trajectory.status == "blowup_detected"
    assert trajectory.h_k_norms[-1] > 0.55
    assert trajectory.final_time < 1.0


def test_continuous_dependence(scalar_theta, quadratic):
    u0 = NCElement.from_dict(scalar_theta, {(0,): 0.5, (1,): 0.05})
    v0 = u0 + NCElement.monomial(scalar_theta, (1,), 1e-3)
    report = continuous_dependence(u0, v0, quadratic, SolverConfig(cutoff=2))
    assert report.holds
    assert report.sup_difference >= report.initial_difference * (1.0 - 1e-12)
    assert report.max_contraction <= 0.55


def test_shell_mass_flags_energy_at_cutoff(scalar_theta):
    edge = NCElement.from_dict(scalar_theta, {(0,): 1.0, (3,): 1.0})
    assert shell_mass(edge, 1, 3) > 0.9
    assert shell_mass(NCElement.identity(scalar_theta), 1, 3) == 0.0
    space = GalerkinSpace(scalar_theta, 3)
    assert space.dimension == 7


# --- 指數 Euler ---


def test_exp_euler_step_on_constant_mode(half, quadratic):
    stepped = exp_euler_step(half, 1e-2, quadratic, cutoff=0)
    assert stepped.coefficient((0,)).real == pytest.approx(0.5 + 1e-2 * 0.25, rel=1e-15)
    with pytest.raises(NCTorusError):
        exp_euler_step(half, 0.0, quadratic, cutoff=0)


def test_exp_euler_march_without_nonlinearity_is_exact(scalar_theta, linear_heat):
    u0 = random_element(scalar_theta, 2, seed=4)
    states = exp_euler_march(u0, linear_heat, 1e-3, 10, cutoff=2)
    assert len(states) == 11
    assert states[-1].allclose(heat_apply(u0, 1e-2), atol=1e-14)


def test_blowup_interval_contains_scalar_blowup_time(scalar_theta, quadratic):
    u0 = NCElement.identity(scalar_theta, 1.0)
    cfg = SolverConfig(cutoff=0, scheme="exp-euler", h=1e-3, T_end=2.0, threshold=1e3)
    trajectory = solve(u0, quadratic, cfg)
    assert trajectory.status == "blowup_detected"
    low, high = trajectory.t_max_interval
    assert low <= 1.0 <= high
    assert trajectory.t_max_estimate == pytest.approx(1.0, rel=1e-2)
    assert len(trajectory.extras["crossing_times"]) == 2
    assert trajectory.h_k_norms[-1] > 1e3


def test_step_underflow_is_tolerance_failure(half, quadratic):
    cfg = SolverConfig(cutoff=0, scheme="exp-euler", h=1e-3, h_min=5e-4, growth_tol=1e-6)
    trajectory = solve_until_blowup(half, quadratic, cfg)
    assert trajectory.status == "tolerance_failure"
    assert trajectory.t_max_interval is None


def test_exp_euler_is_first_order(half, quadratic):
    report = scheme_convergence(half, quadratic, SolverConfig(cutoff=0))
    assert report.steps == [8, 16, 32]
    assert all(later < earlier for earlier, later in zip(report.errors, report.errors[1:]))
    assert report.mean_order == pytest.approx(1.0, abs=0.1)


# --- 平滑化與 bootstrap ---


def test_smoothing_bound_formula():
    assert smoothing_bound(0.25, 2.0, 4.0) == pytest.approx(3.0 * 2.0 + 4.0 * 0.75)


def test_smoothing_ratio_for_heat_flow(scalar_theta, linear_heat):
    u0 = random_element(scalar_theta, 3, sigma=1.0, seed=5)
    trajectory = picard_solve(u0, linear_heat, SolverConfig(cutoff=4, T_end=0.01))
    report = smoothing_monitor(trajectory, linear_heat, cutoff=4)
    assert report.sup_nonlinearity == 0.0
    assert len(report.ratios) == len(trajectory.times) - 1
    assert 0.0 < report.max_ratio < 1.0


def test_bootstrap_without_restart_is_picard(half, quadratic):
    cfg = SolverConfig(cutoff=0)
    direct = picard_solve(half, quadratic, cfg)
    bootstrapped = bootstrap_regularity(half, quadratic, cfg, r=0, epsilon=1e-3)
    assert bootstrapped.time_offset == 0.0
    assert bootstrapped.states[-1].allclose(direct.states[-1], atol=0.0)


def test_bootstrap_raises_sobolev_order(half, quadratic):
    trajectory = bootstrap_regularity(half, quadratic, SolverConfig(cutoff=0), r=1, epsilon=1e-3)
    assert trajectory.status == "completed"
    assert trajectory.k == 2
    assert trajectory.time_offset == pytest.approx(1e-3)
    stages = trajectory.extras["stage_norms"]
    assert [stage["order"] for stage in stages] == [2]
    assert stages[0]["norm"] == pytest.approx(scalar_ode(0.5, 1e-3), rel=1e-8)


def test_bootstrap_rejects_bad_arguments(half, quadratic):
    with pytest.raises(NCTorusError):
        bootstrap_regularity(half, quadratic, SolverConfig(cutoff=0), r=1, epsilon=0.0)


# --- 輸出 ---


def test_write_trajectory(tmp_path, half, quadratic):
    cfg = SolverConfig(cutoff=0, T_end=1e-3)
    trajectory = picard_solve(half, quadratic, cfg)
    residuals = mild_residual(trajectory, quadratic, cfg)
    csv_path = write_trajectory(str(tmp_path), trajectory, residuals, {"label": "unit"})

    with open(csv_path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0].keys()) == TRAJECTORY_FIELDS
    assert len(rows) == len(trajectory.times)
    assert float(rows[-1]["t"]) == trajectory.final_time
    assert len(list((tmp_path / "states").iterdir())) == len(trajectory.times)

    summary = json.loads((tmp_path / "run_summary.json").read_text(encoding="utf-8"))
    assert summary["status"] == "completed"
    assert summary["label"] == "unit"


def test_trajectory_summary_reports_offset(half, quadratic):
    trajectory = picard_solve(half, quadratic, SolverConfig(cutoff=0, T_end=1e-3))
    shifted = replace(trajectory, time_offset=0.5)
    assert shifted.summary()["final_time"] == pytest.approx(0.5 + trajectory.final_time)


# --- 稠密非線性項 ---


@pytest.fixture
def twisted_cubic(theta2):
    """b_0 u b_1 u b_2 u b_3，係數彼此不交換且支撐半徑不同"""
    coefficients = [random_element(theta2, 1, seed=21), NCElement.identity(theta2, 0.5 - 0.25j),
                    random_element(theta2, 2, seed=22), random_element(theta2, 1, seed=23)]
    return NCPolynomial([Monomial(coefficients), Monomial([random_element(theta2, 3, seed=24)])])


@pytest.mark.parametrize("cutoff", [0, 1, 3])
def test_dense_nonlinearity_matches_sparse_evaluation(theta2, twisted_cubic, cutoff):
    space = GalerkinSpace(theta2, cutoff)
    u = random_element(theta2, cutoff, sigma=1.0, seed=25)
    expected = space.to_vector(twisted_cubic.evaluate(u, cutoff=cutoff))
    scale = max(1.0, float(np.max(np.abs(expected))))
    np.testing.assert_allclose(space.nonlinear(twisted_cubic, space.to_vector(u)), expected,
                               rtol=0.0, atol=1e-12 * scale)


def test_dense_nonlinearity_on_rows_matches_single_vectors(theta2, twisted_cubic):
    space = GalerkinSpace(theta2, 2)
    rows = np.array([space.to_vector(random_element(theta2, 2, seed=s)) for s in (31, 32, 33)])
    batch = space.nonlinear(twisted_cubic, rows)
    assert batch.shape == rows.shape
    for row, value in zip(rows, batch):
        scale = max(1.0, float(np.max(np.abs(value))))
        np.testing.assert_allclose(value, space.nonlinear(twisted_cubic, row), rtol=0.0, atol=1e-12 * scale)


def test_dense_nonlinearity_rejects_other_theta(quadratic):
    space = GalerkinSpace(ThetaMatrix.golden(2), 1)
    with pytest.raises(NCTorusError):
        space.nonlinear(power(ThetaMatrix.zero(2), 2), np.zeros(space.dimension))
    with pytest.raises(NCTorusError):
        GalerkinSpace(ThetaMatrix.zero(1), 2).nonlinear(quadratic, np.zeros(3))


def test_box_index_follows_lattice_order():
    points = LatticeBox(2, 2).points()
    np.testing.assert_array_equal(box_index(points, 2), np.arange(points.shape[0]))


def test_resize_box_keeps_centre():
    u = random_element(ThetaMatrix.golden(2), 1, seed=3)
    grown = resize_box(u.to_dense(1).reshape(1, -1), 2, 1, 3)
    np.testing.assert_array_equal(grown[0], u.to_dense(3).reshape(-1))
    np.testing.assert_array_equal(resize_box(grown, 2, 3, 1)[0], u.to_dense(1).reshape(-1))


@pytest.mark.slow
def test_solve_command_on_constant_mode_finishes_quickly(tmp_path):
    spec = load_spec("solve", os.path.join(ROOT, "configs", "constant_mode_quadratic.json"))
    start = time.perf_counter()
    result = run_solve(spec, RunContext(str(tmp_path), WorkerPool(1)))
    elapsed = time.perf_counter() - start
    assert result.passed, [c for c in result.checks if not c.passed]
    assert elapsed < 20.0


# --- 初值已超過門檻 ---


def test_initial_datum_above_threshold_blows_up_at_zero(scalar_theta, quadratic):
    u0 = NCElement.identity(scalar_theta, 50.0)
    trajectory = solve_until_blowup(u0, quadratic, SolverConfig(cutoff=0, scheme="exp-euler", threshold=10.0))
    assert trajectory.status == "blowup_detected"
    assert trajectory.times == [0.0]
    assert trajectory.t_max_interval[0] == 0.0
    assert trajectory.t_max_estimate == 0.0
    assert trajectory.extras["crossing_times"] == [0.0, 0.0]
