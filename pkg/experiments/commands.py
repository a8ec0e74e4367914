"""
各子命令的實驗內容

每個 run_* 回傳 CommandResult：CSV 欄位、資料列、驗收檢查與摘要。
掃描型子命令（algebra、embedding、laws、dependence）把樣本切成區塊交給 WorkerPool，
區塊由模組層級的 run_task 執行，結果依任務 key 排序後合併。
"""
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from calculus.sobolev import sobolev_w_norm_spectral, w_weight
from experiments.fitting import band_ratio, fit_loglog
from experiments.spec import ExperimentSpec, parse_theta
from kernel.heat_kernel import gaussian_l1_norm, gaussian_l1_norm_exact, periodized_l1_norm
from lattice.algebra import (adjoint, cocycle, multiply, random_element, symbolic_reorder, trace)
from lattice.errors import ConfigError
from lattice.nc_element import LatticeBox, MultiIndex, NCElement
from nonlinear.sobolev_algebra import (algebra_constant, algebra_ratio, embedding_ratio,
                                       l1_embedding_constant)
from semigroup.heat_semigroup import (cb_norm_bracket, heat_symbol, l2_operator_norm,
                                      sharpness_witness, witness_index)
from semigroup.regularization import hessian_bound_ratio, sobolev_regularize
from solver.mild_solution import (bootstrap_regularity, continuous_dependence, mild_residual,
                                  picard_continue, picard_solve)
from solver.monitors import TRAJECTORY_FIELDS, smoothing_monitor, write_trajectory
from solver.time_stepping import scheme_convergence, solve_until_blowup
from utils.worker_pool import WorkerPool


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class CommandResult:
    command: str
    columns: List[str]
    rows: List[Dict[str, Any]]
    checks: List[Check]
    key_columns: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def sorted_rows(self) -> List[Dict[str, Any]]:
        if not self.key_columns:
            return list(self.rows)
        return sorted(self.rows, key=lambda row: tuple(_sort_key(row[c]) for c in self.key_columns))


@dataclass
class RunContext:
    out_dir: str
    pool: WorkerPool
    log_writer: Any = None

    def log(self, message: str):
        if self.log_writer:
            self.log_writer.log_only(message)

    def artifact_dir(self, *parts: str) -> str:
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(path, exist_ok=True)
        return path


def _sort_key(value: Any):
    if isinstance(value, (int, float)):
        return (0, float(value), "")
    return (1, 0.0, str(value))


def _alpha(values: Sequence[int], n: int) -> MultiIndex:
    values = [int(v) for v in values]
    if len(values) > n:
        if any(values[n:]):
            raise ConfigError("alpha", f"多重指標 {values} 超出維度 n={n}")
        values = values[:n]
    return MultiIndex(tuple(values + [0] * (n - len(values))))


def _label(alpha: MultiIndex) -> str:
    return "(" + ",".join(str(x) for x in alpha.alpha) + ")"


def _exponent_range(bounds: Sequence[int]) -> List[int]:
    if len(bounds) != 2 or bounds[0] > bounds[1]:
        raise ConfigError("t_exponents", f"必須是 [最小, 最大]，收到 {bounds}")
    return list(range(int(bounds[0]), int(bounds[1]) + 1))


# ---------------------------------------------------------------- heat-semigroup


def run_rates(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    rows, checks = [], []
    exponents = _exponent_range(spec["t_exponents"])
    times = [2.0 ** (-j) for j in exponents]
    for n in spec["dims"]:
        for alpha_values, ell in spec["cases"]:
            alpha = _alpha(alpha_values, n)
            if alpha.order == 0 and ell == 0:
                continue
            values = [l2_operator_norm(alpha, ell, t, n) for t in times]
            fit = fit_loglog(times, values)
            expected = -(ell + alpha.order / 2.0)
            passed = fit.within(expected, spec["slope_tol"], spec["r2_min"])
            rows.append({"n": n, "alpha": _label(alpha), "ell": ell, "slope": fit.slope,
                         "expected": expected, "r_squared": fit.r_squared, "points": len(times)})
            checks.append(Check(f"rate n={n} alpha={_label(alpha)} ell={ell}", passed,
                                f"slope={fit.slope:.4f} expected={expected} R²={fit.r_squared:.6f}"))
            context.log(f"[rates] n={n} α={_label(alpha)} ℓ={ell}: slope {fit.slope:.4f}")
    return CommandResult("rates", ["n", "alpha", "ell", "slope", "expected", "r_squared", "points"],
                         rows, checks, key_columns=["n", "alpha", "ell"])


def _sharpness_times(spec: ExperimentSpec, n: int) -> List[float]:
    """t_exponents 可為共用的 [最小, 最大]，或依維度 {"n": [最小, 最大]}"""
    bounds = spec["t_exponents"]
    if isinstance(bounds, dict):
        if str(n) not in bounds:
            raise ConfigError("t_exponents", f"沒有 n={n} 的指數範圍")
        bounds = bounds[str(n)]
    return [10.0 ** (-j) for j in _exponent_range(bounds)]


def run_sharpness(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    rows, checks = [], []
    for n in spec["dims"]:
        times = []
        for t in _sharpness_times(spec, n):
            if witness_index(t, n) == 0:
                context.log(f"⚠️ [sharpness] n={n} t={t:.0e}: k_t = 0，略過")
                continue
            times.append(t)
        decades = math.log10(max(times) / min(times)) if times else 0.0
        checks.append(Check(f"sharpness decades n={n}", decades >= spec["min_decades"] - 1e-9,
                            f"{decades:.1f} decades over {len(times)} times"))
        for alpha_values, ell in spec["cases"]:
            alpha = _alpha(alpha_values, n)
            gamma = ell + alpha.order / 2.0
            scaled, dominated = [], True
            for t in times:
                _, value = sharpness_witness(alpha, ell, t, n)
                exact = l2_operator_norm(alpha, ell, t, n)
                dominated = dominated and value <= exact * (1.0 + 1e-12)
                scaled.append(value * t ** gamma)
                rows.append({"n": n, "alpha": _label(alpha), "ell": ell, "t": t, "k_t": witness_index(t, n),
                             "witness": value, "exact": exact, "scaled": value * t ** gamma})
            label = f"n={n} alpha={_label(alpha)} ell={ell}"
            if not scaled:
                checks.append(Check(f"sharpness {label}", False, "沒有任何 t 可建構 witness"))
                continue
            band = band_ratio(scaled)
            checks.append(Check(f"witness below norm {label}", dominated))
            checks.append(Check(f"sharpness band {label}", band <= spec["band_factor"], f"band={band:.3f}"))
    return CommandResult("sharpness", ["n", "alpha", "ell", "t", "k_t", "witness", "exact", "scaled"],
                         rows, checks, key_columns=["n", "alpha", "ell", "t"])


# ---------------------------------------------------------------- classical-kernel


def run_kernel_scaling(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    alpha = MultiIndex(tuple(int(x) for x in spec["alpha"]))
    n = alpha.n
    half = alpha.order / 2.0
    rows, checks = [], []
    scaled_window = []
    bracket_ok = True
    for t in spec["t_values"]:
        lower = l2_operator_norm(alpha, 0, t, n)
        upper = periodized_l1_norm(alpha, t, n)
        gaussian = gaussian_l1_norm(alpha, t, n)
        bracket_ok = bracket_ok and lower <= upper * (1.0 + 1e-9)
        if t <= spec["scaling_t_max"]:
            scaled_window.append(upper * t ** half)
        rows.append({"t": t, "lower": lower, "upper": upper, "upper_scaled": upper * t ** half,
                     "gaussian": gaussian, "gaussian_scaled": gaussian * t ** half})
    checks.append(Check("cb bracket lower <= upper", bracket_ok))
    if len(scaled_window) >= 2:
        spread = band_ratio(scaled_window) - 1.0
        checks.append(Check("periodized kernel scaling", spread <= spec["scaling_tol"],
                            f"spread={spread:.5f} for t <= {spec['scaling_t_max']}"))

    exact = gaussian_l1_norm_exact(alpha, 1.0, n)
    quadrature = gaussian_l1_norm(alpha, 1.0, n)
    relative = abs(quadrature - exact) / exact
    checks.append(Check("gaussian L1 quadrature vs exact", relative <= spec["gaussian_tol"],
                        f"quad={quadrature:.12f} exact={exact:.12f}"))
    if alpha.alpha == (1,):
        closed = 1.0 / math.sqrt(math.pi)
        checks.append(Check("first derivative L1 equals 1/sqrt(pi)",
                            abs(quadrature - closed) / closed <= spec["gaussian_tol"],
                            f"quad={quadrature:.12f}"))
    return CommandResult("kernel-scaling", ["t", "lower", "upper", "upper_scaled", "gaussian", "gaussian_scaled"],
                         rows, checks, key_columns=["t"])


def run_bracket(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    rows, checks = [], []
    for n in spec["dims"]:
        for order in spec["orders"]:
            alpha = MultiIndex.unit(n, 0, int(order))
            ok = True
            for t in spec["t_values"]:
                lower, upper = cb_norm_bracket(alpha, t, n)
                ok = ok and lower <= upper * (1.0 + 1e-9)
                rows.append({"n": n, "alpha": _label(alpha), "t": t, "lower": lower, "upper": upper,
                             "ratio": upper / lower})
            checks.append(Check(f"bracket n={n} alpha={_label(alpha)}", ok))
    return CommandResult("bracket", ["n", "alpha", "t", "lower", "upper", "ratio"], rows, checks,
                         key_columns=["n", "alpha", "t"])


# ---------------------------------------------------------------- nonlinear


def _random_pair(theta, radius: int, sigma_range: Sequence[float], rng) -> Tuple[NCElement, NCElement]:
    elements = []
    for _ in range(2):
        elements.append(random_element(theta, int(rng.integers(0, radius + 1)),
                                       float(rng.uniform(*sigma_range)), seed=int(rng.integers(2 ** 32))))
    return elements[0], elements[1]


def _chunks(total: int, size: int) -> List[Tuple[int, int]]:
    size = max(1, int(size))
    return [(start, min(start + size, total)) for start in range(0, total, size)]


def algebra_chunk(task: dict) -> dict:
    n, k, radius = task["n"], task["k"], task["radius"]
    theta = parse_theta(task["theta"], n)
    constant = algebra_constant(k, n)
    worst, violations = 0.0, 0
    for i in range(*task["range"]):
        rng = np.random.default_rng([task["seed"], task["case"], task["theta_index"], i])
        a, b = _random_pair(theta, radius, task["sigma_range"], rng)
        ratio = algebra_ratio(a, b, k)
        worst = max(worst, ratio)
        violations += int(ratio > constant * (1.0 + 1e-12))
    return {"max_ratio": worst / constant, "violations": violations, "samples": task["range"][1] - task["range"][0]}


def embedding_chunk(task: dict) -> dict:
    n, k, radius = task["n"], task["k"], task["radius"]
    theta = parse_theta(task["theta"], n)
    constant = l1_embedding_constant(k, n)
    worst, violations = 0.0, 0
    for i in range(*task["range"]):
        rng = np.random.default_rng([task["seed"], task["case"], task["theta_index"], i])
        a, _ = _random_pair(theta, radius, task["sigma_range"], rng)
        ratio = embedding_ratio(a, k, constant)
        worst = max(worst, ratio)
        violations += int(ratio > 1.0 + 1e-12)
    return {"max_ratio": worst, "violations": violations, "samples": task["range"][1] - task["range"][0]}


def _sampled_inequality(spec: ExperimentSpec, context: RunContext, kind: str) -> CommandResult:
    tasks = []
    for case_index, case in enumerate(spec["cases"]):
        for theta_index, theta_name in enumerate(spec["thetas"]):
            for start, stop in _chunks(spec["samples"], spec["chunk"]):
                tasks.append({"key": (case_index, theta_index, start), "kind": kind, "case": case_index,
                              "theta_index": theta_index, "theta": theta_name, "n": int(case["n"]),
                              "k": int(case["k"]), "radius": int(case["radius"]), "seed": spec.seed,
                              "sigma_range": list(spec["sigma_range"]), "range": (start, stop)})
    # 前置條件在主程序檢查，k ≤ n/2 直接以 DivergentSeriesError 結束
    for case in spec["cases"]:
        algebra_constant(int(case["k"]), int(case["n"]))
    results, failures = context.pool.run(tasks, run_task)

    rows, checks = [], []
    for case_index, case in enumerate(spec["cases"]):
        n, k = int(case["n"]), int(case["k"])
        for theta_index, theta_name in enumerate(spec["thetas"]):
            keys = sorted(key for key in results if key[:2] == (case_index, theta_index))
            parts = [results[key] for key in keys]
            missing = [key for key in failures if key[:2] == (case_index, theta_index)]
            samples = sum(p["samples"] for p in parts)
            violations = sum(p["violations"] for p in parts)
            worst = max((p["max_ratio"] for p in parts), default=0.0)
            constant = algebra_constant(k, n) if kind == "algebra" else l1_embedding_constant(k, n)
            row = {"n": n, "k": k, "theta": theta_name, "samples": samples, "constant": constant,
                   "max_normalized_ratio": worst, "violations": violations}
            if kind == "embedding":
                row["partial_sum_constant"] = l1_embedding_constant(k, n, tail=False)
            rows.append(row)
            checks.append(Check(f"{kind} n={n} k={k} theta={theta_name}",
                                violations == 0 and not missing and samples == spec["samples"],
                                f"violations={violations} samples={samples} failed_chunks={len(missing)}"))
    columns = ["n", "k", "theta", "samples", "constant", "max_normalized_ratio", "violations"]
    if kind == "embedding":
        columns.append("partial_sum_constant")
    return CommandResult(kind, columns, rows, checks, key_columns=["n", "k", "theta"])


def run_algebra(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    return _sampled_inequality(spec, context, "algebra")


def run_embedding(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    return _sampled_inequality(spec, context, "embedding")


# ---------------------------------------------------------------- lattice-core


LAWS = ("cocycle", "associativity", "traciality", "plancherel", "adjoint", "reorder")


def laws_chunk(task: dict) -> dict:
    n, radius, tol = task["n"], task["radius"], task["tol"]
    theta = parse_theta("golden", n)
    stats = {law: {"cases": 0, "violations": 0, "max_error": 0.0} for law in LAWS}

    def record(law: str, error: float, scale: float = 1.0):
        entry = stats[law]
        entry["cases"] += 1
        entry["max_error"] = max(entry["max_error"], error / max(1.0, scale))
        entry["violations"] += int(error > tol * max(1.0, scale))

    for i in range(*task["range"]):
        rng = np.random.default_rng([task["seed"], n, i])
        r, s, t = (rng.integers(-5, 6, size=n) for _ in range(3))
        left = cocycle(theta, r, s) * cocycle(theta, r + s, t)
        right = cocycle(theta, r, s + t) * cocycle(theta, s, t)
        record("cocycle", abs(left - right))

        a, b, c = (random_element(theta, radius, 2.0, seed=int(rng.integers(2 ** 32))) for _ in range(3))
        ab = multiply(a, b)
        first, second = multiply(ab, c), multiply(a, multiply(b, c))
        record("associativity", first.max_difference(second), float(np.max(np.abs(first.coeffs))))

        ba = multiply(b, a)
        record("traciality", abs(trace(ab) - trace(ba)), abs(trace(ab)))

        squared = float(np.sum(np.abs(a.coeffs) ** 2))
        record("plancherel", abs(trace(multiply(adjoint(a), a)) - squared), squared)

        star = adjoint(ab)
        record("adjoint", star.max_difference(multiply(adjoint(b), adjoint(a))),
               float(np.max(np.abs(star.coeffs))))

        length = int(rng.integers(1, 7))
        word = [(int(rng.integers(0, n)), int(rng.choice([-1, 1]))) for _ in range(length)]
        phase, exponents = symbolic_reorder(theta, word)
        product = NCElement.identity(theta)
        for j, e in word:
            product = multiply(product, NCElement.monomial(theta, [e if axis == j else 0 for axis in range(n)]))
        record("reorder", abs(product.coefficient(exponents) - phase))
    return stats


def run_laws(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    tasks = [{"key": (n, start), "kind": "laws", "n": int(n), "radius": int(spec["radius"]),
              "tol": float(spec["tol"]), "seed": spec.seed, "range": (start, stop)}
             for n in spec["dims"] for start, stop in _chunks(spec["cases"], spec["chunk"])]
    results, failures = context.pool.run(tasks, run_task)
    rows, checks = [], []
    for n in spec["dims"]:
        parts = [results[key] for key in sorted(results) if key[0] == n]
        for law in LAWS:
            cases = sum(p[law]["cases"] for p in parts)
            violations = sum(p[law]["violations"] for p in parts)
            worst = max((p[law]["max_error"] for p in parts), default=0.0)
            rows.append({"n": n, "law": law, "cases": cases, "violations": violations, "max_error": worst})
            failed = [key for key in failures if key[0] == n]
            checks.append(Check(f"{law} n={n}", violations == 0 and not failed and cases == spec["cases"],
                                f"violations={violations} max_error={worst:.3e}"))
    return CommandResult("laws", ["n", "law", "cases", "violations", "max_error"], rows, checks,
                         key_columns=["n", "law"])


# ---------------------------------------------------------------- regularization


def regularization_envelope(k: int, r: int, t: float, n: int, radius: int) -> float:
    """sup_m e^{−4π²|m|²t}(w_{k+r}(m)/w_k(m))^{1/2}/(1 + t^{−r/2})：Plancherel 端比值對所有資料的上確界"""
    points = LatticeBox(n, radius).points()
    gain = np.sqrt(w_weight(points, k + r) / w_weight(points, k)) * heat_symbol(points, t)
    return float(np.max(gain)) / (1.0 + t ** (-r / 2.0))


def run_regularize(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    n = spec["n"]
    theta = spec.theta()
    radius = spec["envelope_radius"]
    samples = [random_element(theta, spec["radius"], spec["sigma"], seed=spec.seed + i)
               for i in range(spec["samples"])]
    rows, checks = [], []
    for k, r in spec["orders"]:
        stable, dominated, finite = True, True, True
        for t in spec["t_values"]:
            coarse = regularization_envelope(k, r, t, n, radius)
            refined = regularization_envelope(k, r, t, n, 2 * radius)
            stable = stable and abs(refined - coarse) <= spec["envelope_tol"] * refined
            worst_w, worst_spectral, worst_hessian = 0.0, 0.0, 0.0
            for a in samples:
                image, ratio = sobolev_regularize(a, k, r, t)
                spectral = sobolev_w_norm_spectral(image, k + r) / (
                    (1.0 + t ** (-r / 2.0)) * sobolev_w_norm_spectral(a, k))
                worst_w = max(worst_w, ratio)
                worst_spectral = max(worst_spectral, spectral)
                worst_hessian = max(worst_hessian, hessian_bound_ratio(a, t))
            finite = finite and math.isfinite(worst_w)
            dominated = dominated and worst_spectral <= refined * (1.0 + 1e-12)
            rows.append({"k": k, "r": r, "t": t, "envelope": coarse, "envelope_refined": refined,
                         "max_ratio": worst_w, "max_ratio_spectral": worst_spectral,
                         "max_hessian_ratio": worst_hessian})
        checks.append(Check(f"regularization k={k} r={r} finite", finite))
        checks.append(Check(f"regularization k={k} r={r} stable under box refinement", stable))
        checks.append(Check(f"regularization k={k} r={r} below envelope", dominated))
    hessian_ok = all(row["max_hessian_ratio"] <= math.exp(-1.0) * (1.0 + 1e-12) for row in rows)
    checks.append(Check("hessian ratio below 1/e", hessian_ok))
    return CommandResult("regularize", ["k", "r", "t", "envelope", "envelope_refined", "max_ratio",
                                        "max_ratio_spectral", "max_hessian_ratio"],
                         rows, checks, key_columns=["k", "r", "t"])


# ---------------------------------------------------------------- semilinear-solver


def _trajectory_rows(trajectory, residuals) -> List[Dict[str, Any]]:
    return [{"t": t + trajectory.time_offset, "h_k_norm": trajectory.h_k_norms[i],
             "h_k1_norm": trajectory.h_k1_norms[i], "residual": residuals[i],
             "shell_mass": trajectory.shell_masses[i] if trajectory.shell_masses else math.nan}
            for i, t in enumerate(trajectory.times)]


def _constant_mode_value(u0: NCElement) -> complex:
    zero = (0,) * u0.n
    if u0.size != 1 or tuple(int(x) for x in u0.points[0]) != zero:
        raise ConfigError("oracle", "constant-quadratic oracle 需要 u₀ = c·U^0")
    return u0.coefficient(zero)


def run_solve(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    u0 = spec.initial_datum(theta)
    checks = []

    cfg = spec.solver_config(T_end=spec["picard_T_end"], scheme="picard")
    trajectory = picard_continue(u0, polynomial, cfg, context.log_writer)
    residuals = mild_residual(trajectory, polynomial, cfg)
    write_trajectory(context.artifact_dir("solve", "picard"), trajectory, residuals)
    scale = max(1.0, max(trajectory.h_k_norms))
    checks.append(Check("picard completed", trajectory.status == "completed", trajectory.status))
    checks.append(Check("picard contraction", trajectory.max_contraction <= spec["contraction_max"],
                        f"max factor={trajectory.max_contraction:.4f}"))
    checks.append(Check("mild residual", max(residuals) <= 10.0 * cfg.picard_tol * scale,
                        f"max residual={max(residuals):.3e}"))

    summary: Dict[str, Any] = {"picard": trajectory.summary()}
    t_max: Optional[float] = None
    if spec["oracle"] == "constant-quadratic":
        c = _constant_mode_value(u0)
        t_max = float((1.0 / c).real)
        zero = (0,) * theta.n
        errors = [abs(state.coefficient(zero) - c / (1.0 - c * t)) / abs(c / (1.0 - c * t))
                  for t, state in zip(trajectory.times, trajectory.states)]
        checks.append(Check("scalar ODE oracle", max(errors) <= spec["oracle_tol"],
                            f"max relative error={max(errors):.3e}"))
        summary["oracle_max_relative_error"] = max(errors)
    elif spec["oracle"] is not None:
        raise ConfigError("oracle", f"未知的 oracle '{spec['oracle']}'")

    if spec["blowup_T_end"]:
        blow_cfg = spec.solver_config(T_end=spec["blowup_T_end"], scheme="exp-euler")
        blowup = solve_until_blowup(u0, polynomial, blow_cfg, context.log_writer)
        write_trajectory(context.artifact_dir("solve", "blowup"), blowup)
        summary["blowup"] = blowup.summary()
        if t_max is not None:
            interval = blowup.t_max_interval
            contains = interval is not None and interval[0] <= t_max <= interval[1]
            checks.append(Check("T_max interval contains oracle", contains, f"interval={interval}"))
            estimate = blowup.t_max_estimate
            close = estimate is not None and abs(estimate - t_max) <= 0.01 * t_max
            checks.append(Check("T_max estimate within 1%", close, f"estimate={estimate}"))
        else:
            checks.append(Check("blow-up run terminated", blowup.status != "tolerance_failure", blowup.status))

    return CommandResult("solve", TRAJECTORY_FIELDS, _trajectory_rows(trajectory, residuals), checks,
                         key_columns=["t"], summary=summary)


def run_blowup(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    u0 = spec.initial_datum(theta)
    rows, checks = [], []
    extrapolated = []
    for threshold in spec["thresholds"]:
        cfg = spec.solver_config(threshold=float(threshold), scheme="exp-euler")
        trajectory = solve_until_blowup(u0, polynomial, cfg, context.log_writer)
        crossing = trajectory.extras.get("crossing_times")
        row = {"threshold": float(threshold), "status": trajectory.status,
               "crossing_coarse": math.nan, "crossing_fine": math.nan, "crossing_extrapolated": math.nan,
               "t_max_low": math.nan, "t_max_high": math.nan, "t_max_estimate": math.nan}
        if crossing:
            value = 2.0 * crossing[1] - crossing[0]
            extrapolated.append(value)
            row.update({"crossing_coarse": crossing[0], "crossing_fine": crossing[1],
                        "crossing_extrapolated": value, "t_max_low": trajectory.t_max_interval[0],
                        "t_max_high": trajectory.t_max_interval[1], "t_max_estimate": trajectory.t_max_estimate})
        rows.append(row)
        checks.append(Check(f"blowup detected threshold={threshold:g}", trajectory.status == "blowup_detected"))

    increasing = len(extrapolated) == len(spec["thresholds"]) and all(
        later > earlier for earlier, later in zip(extrapolated, extrapolated[1:]))
    checks.append(Check("crossing time increases with threshold", increasing))
    oracle = spec["oracle_t_max"]
    if oracle is not None:
        bounded = bool(extrapolated) and all(value <= oracle + spec["bound_slack"] for value in extrapolated)
        checks.append(Check("crossing time bounded by oracle T_max", bounded))
        contains = all(row["t_max_low"] <= oracle <= row["t_max_high"] for row in rows
                       if row["status"] == "blowup_detected")
        checks.append(Check("T_max intervals contain oracle", contains))
    return CommandResult("blowup", ["threshold", "status", "crossing_coarse", "crossing_fine",
                                    "crossing_extrapolated", "t_max_low", "t_max_high", "t_max_estimate"],
                         rows, checks, key_columns=["threshold"])


def run_smoothing(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    u0 = spec.initial_datum(theta)
    rows, checks, maxima = [], [], []
    summary = {}
    for steps in spec["refinements"]:
        cfg = spec.solver_config(min_window_steps=int(steps))
        trajectory = picard_solve(u0, polynomial, cfg, log_writer=context.log_writer)
        report = smoothing_monitor(trajectory, polynomial, cutoff=cfg.cutoff)
        checks.append(Check(f"picard completed steps={steps}", trajectory.status == "completed", trajectory.status))
        maxima.append(report.max_ratio)
        summary[str(steps)] = {"M_T": report.sup_nonlinearity, "max_ratio": report.max_ratio,
                               "first_time": report.times[0] if report.times else None}
        for t, ratio in zip(report.times, report.ratios):
            rows.append({"steps": int(steps), "t": t, "ratio": ratio})
    checks.append(Check("smoothing ratio finite", all(math.isfinite(m) for m in maxima)))
    trend = all(later <= earlier * (1.0 + spec["trend_tol"]) for earlier, later in zip(maxima, maxima[1:]))
    checks.append(Check("no growth under t -> 0 refinement", trend, f"max ratios={maxima}"))
    return CommandResult("smoothing", ["steps", "t", "ratio"], rows, checks,
                         key_columns=["steps", "t"], summary=summary)


def run_bootstrap(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    u0 = spec.initial_datum(theta)
    r = int(spec["r"])
    rows, checks, profiles = [], [], []
    for steps in spec["refinements"]:
        cfg = spec.solver_config(min_window_steps=int(steps))
        trajectory = bootstrap_regularity(u0, polynomial, cfg, r, float(spec["epsilon"]), context.log_writer)
        checks.append(Check(f"bootstrap completed steps={steps}", trajectory.status == "completed",
                            trajectory.status))
        stages = trajectory.extras.get("stage_norms", [])
        profile = [stage["norm"] for stage in stages] + [trajectory.h_k_norms[-1]]
        profiles.append(profile)
        for stage in stages:
            rows.append({"steps": int(steps), "stage": stage["stage"], "time": stage["time"],
                         "order": stage["order"], "norm": stage["norm"]})
        rows.append({"steps": int(steps), "stage": r + 1, "time": trajectory.time_offset + trajectory.final_time,
                     "order": trajectory.k, "norm": trajectory.h_k_norms[-1]})
    finite = all(math.isfinite(value) for profile in profiles for value in profile)
    checks.append(Check("bootstrap norms finite", finite))
    stable = all(len(p) == len(profiles[0]) for p in profiles) and all(
        abs(a - b) <= spec["refinement_tol"] * max(abs(a), abs(b))
        for p in profiles[1:] for a, b in zip(profiles[0], p))
    checks.append(Check("bootstrap norms stable under grid refinement", stable))
    return CommandResult("bootstrap", ["steps", "stage", "time", "order", "norm"], rows, checks,
                         key_columns=["steps", "stage"])


def dependence_chunk(task: dict) -> dict:
    spec = ExperimentSpec.from_dict(task["spec"])
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    cfg = spec.solver_config()
    radius = spec["initial_datum"]["random"]["radius"] if isinstance(spec["initial_datum"], dict) \
        and "random" in spec["initial_datum"] else 2
    output = {}
    for i in range(*task["range"]):
        u0 = spec.initial_datum(theta, seed_offset=i)
        delta = random_element(theta, int(radius), 2.0, seed=spec.seed + 1_000_000 + i,
                               amplitude=float(spec["perturbation"]))
        report = continuous_dependence(u0, u0 + delta, polynomial, cfg)
        output[i] = {"initial_difference": report.initial_difference, "sup_difference": report.sup_difference,
                     "gronwall_bound": report.gronwall_bound, "holds": report.holds,
                     "max_contraction": report.max_contraction, "horizon": report.horizon}
    return output


def run_dependence(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    tasks = [{"key": (start,), "kind": "dependence", "spec": spec.to_dict(), "range": (start, stop)}
             for start, stop in _chunks(spec["pairs"], spec["chunk"])]
    results, failures = context.pool.run(tasks, run_task)
    rows = []
    for key in sorted(results):
        for pair, values in sorted(results[key].items()):
            rows.append(dict({"pair": pair}, **values))
    violations = sum(1 for row in rows if not row["holds"])
    worst = max((row["max_contraction"] for row in rows), default=math.inf)
    checks = [
        Check("gronwall bound", violations == 0 and len(rows) == spec["pairs"] and not failures,
              f"violations={violations} pairs={len(rows)}"),
        Check("picard contraction", worst <= spec["contraction_max"], f"max factor={worst:.4f}"),
    ]
    return CommandResult("dependence", ["pair", "initial_difference", "sup_difference", "gronwall_bound",
                                        "holds", "max_contraction", "horizon"],
                         rows, checks, key_columns=["pair"])


def run_convergence(spec: ExperimentSpec, context: RunContext) -> CommandResult:
    theta = spec.theta()
    polynomial = spec.polynomial(theta)
    u0 = spec.initial_datum(theta)
    cfg = spec.solver_config()
    report = scheme_convergence(u0, polynomial, cfg, [int(m) for m in spec["refinements"]],
                                int(spec["reference_steps"]), context.log_writer)
    rows = []
    for i, (steps, error) in enumerate(zip(report.steps, report.errors)):
        order = report.orders[i] if i < len(report.orders) else math.nan
        rows.append({"steps": steps, "h": report.horizon / steps, "error": error, "observed_order": order})
    ok = bool(report.orders) and all(abs(order - 1.0) <= spec["order_tol"] for order in report.orders)
    checks = [Check("exp-Euler first order", ok, f"orders={[round(o, 4) for o in report.orders]}")]
    return CommandResult("convergence", ["steps", "h", "error", "observed_order"], rows, checks,
                         key_columns=["steps"], summary={"horizon": report.horizon})


COMMAND_HANDLERS: Dict[str, Callable[[ExperimentSpec, RunContext], CommandResult]] = {
    "rates": run_rates,
    "sharpness": run_sharpness,
    "kernel-scaling": run_kernel_scaling,
    "bracket": run_bracket,
    "algebra": run_algebra,
    "embedding": run_embedding,
    "laws": run_laws,
    "regularize": run_regularize,
    "solve": run_solve,
    "blowup": run_blowup,
    "smoothing": run_smoothing,
    "bootstrap": run_bootstrap,
    "dependence": run_dependence,
    "convergence": run_convergence,
}

TASK_HANDLERS = {
    "algebra": algebra_chunk,
    "embedding": embedding_chunk,
    "laws": laws_chunk,
    "dependence": dependence_chunk,
}


def run_task(task: dict) -> Any:
    """worker 進入點：依 task["kind"] 分派"""
    return TASK_HANDLERS[task["kind"]](task)
