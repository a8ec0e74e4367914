import json
import math
import time

import numpy as np
import pytest

from experiments.commands import (COMMAND_HANDLERS, CommandResult, Check, RunContext, run_laws, run_rates,
                                  run_sharpness)
from experiments.fitting import band_ratio, fit_loglog
from experiments.spec import ExperimentSpec, load_spec, parse_theta
from lattice.errors import ConfigError, NCTorusError
from lattice.nc_element import ThetaMatrix
from reporter.report_generation import ReportGenerationAgent
from utils.worker_pool import WorkerPool


def _write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


# --- 設定檔 ---


def test_defaults_without_config():
    spec = load_spec("rates")
    assert spec["t_exponents"] == [6, 16]
    assert spec.seed == 0


def test_unknown_key_rejected(tmp_path):
    path = _write_config(tmp_path, {"command": "rates", "t_exponent": [1, 2]})
    with pytest.raises(ConfigError, match="t_exponent"):
        load_spec("rates", path)


def test_command_mismatch_rejected(tmp_path):
    path = _write_config(tmp_path, {"command": "algebra"})
    with pytest.raises(ConfigError, match="algebra"):
        load_spec("rates", path)


def test_unknown_command_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_spec("heat")
    with pytest.raises(ConfigError):
        load_spec("rates", str(tmp_path / "missing.json"))


def test_malformed_json_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_spec("rates", str(path))


def test_cli_seed_overrides_file_seed(tmp_path):
    path = _write_config(tmp_path, {"seed": 7})
    assert load_spec("laws", path).seed == 7
    assert load_spec("laws", path, seed=3).seed == 3
    with pytest.raises(ConfigError, match="seed"):
        load_spec("laws", seed=-1)


def test_invalid_dimension_rejected(tmp_path):
    path = _write_config(tmp_path, {"n": 0})
    with pytest.raises(ConfigError, match="n"):
        load_spec("solve", path)


def test_spec_hash_depends_on_params_and_seed():
    first = load_spec("laws", seed=1)
    assert first.spec_hash == load_spec("laws", seed=1).spec_hash
    assert first.spec_hash != load_spec("laws", seed=2).spec_hash
    assert len(first.spec_hash) == 16


def test_missing_key_lookup():
    spec = load_spec("rates")
    with pytest.raises(ConfigError, match="cutoff"):
        spec["cutoff"]


def test_spec_dict_round_trip():
    spec = load_spec("bracket", seed=5)
    restored = ExperimentSpec.from_dict(spec.to_dict())
    assert restored.spec_hash == spec.spec_hash


def test_parse_theta_variants():
    assert not np.any(parse_theta("zero", 2).entries)
    assert parse_theta("golden", 2).same_as(ThetaMatrix.golden(2))
    explicit = parse_theta([[0.0, -0.25], [0.25, 0.0]], 2)
    assert explicit.n == 2
    with pytest.raises(ConfigError):
        parse_theta([[0.0, 0.0], [0.0, 0.0]], 3)
    with pytest.raises(ConfigError):
        parse_theta("pi", 2)


def test_random_initial_datum_follows_seed(tmp_path):
    path = _write_config(tmp_path, {"initial_datum": {"random": {"radius": 2, "sigma": 1.0}}})
    theta = ThetaMatrix.zero(1)
    a = load_spec("solve", path, seed=4).initial_datum(theta)
    b = load_spec("solve", path, seed=4).initial_datum(theta)
    c = load_spec("solve", path, seed=5).initial_datum(theta)
    assert a.allclose(b, atol=0.0)
    assert not a.allclose(c, atol=1e-12)


def test_random_initial_datum_rejects_unknown_option(tmp_path):
    path = _write_config(tmp_path, {"initial_datum": {"random": {"width": 2}}})
    spec = load_spec("solve", path)
    with pytest.raises(ConfigError, match="width"):
        spec.initial_datum(ThetaMatrix.zero(1))


def test_default_initial_datum_is_identity():
    spec = load_spec("solve")
    assert spec.initial_datum(ThetaMatrix.zero(1)).as_dict() == {(0,): 1.0 + 0j}


def test_solver_config_errors_become_config_errors(tmp_path):
    path = _write_config(tmp_path, {"picard_step": -1.0})
    with pytest.raises(ConfigError, match="solver"):
        load_spec("solve", path).solver_config()


# --- 擬合 ---


def test_fit_recovers_power_law():
    xs = [2.0 ** (-j) for j in range(4, 12)]
    ys = [3.0 * x ** -1.5 for x in xs]
    fit = fit_loglog(xs, ys)
    assert fit.slope == pytest.approx(-1.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.within(-1.5, 0.01, 0.999)
    assert not fit.within(-1.0, 0.01, 0.999)


def test_fit_rejects_bad_input():
    with pytest.raises(NCTorusError):
        fit_loglog([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(NCTorusError):
        fit_loglog([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])


def test_band_ratio():
    assert band_ratio([2.0, 4.0, 8.0]) == 4.0
    with pytest.raises(NCTorusError):
        band_ratio([])


# --- worker pool 與子命令 ---


def _square(task: dict) -> int:
    if task["value"] < 0:
        raise ValueError("negative")
    return task["value"] ** 2


def test_inline_pool_collects_failures():
    pool = WorkerPool(threads=1)
    tasks = [{"key": i, "value": v} for i, v in enumerate([1, -2, 3])]
    results, failures = pool.run(tasks, _square)
    assert results == {0: 1, 2: 9}
    assert failures == {1: "negative"}


def test_process_pool_matches_inline():
    tasks = [{"key": i, "value": i} for i in range(6)]
    inline, _ = WorkerPool(threads=1).run(tasks, _square)
    parallel, failures = WorkerPool(threads=2, timeout=60.0).run(tasks, _square)
    assert failures == {}
    assert parallel == inline


def test_command_result_sorts_by_key_columns():
    rows = [{"n": 2, "law": "b"}, {"n": 1, "law": "z"}, {"n": 2, "law": "a"}]
    result = CommandResult("laws", ["n", "law"], rows, [Check("x", True)], key_columns=["n", "law"])
    assert [(r["n"], r["law"]) for r in result.sorted_rows()] == [(1, "z"), (2, "a"), (2, "b")]
    assert result.passed


def test_laws_command_passes(tmp_path):
    path = _write_config(tmp_path, {"dims": [2], "cases": 4, "chunk": 2})
    spec = load_spec("laws", path, seed=1)
    result = run_laws(spec, RunContext(str(tmp_path), WorkerPool(1)))
    assert len(result.rows) == 6
    assert all(row["cases"] == 4 for row in result.rows)
    assert result.passed, [c for c in result.checks if not c.passed]


def test_laws_command_is_independent_of_chunking(tmp_path):
    coarse = load_spec("laws", _write_config(tmp_path, {"dims": [2], "cases": 4, "chunk": 4}, "a.json"))
    fine = load_spec("laws", _write_config(tmp_path, {"dims": [2], "cases": 4, "chunk": 1}, "b.json"))
    context = RunContext(str(tmp_path), WorkerPool(1))
    first = run_laws(coarse, context).sorted_rows()
    second = run_laws(fine, context).sorted_rows()
    assert [r["max_error"] for r in first] == [r["max_error"] for r in second]


def test_rates_command_on_fine_times(tmp_path):
    path = _write_config(tmp_path, {"dims": [1], "t_exponents": [10, 16]})
    result = run_rates(load_spec("rates", path), RunContext(str(tmp_path), WorkerPool(1)))
    assert len(result.rows) == 4
    assert result.passed
    slopes = {(row["alpha"], row["ell"]): row["slope"] for row in result.rows}
    assert np.isclose(slopes[("(0)", 1)], -1.0, atol=0.05)


# --- sharpness ---


class _Recorder:
    def __init__(self):
        self.lines = []

    def log_only(self, message: str):
        self.lines.append(message)


def test_sharpness_defaults_span_five_decades_per_dimension(tmp_path):
    recorder = _Recorder()
    result = run_sharpness(load_spec("sharpness"), RunContext(str(tmp_path), WorkerPool(1), recorder))
    assert result.passed, [c for c in result.checks if not c.passed]
    for n in (1, 2):
        times = sorted({row["t"] for row in result.rows if row["n"] == n})
        assert math.log10(times[-1] / times[0]) >= 5.0 - 1e-9
        assert all(row["k_t"] >= 1 for row in result.rows if row["n"] == n)
    assert not [line for line in recorder.lines if "k_t = 0" in line]


def test_sharpness_logs_and_flags_unusable_times(tmp_path):
    path = _write_config(tmp_path, {"dims": [2], "t_exponents": [2, 7]})
    recorder = _Recorder()
    result = run_sharpness(load_spec("sharpness", path), RunContext(str(tmp_path), WorkerPool(1), recorder))
    assert any("k_t = 0" in line and "n=2" in line for line in recorder.lines)
    decades = [c for c in result.checks if c.name == "sharpness decades n=2"]
    assert len(decades) == 1 and not decades[0].passed
    assert all(row["t"] < 1e-2 for row in result.rows)


def test_sharpness_requires_range_for_each_dimension(tmp_path):
    path = _write_config(tmp_path, {"dims": [1, 3], "t_exponents": {"1": [2, 7]}})
    with pytest.raises(ConfigError, match="t_exponents"):
        run_sharpness(load_spec("sharpness", path), RunContext(str(tmp_path), WorkerPool(1)))


@pytest.mark.slow
def test_sharpness_defaults_finish_within_a_second(tmp_path):
    spec = load_spec("sharpness")
    start = time.perf_counter()
    result = run_sharpness(spec, RunContext(str(tmp_path), WorkerPool(1)))
    assert time.perf_counter() - start < 1.0
    assert result.passed


# --- 各子命令的小型設定 ---


COMMAND_CASES = [
    ("sharpness", {"dims": [1], "t_exponents": [2, 7]}),
    ("kernel-scaling", {"t_values": [1e-3, 3e-3, 1e-2, 3e-2]}),
    ("bracket", {"dims": [1], "orders": [1, 2], "t_values": [1e-2, 1e-1]}),
    ("algebra", {"samples": 20, "chunk": 10}),
    ("embedding", {"samples": 20, "chunk": 10}),
    ("regularize", {"samples": 3, "t_values": [1e-2, 1e-1], "envelope_radius": 16}),
    ("blowup", {"thresholds": [1e2, 1e3]}),
    ("dependence", {"pairs": 4, "chunk": 2}),
    pytest.param("solve", {}, marks=pytest.mark.slow),
    pytest.param("smoothing", {}, marks=pytest.mark.slow),
    pytest.param("bootstrap", {}, marks=pytest.mark.slow),
    pytest.param("convergence", {}, marks=pytest.mark.slow),
]


@pytest.mark.parametrize(("command", "overrides"), COMMAND_CASES)
def test_command_passes_on_small_config(tmp_path, command, overrides):
    spec = load_spec(command, _write_config(tmp_path, overrides), seed=2)
    result = COMMAND_HANDLERS[command](spec, RunContext(str(tmp_path), WorkerPool(1)))
    assert result.command == command
    assert result.rows and result.checks
    assert result.passed, [c for c in result.checks if not c.passed]
    missing = [column for column in result.columns if any(column not in row for row in result.rows)]
    assert not missing


@pytest.mark.parametrize(("command", "overrides"), [
    ("algebra", {"samples": 12, "chunk": 5}),
    ("blowup", {"thresholds": [1e2]}),
])
def test_command_csv_is_byte_identical_across_runs(tmp_path, command, overrides):
    path = _write_config(tmp_path, overrides)
    contents = []
    for name in ("first", "second"):
        spec = load_spec(command, path, seed=9)
        result = COMMAND_HANDLERS[command](spec, RunContext(str(tmp_path / name), WorkerPool(1)))
        reporter = ReportGenerationAgent(str(tmp_path / name))
        csv_path = reporter.write_command_csv(command, result.columns, result.sorted_rows(),
                                              spec.spec_hash, spec.seed)
        with open(csv_path, "rb") as f:
            contents.append(f.read())
    assert contents[0] == contents[1]
    assert contents[0].startswith(b"# spec_hash=")
