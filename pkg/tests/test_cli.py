import csv
import json
import os
import subprocess
import sys

import pytest
from openpyxl import load_workbook

from reporter.report_generation import ReportGenerationAgent, format_value
from utils.extract_failed_checks import collect_failed_checks, extract_failed_checks_from_json
from utils.log_writer import LogWriter

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def _run_main(*args):
    return subprocess.run([sys.executable, os.path.join(ROOT, "main.py"), *args], cwd=ROOT,
                          capture_output=True, text=True, timeout=600)


# --- 報告 ---


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(1.0 / 3.0) == repr(1.0 / 3.0)
    assert format_value(float("inf")) == "inf"
    assert format_value(True) == "true"
    assert format_value(None) == ""
    assert format_value([1, 2.5]) == "1;2.5"


def test_command_csv_starts_with_provenance(tmp_path):
    reporter = ReportGenerationAgent(str(tmp_path))
    path = reporter.write_command_csv("rates", ["n", "slope"], [{"n": 1, "slope": -0.5}], "abc123", 7)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "# spec_hash=abc123 seed=7"
    assert list(csv.reader(lines[1:])) == [["n", "slope"], ["1", "-0.5"]]


def test_excel_summary_resumes(tmp_path):
    stats = {"command": "laws", "spec_hash": "h", "seed": 0, "checks": 2, "passed": 2, "failed": 0,
             "duration": 0.5, "run_date": "2026-01-01 00:00"}
    first = ReportGenerationAgent(str(tmp_path))
    first.initialize_excel_report()
    first.add_experiment_to_excel(stats)
    first.finalize_excel_report()

    second = ReportGenerationAgent(str(tmp_path))
    path = second.initialize_excel_report()
    assert second.current_row == 3
    second.add_experiment_to_excel(dict(stats, failed=1, passed=1))
    second.finalize_excel_report()

    sheet = load_workbook(path).active
    assert sheet.cell(row=2, column=7).value == "PASS"
    assert sheet.cell(row=3, column=7).value == "FAIL"


def test_excel_requires_initialization(tmp_path):
    with pytest.raises(ValueError):
        ReportGenerationAgent(str(tmp_path)).add_experiment_to_excel({})


# --- 失敗檢查擷取 ---


def _summary(passed: bool) -> dict:
    return {"commands": {
        "rates": {"checks": [{"name": "rate n=1", "passed": passed, "detail": "slope=-0.5"}]},
        "laws": {"checks": [{"name": "cocycle n=2", "passed": True, "detail": ""}]},
    }}


def test_collect_failed_checks_includes_errors():
    summary = _summary(True)
    summary["commands"]["algebra"] = {"error": "k must exceed n/2", "checks": []}
    assert collect_failed_checks(summary) == [{"command": "algebra", "check": "error",
                                               "detail": "k must exceed n/2"}]


def test_failed_checks_csv_written_only_on_failure(tmp_path):
    path = tmp_path / "summary.json"
    path.write_text(json.dumps(_summary(True)), encoding="utf-8")
    assert extract_failed_checks_from_json(path) is None

    path.write_text(json.dumps(_summary(False)), encoding="utf-8")
    output = extract_failed_checks_from_json(path)
    with open(output, encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert rows == [{"command": "rates", "check": "rate n=1", "detail": "slope=-0.5"}]


def test_missing_summary_returns_none(tmp_path):
    assert extract_failed_checks_from_json(tmp_path / "nothing.json") is None


# --- log ---


def test_log_writer_flushes_on_close(tmp_path):
    with LogWriter(log_dir=str(tmp_path), buffer_size=10) as writer:
        for i in range(25):
            writer.log_only(f"line {i}")
        path = writer.get_log_file_path()
    with open(path, encoding="utf-8") as f:
        content = f.read()
    assert "line 0" in content and "line 24" in content
    assert writer.lines_written == 25


def test_log_writer_log_echoes_to_terminal(tmp_path, capsys):
    with LogWriter(log_dir=str(tmp_path)) as writer:
        writer.log("📊 [rates] 3/3 項檢查通過")
        path = writer.get_log_file_path()
    assert "📊 [rates] 3/3 項檢查通過" in capsys.readouterr().out
    with open(path, encoding="utf-8") as f:
        assert "📊 [rates] 3/3 項檢查通過" in f.read()


# --- 命令列 ---


@pytest.mark.slow
def test_main_rates_check_passes(tmp_path):
    out = str(tmp_path / "out")
    completed = _run_main("rates", "--config", os.path.join(ROOT, "configs", "rates_quick.json"),
                          "--out", out, "--check", "--seed", "3")
    assert completed.returncode == 0, completed.stdout + completed.stderr
    with open(os.path.join(out, "rates.csv"), encoding="utf-8") as f:
        assert f.readline().startswith("# spec_hash=")
    with open(os.path.join(out, "summary.json"), encoding="utf-8") as f:
        summary = json.load(f)
    assert summary["passed"] is True
    assert summary["commands"]["rates"]["seed"] == 3
    assert os.path.exists(os.path.join(out, "experiment_summary.xlsx"))
    assert not os.path.exists(os.path.join(out, "failed_checks.csv"))


def test_main_divergent_algebra_is_config_error(tmp_path):
    out = str(tmp_path / "out")
    completed = _run_main("algebra", "--config", os.path.join(ROOT, "configs", "algebra_divergent.json"),
                          "--out", out)
    assert completed.returncode == 2
    with open(os.path.join(out, "summary.json"), encoding="utf-8") as f:
        entry = json.load(f)["commands"]["algebra"]
    assert entry["config_error"] is True
    assert "k must exceed n/2" in entry["error"]
    logs = [name for name in os.listdir(out) if name.startswith("run_log_")]
    assert len(logs) == 1
    with open(os.path.join(out, logs[0]), encoding="utf-8") as f:
        content = f.read()
    assert "[algebra] 設定錯誤" in content
    assert "[algebra] 設定錯誤" in completed.stdout


def test_main_missing_config_exits_with_config_error(tmp_path):
    completed = _run_main("rates", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path))
    assert completed.returncode == 2


def test_main_rejects_unknown_command(tmp_path):
    completed = _run_main("crawl", "--out", str(tmp_path))
    assert completed.returncode != 0
