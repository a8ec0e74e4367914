import argparse
import hashlib
import multiprocessing
import os
import sys
import time
from datetime import datetime

from dotenv import load_dotenv

# 載入環境變數
load_dotenv()

from experiments.commands import COMMAND_HANDLERS, RunContext
from experiments.spec import COMMANDS, load_spec
from lattice.errors import ConfigError, DimensionMismatchError, DivergentSeriesError
from reporter.report_generation import ReportGenerationAgent
from utils.extract_failed_checks import extract_failed_checks_from_json
from utils.log_writer import LogWriter
from utils.worker_pool import WorkerPool

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

# 這些錯誤代表設定本身不合法（缺鍵、維度不一致、k ≤ n/2）
CONFIG_ERRORS = (ConfigError, DimensionMismatchError, DivergentSeriesError)


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value == "":
        return default
    try:
        return int(value)
    except ValueError:
        print(f"⚠️ 環境變數 {name}={value!r} 不是整數，改用預設值 {default}")
        return default


def run_command(command: str, args, reporter: ReportGenerationAgent, log_writer: LogWriter) -> dict:
    """
    執行單一子命令：寫出 CSV，回傳 summary.json 中該子命令的區塊
    """
    config = args.config if args.command != "all" else None
    spec = load_spec(command, config, reporter.output_dir, args.seed, args.threads, args.max_mem_mb)
    log_writer.log(f"\n🔍 [{command}] spec_hash={spec.spec_hash} seed={spec.seed}")
    log_writer.log_only(f"[{command}] params={spec.params}")

    pool = WorkerPool(spec.threads, spec.max_mem_mb, log_writer)
    context = RunContext(reporter.output_dir, pool, log_writer)
    start_time = time.time()
    result = COMMAND_HANDLERS[command](spec, context)
    duration = time.time() - start_time

    csv_path = reporter.write_command_csv(command, result.columns, result.sorted_rows(), spec.spec_hash, spec.seed)
    for check in result.checks:
        mark = "✅" if check.passed else "❌"
        log_writer.log(f"  {mark} {check.name} {check.detail}")
    log_writer.log(f"📊 [{command}] {sum(c.passed for c in result.checks)}/{len(result.checks)} 項檢查通過，"
          f"耗時 {duration:.1f} 秒，CSV: {csv_path}")

    return {
        "spec_hash": spec.spec_hash,
        "seed": spec.seed,
        "csv": os.path.basename(csv_path),
        "passed": result.passed,
        "duration": duration,
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in result.checks],
        "summary": result.summary,
    }


def main():
    """
    主函數
    """
    parser = argparse.ArgumentParser(description='非交換環面熱半群與半線性熱方程實驗工具')
    parser.add_argument('command', choices=list(COMMANDS) + ['all'],
                        help='要執行的子命令；all 以預設值依序執行全部子命令')
    parser.add_argument('--config', type=str, default=None,
                        help='JSON 設定檔路徑（覆寫子命令預設值）')
    parser.add_argument('--out', type=str, default=os.getenv('NCTORUS_OUTPUT_DIR', 'output'),
                        help='輸出目錄 (預設: $NCTORUS_OUTPUT_DIR 或 output)')
    parser.add_argument('--seed', type=int, default=None,
                        help='亂數種子（優先於設定檔中的 seed）')
    parser.add_argument('--threads', type=int, default=_env_int('NCTORUS_THREADS', 1),
                        help='參數掃描的 worker 數量 (預設: $NCTORUS_THREADS 或 1)')
    parser.add_argument('--check', action='store_true',
                        help='執行驗收檢查，任一檢查失敗時結束碼為 1')
    parser.add_argument('--max-mem-mb', type=int, default=_env_int('NCTORUS_MAX_MEM_MB', 1024),
                        help='worker 記憶體上限 (MB)，超過此值將自動重啟 (預設: 1024)')

    args = parser.parse_args()

    if args.config and not os.path.exists(args.config):
        print(f"❌ 找不到設定檔案 {args.config}")
        sys.exit(EXIT_CONFIG_ERROR)
    if args.command == "all" and args.config:
        print("⚠️ all 模式以各子命令預設值執行，忽略 --config")

    commands = list(COMMANDS) if args.command == "all" else [args.command]
    reporter = ReportGenerationAgent(args.out)
    reporter.initialize_excel_report()

    summary = {"command": args.command, "commands": {}}
    config_failed = False
    start_time = time.time()

    with LogWriter(log_dir=args.out) as log_writer:
        log_writer.log(f"🚀 執行 {len(commands)} 個子命令，輸出目錄: {args.out}，worker: {args.threads}")
        print(f"📝 Log: {log_writer.get_log_file_path()}")
        for command in commands:
            run_date = datetime.now().strftime('%Y-%m-%d %H:%M')
            command_start = time.time()
            try:
                entry = run_command(command, args, reporter, log_writer)
            except CONFIG_ERRORS as e:
                log_writer.log(f"❌ [{command}] 設定錯誤: {e}")
                config_failed = True
                entry = {"error": str(e), "passed": False, "checks": [], "config_error": True}
            except Exception as e:
                log_writer.log(f"💥 [{command}] 執行時發生錯誤: {e!r}")
                entry = {"error": str(e), "passed": False, "checks": []}
            summary["commands"][command] = entry

            try:
                reporter.add_experiment_to_excel({
                    "command": command,
                    "spec_hash": entry.get("spec_hash", ""),
                    "seed": entry.get("seed", ""),
                    "checks": len(entry["checks"]),
                    "passed": sum(1 for c in entry["checks"] if c["passed"]),
                    "failed": sum(1 for c in entry["checks"] if not c["passed"]),
                    "error": entry.get("error"),
                    "duration": time.time() - command_start,
                    "run_date": run_date,
                }, log_writer)
            except Exception as e:
                print(f"❌ 寫入 Excel 失敗: {e}")

    reporter.finalize_excel_report()

    hashes = "".join(entry.get("spec_hash", "") for entry in summary["commands"].values())
    summary["spec_hash"] = hashlib.sha256(hashes.encode("utf-8")).hexdigest()[:16]
    summary["seed"] = args.seed
    summary["passed"] = all(entry["passed"] for entry in summary["commands"].values())
    summary_path = reporter.write_summary_json(summary)
    failed_path = extract_failed_checks_from_json(summary_path)

    total_duration = time.time() - start_time
    print(f"\n{'='*50}")
    print(f"📄 摘要: {summary_path}")
    if failed_path:
        print(f"⚠️ 未通過的檢查: {failed_path}")
    print(f"⏱️ 總耗時: {total_duration:.1f} 秒")

    if config_failed:
        sys.exit(EXIT_CONFIG_ERROR)
    if args.check and not summary["passed"]:
        sys.exit(EXIT_CHECK_FAILED)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    multiprocessing.freeze_support()
    main()
