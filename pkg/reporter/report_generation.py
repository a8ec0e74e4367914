import csv
import json
import math
import os
from typing import Any, Dict, List, Sequence

from openpyxl import Workbook, load_workbook

EXCEL_HEADERS = ['子命令', 'spec_hash', 'seed', '檢查數', '通過', '失敗', '結果', '耗時(秒)', '執行時間']


def format_value(value: Any) -> str:
    """CSV 欄位值：浮點數用 repr 以便位元相同地重現"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    if isinstance(value, (list, tuple)):
        return ";".join(format_value(v) for v in value)
    return str(value)


class ReportGenerationAgent:
    """
    實驗輸出：每個子命令一份 CSV、一份 summary.json，以及累積的 experiment_summary.xlsx
    """

    def __init__(self, output_dir: str = "output"):
        self.output_dir = output_dir
        self.workbook = None
        self.worksheet = None
        self.output_path = None
        self.current_row = 2  # 從第2行開始寫入資料（第1行是標題）

        os.makedirs(output_dir, exist_ok=True)

    def write_command_csv(self, command: str, columns: Sequence[str], rows: List[Dict[str, Any]],
                          spec_hash: str, seed: int) -> str:
        """首行為 '# spec_hash=... seed=...' 註解，其後為欄位標頭與資料"""
        path = os.path.join(self.output_dir, f"{command}.csv")
        with open(path, 'w', newline='', encoding='utf-8') as csvfile:
            csvfile.write(f"# spec_hash={spec_hash} seed={seed}\n")
            writer = csv.writer(csvfile)
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(column)) for column in columns])
        return path

    def write_summary_json(self, summary: Dict[str, Any]) -> str:
        path = os.path.join(self.output_dir, "summary.json")
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(summary, f, ensure_ascii=False, indent=2, sort_keys=True, default=str)
        return path

    def initialize_excel_report(self) -> str:
        """
        初始化 Excel 摘要檔案；已存在時載入並接續寫入（保留歷次執行紀錄）
        """
        self.output_path = os.path.join(self.output_dir, "experiment_summary.xlsx")

        if os.path.exists(self.output_path):
            try:
                self.workbook = load_workbook(self.output_path)
                self.worksheet = self.workbook.active
                self.current_row = self.worksheet.max_row + 1
                print(f"📁 已載入現有摘要，將從第 {self.current_row} 行繼續寫入")
                return self.output_path
            except Exception as e:
                print(f"⚠️ 載入現有摘要失敗: {e}，將建立新的檔案")

        self.workbook = Workbook()
        self.worksheet = self.workbook.active
        self.worksheet.title = '實驗摘要'

        for col, header in enumerate(EXCEL_HEADERS, 1):
            self.worksheet.cell(row=1, column=col, value=header)

        column_widths = [16, 20, 10, 10, 8, 8, 8, 12, 20]
        for col, width in enumerate(column_widths, 1):
            self.worksheet.column_dimensions[chr(64 + col)].width = width

        self.current_row = 2
        self.workbook.save(self.output_path)
        return self.output_path

    def add_experiment_to_excel(self, stats: Dict[str, Any], log_writer=None) -> None:
        """
        將單一子命令的統計寫入 Excel 並立即儲存
        """
        if not self.workbook or not self.worksheet:
            raise ValueError("Excel 報告尚未初始化，請先呼叫 initialize_excel_report()")

        def _log(message: str):
            """統一的日誌輸出方法"""
            if log_writer:
                log_writer.log_only(message)
            else:
                print(message)

        row_data = [
            stats['command'],
            stats['spec_hash'],
            stats['seed'],
            stats['checks'],
            stats['passed'],
            stats['failed'],
            'PASS' if stats['failed'] == 0 and not stats.get('error') else 'FAIL',
            round(stats['duration'], 3),
            stats['run_date'],
        ]
        for col, value in enumerate(row_data, 1):
            self.worksheet.cell(row=self.current_row, column=col, value=value)

        self.current_row += 1
        self.workbook.save(self.output_path)

        _log(f"已將 '{stats['command']}' 的結果寫入 Excel (第 {self.current_row - 1} 行)")

    def finalize_excel_report(self) -> None:
        if self.workbook:
            self.workbook.save(self.output_path)
            self.workbook.close()
            self.workbook = None
            self.worksheet = None
