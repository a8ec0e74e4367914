"""
從 summary.json 擷取未通過的檢查，寫成 failed_checks.csv
"""

import csv
import json
from pathlib import Path
from typing import Dict, List, Optional

FIELDNAMES = ['command', 'check', 'detail']


def write_to_csv(data_list: List[Dict[str, str]], output_file):
    """將結果寫入CSV檔案"""
    with open(output_file, 'w', newline='', encoding='utf-8') as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=FIELDNAMES)
        writer.writeheader()
        for item in data_list:
            writer.writerow(item)


def collect_failed_checks(summary: dict) -> List[Dict[str, str]]:
    failed = []
    for command, result in sorted(summary.get('commands', {}).items()):
        if result.get('error'):
            failed.append({'command': command, 'check': 'error', 'detail': result['error']})
        for check in result.get('checks', []):
            if not check.get('passed', False):
                failed.append({'command': command, 'check': check.get('name', ''),
                               'detail': check.get('detail', '')})
    return failed


def extract_failed_checks_from_json(json_file_path) -> Optional[Path]:
    """有失敗檢查時在 summary.json 旁寫出 failed_checks.csv，回傳其路徑"""
    json_path = Path(json_file_path)

    if not json_path.exists():
        print(f"  ⚠️  JSON 檔案不存在: {json_file_path}")
        return None

    try:
        with open(json_path, 'r', encoding='utf-8') as f:
            data = json.load(f)

        failed = collect_failed_checks(data)
        if not failed:
            return None

        output_file = json_path.parent / "failed_checks.csv"
        write_to_csv(failed, output_file)
        return output_file

    except Exception as e:
        print(f"  ❌ 擷取失敗檢查時發生錯誤: {e}")
        return None
