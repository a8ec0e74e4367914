import os
import time
from multiprocessing import Process, Queue
from queue import Empty
from typing import Any, Callable, Dict, List, Tuple

import psutil


def worker_process_loop(worker_id: int, task_queue: Queue, result_queue: Queue, max_mem_mb: int,
                        handler: Callable[[dict], Any]):
    """
    自訂的 Worker Process 迴圈
    它會先檢查記憶體，再決定是否接任務
    """
    print(f"✅ [Worker {worker_id} | PID {os.getpid()}] 啟動")

    process = psutil.Process(os.getpid())

    while True:
        try:
            # 接任務前的記憶體檢查
            memory_mb = process.memory_info().rss / 1024 / 1024

            if memory_mb > max_mem_mb:
                print(f"♻️  [Worker {worker_id} | PID {os.getpid()}] 記憶體超標 ({memory_mb:.1f} MB)，請求重啟...")
                result_queue.put(("RESTART", worker_id))
                break

            try:
                task = task_queue.get(timeout=5.0)
            except Empty:
                print(f"⌛ [Worker {worker_id} | PID {os.getpid()}] 任務佇列為空，自動退出")
                break

            # 收到 None 代表任務已全部派發
            if task is None:
                break

            try:
                result_queue.put(("DONE", task["key"], handler(task)))
            except Exception as e:
                print(f"💥 [Worker {worker_id} | PID {os.getpid()}] 任務 {task['key']} 發生錯誤: {e}")
                result_queue.put(("FAILED", task["key"], str(e)))

        except Exception as loop_e:
            print(f"🆘 [Worker {worker_id} | PID {os.getpid()}] 迴圈發生嚴重錯誤: {loop_e}")
            result_queue.put(("RESTART", worker_id))
            break

    print(f"👋 [Worker {worker_id} | PID {os.getpid()}] 結束")


class WorkerPool:
    """
    參數掃描用的自管理 worker pool

    每個任務是帶有可排序 "key" 的 dict；handler 必須是模組層級函式（子行程以名稱匯入）。
    threads ≤ 1 時直接在主程序內依序執行。
    """

    def __init__(self, threads: int = 1, max_mem_mb: int = 1024, log_writer=None, timeout: float = 600.0):
        self.threads = max(1, int(threads))
        self.max_mem_mb = max_mem_mb
        self.log_writer = log_writer
        self.timeout = timeout

    def _log(self, message: str):
        """統一的日誌輸出方法"""
        if self.log_writer:
            self.log_writer.log_only(message)
        else:
            print(message)

    def run(self, tasks: List[dict], handler: Callable[[dict], Any]) -> Tuple[Dict[Any, Any], Dict[Any, str]]:
        """回傳 (成功結果, 失敗訊息)，兩者皆以任務 key 為鍵"""
        if self.threads == 1 or len(tasks) <= 1:
            return self._run_inline(tasks, handler)
        return self._run_processes(tasks, handler)

    def _run_inline(self, tasks: List[dict], handler) -> Tuple[Dict[Any, Any], Dict[Any, str]]:
        results, failures = {}, {}
        for task in tasks:
            try:
                results[task["key"]] = handler(task)
            except Exception as e:
                self._log(f"❌ 任務 {task['key']} 發生錯誤: {e}")
                failures[task["key"]] = str(e)
        return results, failures

    def _run_processes(self, tasks: List[dict], handler) -> Tuple[Dict[Any, Any], Dict[Any, str]]:
        task_queue = Queue()
        result_queue = Queue()
        for task in tasks:
            task_queue.put(task)
        # 放入結束訊號，等於 worker 數的 None
        for _ in range(self.threads):
            task_queue.put(None)

        worker_pool = {}

        def start_new_worker(worker_id):
            p = Process(target=worker_process_loop,
                        args=(worker_id, task_queue, result_queue, self.max_mem_mb, handler))
            p.start()
            worker_pool[worker_id] = p

        self._log(f"🚀 啟動 {self.threads} 個 worker，共 {len(tasks)} 個任務")
        start_time = time.time()
        for i in range(self.threads):
            start_new_worker(i)

        results, failures = {}, {}
        processed_count = 0
        try:
            while processed_count < len(tasks):
                try:
                    message = result_queue.get(timeout=self.timeout)
                except Empty:
                    if not any(p.is_alive() for p in worker_pool.values()):
                        self._log("❌ [Main-CHECK] 所有 worker 都已結束，但任務未完成")
                        break
                    continue

                if message[0] == "RESTART":
                    worker_id = message[1]
                    self._log(f"🔥 [Main-RESTART] 重啟 Worker {worker_id}")
                    old_worker = worker_pool.pop(worker_id, None)
                    if old_worker is not None and old_worker.is_alive():
                        old_worker.join(timeout=10)
                        if old_worker.is_alive():
                            old_worker.terminate()
                            old_worker.join()
                    start_new_worker(worker_id)
                    continue

                status, key, payload = message
                if status == "DONE":
                    results[key] = payload
                else:
                    failures[key] = payload
                processed_count += 1
                self._log(f"📈 [進度] {processed_count} / {len(tasks)} (失敗: {len(failures)})")
        finally:
            for p in worker_pool.values():
                p.join(timeout=10)
                if p.is_alive():
                    p.terminate()
                    p.join()
            self._log(f"⏱️ worker pool 耗時 {time.time() - start_time:.1f} 秒")

        for task in tasks:
            if task["key"] not in results and task["key"] not in failures:
                failures[task["key"]] = "worker 未回傳結果"
        return results, failures
