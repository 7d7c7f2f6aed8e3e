"""
运行结果收集模块
"""
import json
import math
import threading
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from loguru import logger

from ac_coupling_project.models.config_models import PatchTestRow, RunRecord

RUN_COLUMNS = ["method", "K", "w1inf_error", "energy", "iterations", "wall_ms", "failed"]
EXTRA_COLUMNS = ["interface", "potential"]
PATCH_COLUMNS = ["method", "interface", "K", "potential", "F", "residual", "passed"]


class RunRecorder:
    """
    运行记录收集器
    并发的 (method, K) 运行通过它串行写入结果
    """

    def __init__(self, results_dir: Union[str, Path] = "results"):
        """
        初始化收集器

        Args:
            results_dir: 结果保存目录
        """
        self.results_dir = Path(results_dir)

        # 使用线程锁保护共享数据
        self._lock = threading.RLock()
        self._records: List[RunRecord] = []
        self._patch_rows: List[PatchTestRow] = []
        self._errors: Dict[str, List[str]] = defaultdict(list)

    def record_run(self, record: RunRecord) -> None:
        with self._lock:
            self._records.append(record)
            if record.failed:
                logger.warning(f"运行失败: method={record.method}, K={record.K}, status={record.status}")
            else:
                logger.info(
                    f"运行完成: method={record.method}, K={record.K}, "
                    f"误差={record.w1inf_error:.3e}, 迭代 {record.iterations} 次"
                )

    def record_patch(self, row: PatchTestRow) -> None:
        with self._lock:
            self._patch_rows.append(row)

    def record_error(self, key: str, message: str) -> None:
        """记录未能形成结果行的异常"""
        with self._lock:
            self._errors[key].append(message)

    @property
    def records(self) -> List[RunRecord]:
        with self._lock:
            return list(self._records)

    @property
    def failure_count(self) -> int:
        with self._lock:
            return sum(1 for r in self._records if r.failed)

    def to_dataframe(self) -> pd.DataFrame:
        """按 (method, K) 排序的结果表，列顺序固定"""
        with self._lock:
            rows = [r.model_dump() for r in self._records]
        df = pd.DataFrame(rows, columns=RUN_COLUMNS + EXTRA_COLUMNS + ["status"])
        if df.empty:
            return df[RUN_COLUMNS + EXTRA_COLUMNS]
        df = df.sort_values(["interface", "method", "K"], kind="stable").reset_index(drop=True)
        return df[RUN_COLUMNS + EXTRA_COLUMNS]

    def patch_dataframe(self) -> pd.DataFrame:
        with self._lock:
            rows = [r.model_dump() for r in self._patch_rows]
        return pd.DataFrame(rows, columns=PATCH_COLUMNS)

    def write_csv(self, path: Optional[Union[str, Path]] = None) -> Path:
        """
        写出运行结果 CSV

        Args:
            path: 输出路径，默认 results_dir/convergence.csv

        Returns:
            实际写出的路径
        """
        path = Path(path) if path is not None else self.results_dir / "convergence.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            self.to_dataframe().to_csv(path, index=False)
            if self._errors:
                errors_path = path.with_suffix(".errors.json")
                errors_path.write_text(json.dumps(self._errors, ensure_ascii=False, indent=2), encoding="utf-8")
        logger.info(f"结果已保存到 {path}")
        return path

    def write_patch_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.patch_dataframe().to_csv(path, index=False)
        logger.info(f"鬼力检验结果已保存到 {path}")
        return path

    def summary(self) -> Dict[str, Dict[int, float]]:
        """method -> {K: 误差}"""
        with self._lock:
            out: Dict[str, Dict[int, float]] = defaultdict(dict)
            for r in self._records:
                out[f"{r.method}/{r.interface}"][r.K] = r.w1inf_error
            return dict(out)

    def reset(self) -> None:
        """清空全部记录"""
        with self._lock:
            self._records = []
            self._patch_rows = []
            self._errors = defaultdict(list)
            logger.info("运行记录已清空")


def failed_record(method: str, K: int, interface: str, potential: str, status: str, wall_ms: float = 0.0) -> RunRecord:
    return RunRecord(
        method=method,
        K=K,
        w1inf_error=math.nan,
        energy=math.nan,
        iterations=0,
        wall_ms=wall_ms,
        failed=True,
        interface=interface,
        potential=potential,
        status=status,
    )
