"""
配置与结果记录模型
"""
import math
from pathlib import Path
from typing import Any, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ac_coupling_project.energy.energy_models import ModelVariant
from ac_coupling_project.fem.mesh import MeshGrading
from ac_coupling_project.potentials.pair_potentials import PairPotential
from ac_coupling_project.solver.minimizer import MinimizeOptions

# 原点附近两行各 4 个原子组成的空洞
DEFAULT_DEFECT: Tuple[Tuple[int, int], ...] = (
    (-2, 0), (-1, 0), (0, 0), (1, 0),
    (-1, 1), (0, 1), (1, 1), (2, 1),
)

DESK_HEXAGON_SIDE = 33
FULL_HEXAGON_SIDE = 129

Matrix2 = Tuple[Tuple[float, float], Tuple[float, float]]


def _check_matrix(value: Matrix2) -> Matrix2:
    (a, b), (c, d) = value
    if a * d - b * c <= 0:
        raise ValueError("变形梯度 F 必须满足 det F > 0")
    return value


class ExperimentConfig(BaseModel):
    """六边形晶体实验配置，JSON 配置文件直接映射到本模型"""
    model_config = ConfigDict(populate_by_name=True)

    hexagon_side: int = Field(DESK_HEXAGON_SIDE, ge=6, description="六边形每边原子数 n")
    full_scale: bool = Field(False, description="使用 n = 129 的完整规模")
    K: List[int] = Field(default_factory=lambda: [4, 6, 8, 10, 12], description="原子区域六边形每边原子数")
    defect: List[Tuple[int, int]] = Field(
        default_factory=lambda: list(DEFAULT_DEFECT), description="移除的原子指标"
    )
    F_applied: Matrix2 = Field(((1.0, 0.0), (0.0, 0.97)), description="外加变形梯度 F")
    potential: PairPotential = Field(default_factory=PairPotential.lennard_jones, description="两体势")
    methods: List[ModelVariant] = Field(
        default_factory=lambda: [ModelVariant.QCE, ModelVariant.ECC, ModelVariant.ACC],
        alias="method",
        description="参与比较的耦合方法",
    )
    interface: Literal["aligned", "nonaligned"] = Field("aligned", description="界面类型")
    interface_polygon: Optional[List[Tuple[int, int]]] = Field(
        None, description="显式给定的原子区域多边形(覆盖 interface)"
    )
    ecc_form: Literal["effective-area", "bond-split", "definition"] = Field(
        "effective-area", description="ECC 装配形式"
    )
    mesh: MeshGrading = Field(default_factory=MeshGrading, description="网格分级")
    solver: MinimizeOptions = Field(default_factory=MinimizeOptions, description="求解参数")
    seed: int = Field(0, description="随机种子")
    output: Path = Field(Path("results/convergence.csv"), description="CSV 输出路径")

    @field_validator("K", mode="before")
    @classmethod
    def _as_list(cls, value: Any) -> Any:
        return [value] if isinstance(value, int) else value

    @field_validator("K")
    @classmethod
    def _check_k(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("K 列表不能为空")
        if any(k < 4 for k in value):
            raise ValueError("K 必须不小于 4")
        return sorted(value)

    @field_validator("potential", mode="before")
    @classmethod
    def _potential_name(cls, value: Any) -> Any:
        return {"kind": value} if isinstance(value, str) else value

    @field_validator("F_applied")
    @classmethod
    def _check_f(cls, value: Matrix2) -> Matrix2:
        return _check_matrix(value)

    @model_validator(mode="after")
    def _check_sizes(self) -> "ExperimentConfig":
        if max(self.K) > self.side - 5:
            raise ValueError(f"K = {max(self.K)} 过大：原子区域必须严格位于 n = {self.side} 的六边形约束层之内")
        return self

    @property
    def side(self) -> int:
        return FULL_HEXAGON_SIDE if self.full_scale else self.hexagon_side

    @property
    def F(self) -> np.ndarray:
        return np.array(self.F_applied, dtype=float)

    @classmethod
    def from_json_file(cls, path: Path) -> "ExperimentConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


class RunRecord(BaseModel):
    """单次 (method, K) 运行的结果"""
    method: str = Field(..., description="耦合方法")
    K: int = Field(..., description="原子区域六边形每边原子数")
    w1inf_error: float = Field(..., description="相对原子参考解的 W^{1,∞} 误差，失败时为 NaN")
    energy: float = Field(..., description="极小化后的能量")
    iterations: int = Field(0, description="迭代次数")
    wall_ms: float = Field(0.0, description="墙钟时间(毫秒)")
    failed: bool = Field(False, description="是否失败")
    interface: str = Field("aligned", description="界面类型")
    potential: str = Field("lennard-jones", description="势函数")
    status: str = Field("converged", description="求解器状态")

    @field_validator("w1inf_error")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if not math.isnan(value) and value < 0:
            raise ValueError("误差必须非负")
        return value


class PatchTestRow(BaseModel):
    """一次鬼力检验"""
    method: str = Field(..., description="耦合方法")
    interface: str = Field(..., description="界面类型")
    K: int = Field(..., ge=1, description="原子区域六边形边长")
    potential: str = Field(..., description="势函数")
    F: str = Field(..., description="变形梯度")
    residual: float = Field(..., description="自由自由度上梯度的上确界范数")
    passed: bool = Field(..., description="是否满足阈值(QCE 只报告)")
