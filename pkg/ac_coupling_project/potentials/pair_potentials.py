"""
两体势函数

Lennard-Jones: φ(z) = −2z⁻⁶ + z⁻¹²
Morse:         φ(z) = −2e^{−α(z−1)} + e^{−2α(z−1)}

两者的极小点都在 z = 1，极小值为 −1。势函数不做截断平移，
截断只通过参考构型中的邻居集合起作用
"""
from typing import Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ac_coupling_project.errors import PotentialDomainError

ArrayLike = Union[float, np.ndarray]


class PairPotential(BaseModel):
    """两体势参数"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    kind: Literal["lennard-jones", "morse"] = Field(
        "lennard-jones", alias="potential", description="势函数类型"
    )
    alpha: float = Field(3.0, description="Morse 势的衰减参数")
    cutoff: float = Field(3.1, gt=0.0, description="截断半径")

    @model_validator(mode="after")
    def _check_alpha(self) -> "PairPotential":
        if self.kind == "morse" and self.alpha <= 0:
            raise ValueError("Morse 势要求 alpha > 0")
        return self

    @classmethod
    def lennard_jones(cls, cutoff: float = 3.1) -> "PairPotential":
        return cls(kind="lennard-jones", cutoff=cutoff)

    @classmethod
    def morse(cls, alpha: float = 3.0, cutoff: float = 3.1) -> "PairPotential":
        return cls(kind="morse", alpha=alpha, cutoff=cutoff)

    def evaluate(self, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        向量化求值

        Args:
            z: 正距离(标量或数组)

        Returns:
            (φ, φ′, φ″)

        Raises:
            PotentialDomainError: 存在 z ≤ 0
        """
        z = np.asarray(z, dtype=float)
        if np.any(~(z > 0)):
            raise PotentialDomainError("势函数要求 z > 0 (原子重合或顺序颠倒)")
        if self.kind == "lennard-jones":
            inv = 1.0 / z
            inv6 = inv ** 6
            inv12 = inv6 * inv6
            value = -2.0 * inv6 + inv12
            d1 = 12.0 * inv6 * inv - 12.0 * inv12 * inv
            d2 = -84.0 * inv6 * inv * inv + 156.0 * inv12 * inv * inv
            return value, d1, d2
        a = self.alpha
        e = np.exp(-a * (z - 1.0))
        value = -2.0 * e + e * e
        d1 = 2.0 * a * e - 2.0 * a * e * e
        d2 = -2.0 * a * a * e + 4.0 * a * a * e * e
        return value, d1, d2


def eval_pair(p: PairPotential, z: float) -> Tuple[float, float, float]:
    """标量求值 φ(z), φ′(z), φ″(z)"""
    value, d1, d2 = p.evaluate(z)
    return float(value), float(d1), float(d2)


def eval_pair_vec(p: PairPotential, z: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    向量形式 φ(z) := φ(|z|)，梯度 φ′(|z|)·z/|z|

    z 已经是物理坐标
    """
    z = np.asarray(z, dtype=float)
    norm = float(np.linalg.norm(z))
    if norm == 0.0:
        raise PotentialDomainError("原子位置重合")
    value, d1, _ = p.evaluate(norm)
    return float(value), float(d1) * z / norm
