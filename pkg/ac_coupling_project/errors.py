"""
异常类型定义

所有库内异常均继承自 CouplingError，同时继承对应的内置异常类型
"""
from typing import Any, Optional


class CouplingError(Exception):
    """耦合库异常基类"""


class NoInteractionError(CouplingError, ValueError):
    """截断半径内没有任何相互作用方向"""

    def __init__(self, cutoff: float):
        super().__init__(f"no interaction: 截断半径 {cutoff} 小于最近邻距离")
        self.cutoff = cutoff


class DomainValidationError(CouplingError, ValueError):
    """区域分解不满足约束条件"""


class PotentialDomainError(CouplingError, ValueError):
    """势函数在非正距离处求值(原子重合或一维状态非单调)"""


class MeshError(CouplingError, RuntimeError):
    """网格生成失败：未覆盖区域、非协调或出现非格点节点"""


class InternalGeometryError(CouplingError, RuntimeError):
    """几何计算内部错误，例如有效面积为负"""


class DofLayoutError(CouplingError, ValueError):
    """变形状态与模型自由度布局不匹配，或某点缺少取值"""


class UnsupportedClosedFormError(CouplingError, ValueError):
    """不支持的解析公式参数"""


class SolverFailure(CouplingError, RuntimeError):
    """极小化求解失败"""

    def __init__(self, message: str, result: Optional[Any] = None):
        super().__init__(message)
        self.result = result
