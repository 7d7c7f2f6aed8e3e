"""
能量极小化

预条件非线性共轭梯度(Polak-Ribière+，周期重启)、割线加 Armijo 回溯线搜索、
图 Laplace 预条件子、有限差分梯度检验与离散 W^{1,∞} 误差
"""
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Literal, Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse
from scipy.sparse.linalg import splu

from ac_coupling_project.energy.dof_layout import DeformationState
from ac_coupling_project.energy.energy_models import EnergyModel
from ac_coupling_project.errors import PotentialDomainError
from ac_coupling_project.fem.mesh import LatticeTriangleSet
from ac_coupling_project.lattice.lattice_domain import LatticeSpec


class LineSearchOptions(BaseModel):
    """回溯 Armijo 线搜索参数"""
    model_config = ConfigDict(frozen=True)

    initial_step: float = Field(1.0, gt=0.0, description="首次迭代的试探步长")
    contraction: float = Field(0.5, gt=0.0, lt=1.0, description="回溯收缩因子")
    sufficient_decrease: float = Field(1e-4, gt=0.0, le=0.5, description="Armijo 充分下降常数")
    max_backtracks: int = Field(60, ge=1, description="最大回溯次数")
    use_secant: bool = Field(True, description="是否先用割线估计作为试探步长")
    secant_probe: float = Field(1e-4, gt=0.0, description="割线探测步长(相对上一步长)")
    roundoff: float = Field(1e-13, ge=0.0, description="能量差处于舍入误差量级时改用梯度判据")


class MinimizeOptions(BaseModel):
    """极小化参数，配置键 tol / max_iter / precond / restart"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gradient_tolerance: float = Field(1e-8, gt=0.0, alias="tol", description="梯度上确界范数容差")
    max_iterations: int = Field(10000, ge=0, alias="max_iter", description="最大迭代次数")
    preconditioner: Literal["none", "laplace"] = Field(
        "laplace", alias="precond", description="预条件子"
    )
    restart_interval: int = Field(50, ge=1, alias="restart", description="周期重启间隔")
    preconditioner_shift: float = Field(1e-8, ge=0.0, description="Laplace 矩阵对角平移")
    line_search: LineSearchOptions = Field(default_factory=LineSearchOptions)


class MinimizeStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILURE = "line_search_failure"
    NAN_ENERGY = "nan_energy"


@dataclass
class MinimizeResult:
    """极小化结果；state 仅在目标为能量模型时给出"""
    x: np.ndarray
    energy: float
    iterations: int
    gradient_norm: float
    status: MinimizeStatus
    energy_trace: List[float] = field(default_factory=list)
    state: Optional[DeformationState] = None
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status is MinimizeStatus.CONVERGED


@runtime_checkable
class Objective(Protocol):
    """可极小化的目标：返回值与梯度"""

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        ...


class ModelObjective:
    """把能量模型限制到自由自由度上的目标函数"""

    def __init__(self, model: EnergyModel, state: DeformationState):
        self.model = model
        self.state = state

    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        return self.model.energy(self.state.with_free(x))

    def to_state(self, x: np.ndarray) -> DeformationState:
        return self.state.with_free(x)


class LaplacePreconditioner:
    """
    单位权图 Laplace 预条件子

    边为最近邻原子对与网格边，Dirichlet 自由度消去后只贡献对角；两个位移分量共用一个分解
    """

    def __init__(self, edges: np.ndarray, free: np.ndarray, shift: float = 1e-8):
        free = np.asarray(free, dtype=bool)
        n = len(free)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        degree = np.bincount(edges.ravel(), minlength=n).astype(float)
        adjacency = sparse.coo_matrix(
            (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n)
        ).tocsr()
        adjacency = adjacency + adjacency.T
        laplacian = sparse.diags(degree + shift) - adjacency
        keep = np.flatnonzero(free)
        self.matrix = laplacian.tocsr()[keep][:, keep].tocsc()
        self._lu = splu(self.matrix)
        logger.debug(f"Laplace 预条件子: {len(keep)} 个自由节点, {len(edges)} 条边")

    @classmethod
    def from_model(cls, model: EnergyModel, shift: float = 1e-8) -> "LaplacePreconditioner":
        return cls(model.connectivity(), ~model.layout.fixed, shift)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """P⁻¹ v，v 为按节点交错排列的自由向量"""
        block = np.asarray(v, dtype=float).reshape(self.matrix.shape[0], -1)
        return self._lu.solve(block).ravel()


def _safe_evaluate(objective: Objective, x: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
    try:
        value, grad = objective.value_and_gradient(x)
    except PotentialDomainError:
        return float("nan"), None
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return float("nan"), None
    return float(value), grad


def _line_search(
    objective: Objective,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    d: np.ndarray,
    previous_step: float,
    options: LineSearchOptions,
) -> Tuple[Optional[float], float, Optional[np.ndarray], bool]:
    """
    割线初值加 Armijo 回溯

    Returns:
        (步长或 None, 新能量, 新梯度, 是否遇到非有限能量)
    """
    slope = float(g0 @ d)
    alpha = previous_step
    if options.use_secant:
        sigma = options.secant_probe * previous_step
        _, g_probe = _safe_evaluate(objective, x + sigma * d)
        if g_probe is not None:
            curvature = float((g_probe - g0) @ d)
            if curvature > 0:
                alpha = -sigma * slope / curvature
    saw_nan = False
    c = options.sufficient_decrease
    tolerance = options.roundoff * max(1.0, abs(f0))
    for _ in range(options.max_backtracks):
        f1, g1 = _safe_evaluate(objective, x + alpha * d)
        if g1 is None:
            saw_nan = True
        elif f1 <= f0 + c * alpha * slope:
            return alpha, f1, g1, saw_nan
        elif abs(f1 - f0) <= tolerance and float(g1 @ d) <= (2.0 * c - 1.0) * slope:
            # 能量差低于舍入误差时使用近似 Wolfe 判据
            return alpha, f1, g1, saw_nan
        alpha *= options.contraction
    return None, f0, None, saw_nan


def minimize(
    target: Union[EnergyModel, Objective],
    y0: Union[DeformationState, np.ndarray],
    options: Optional[MinimizeOptions] = None,
    preconditioner: Optional[LaplacePreconditioner] = None,
) -> MinimizeResult:
    """
    预条件非线性共轭梯度极小化

    Args:
        target: 能量模型或一般目标函数
        y0: 初始变形状态(模型)或初始向量(一般目标)
        options: 求解参数
        preconditioner: 显式给定的预条件子；默认按 options 为模型构造

    Returns:
        极小化结果；线搜索失败与非有限能量通过 status 报告
    """
    options = options or MinimizeOptions()
    started = time.perf_counter()
    if isinstance(target, EnergyModel):
        if not isinstance(y0, DeformationState):
            raise TypeError("能量模型需要 DeformationState 作为初值")
        objective: Objective = ModelObjective(target, y0)
        x = y0.free_vector()
        if preconditioner is None and options.preconditioner == "laplace" and len(x):
            preconditioner = LaplacePreconditioner.from_model(target, options.preconditioner_shift)
    else:
        objective = target
        x = np.asarray(y0, dtype=float).copy()

    def precondition(g: np.ndarray) -> np.ndarray:
        return preconditioner.apply(g) if preconditioner is not None else g

    def finish(x_final: np.ndarray, f: float, it: int, gnorm: float, status: MinimizeStatus, trace: List[float]):
        state = objective.to_state(x_final) if isinstance(objective, ModelObjective) else None
        result = MinimizeResult(
            x_final, f, it, gnorm, status, trace, state, time.perf_counter() - started
        )
        log = logger.info if result.converged else logger.warning
        log(f"极小化结束: {status.value}, 迭代 {it} 次, |g|∞={gnorm:.3e}, E={f:.12g}")
        return result

    f, g = _safe_evaluate(objective, x)
    if g is None:
        return finish(x, f, 0, float("nan"), MinimizeStatus.NAN_ENERGY, [f])
    trace = [f]
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if gnorm <= options.gradient_tolerance:
        return finish(x, f, 0, gnorm, MinimizeStatus.CONVERGED, trace)

    s = precondition(g)
    d = -s
    step = options.line_search.initial_step
    since_restart = 0
    for it in range(1, options.max_iterations + 1):
        if float(g @ d) >= 0:
            d = -s
            since_restart = 0
        alpha, f_new, g_new, saw_nan = _line_search(objective, x, f, g, d, step, options.line_search)
        if alpha is None:
            status = MinimizeStatus.NAN_ENERGY if saw_nan else MinimizeStatus.LINE_SEARCH_FAILURE
            return finish(x, f, it - 1, gnorm, status, trace)
        x = x + alpha * d
        step = alpha
        s_new = precondition(g_new)
        gnorm = float(np.max(np.abs(g_new)))
        trace.append(f_new)
        if it % 100 == 0:
            logger.debug(f"迭代 {it}: E={f_new:.12g}, |g|∞={gnorm:.3e}, α={alpha:.3e}")
        if gnorm <= options.gradient_tolerance:
            return finish(x, f_new, it, gnorm, MinimizeStatus.CONVERGED, trace)
        since_restart += 1
        if since_restart >= options.restart_interval:
            beta = 0.0
            since_restart = 0
        else:
            beta = max(0.0, float(g_new @ (s_new - s)) / float(g @ s))
        d = -s_new + beta * d
        f, g, s = f_new, g_new, s_new
    return finish(x, f, options.max_iterations, gnorm, MinimizeStatus.MAX_ITERATIONS, trace)


def fd_gradient_check(
    target: Union[EnergyModel, Objective],
    y: Union[DeformationState, np.ndarray],
    step: float = 1e-6,
    components: Optional[Iterable[int]] = None,
) -> float:
    """
    中心差分与解析梯度的最大相对偏差

    相对偏差定义为 max|fd − g| / max(|g|∞, |fd|∞)，只在 components 指定的分量上比较

    Args:
        target: 能量模型或一般目标函数
        y: 检验点
        step: 差分步长
        components: 自由向量分量编号，默认全部
    """
    if step <= 0:
        raise ValueError("差分步长必须为正")
    if isinstance(target, EnergyModel):
        objective: Objective = ModelObjective(target, y)
        x = y.free_vector()
    else:
        objective = target
        x = np.asarray(y, dtype=float)
    _, grad = objective.value_and_gradient(x)
    index = np.arange(len(x)) if components is None else np.fromiter(components, dtype=np.int64)
    fd = np.empty(len(index))
    for k, j in enumerate(index):
        e = np.zeros_like(x)
        e[j] = step
        fp, _ = objective.value_and_gradient(x + e)
        fm, _ = objective.value_and_gradient(x - e)
        fd[k] = (fp - fm) / (2.0 * step)
    analytic = grad[index]
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(fd), initial=0.0)), 1e-300)
    error = float(np.max(np.abs(fd - analytic), initial=0.0)) / scale
    logger.debug(f"有限差分检验: {len(index)} 个分量, 相对误差 {error:.3e}")
    return error


def triangle_jacobians(values: np.ndarray, triangles: np.ndarray, lattice: LatticeSpec) -> np.ndarray:
    """
    单位格点三角形上的仿射 Jacobian，相对物理参考坐标

    Args:
        values: (m, 3, 2) 三角形顶点处的变形位置
        triangles: (m, 3, 2) 格点指标
    """
    x = lattice.physical(triangles.reshape(-1, 2)).reshape(-1, 3, 2)
    frames = np.stack([x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]], axis=2)
    dy = np.stack([values[:, 1] - values[:, 0], values[:, 2] - values[:, 0]], axis=2)
    return dy @ np.linalg.inv(frames)


def w1inf_error(
    y: DeformationState,
    y_ref: DeformationState,
    triangles: LatticeTriangleSet,
    lattice: Optional[LatticeSpec] = None,
) -> float:
    """
    离散 W^{1,∞} 误差：全部单位格点三角形上 ‖J(y) − J(y_ref)‖_F 的最大值

    非自由度格点的取值由 P1 插值给出
    """
    tri = triangles.triangles
    if len(tri) == 0:
        return 0.0
    lattice = lattice or y.layout.lattice
    sites = [tuple(p) for p in tri.reshape(-1, 2).tolist()]
    unique = sorted(set(sites))
    position = {p: k for k, p in enumerate(unique)}
    gather = np.array([position[p] for p in sites])
    values = y.site_values(unique)[gather].reshape(-1, 3, 2)
    ref_values = y_ref.site_values(unique)[gather].reshape(-1, 3, 2)
    diff = triangle_jacobians(values, tri, lattice) - triangle_jacobians(ref_values, tri, lattice)
    return float(np.max(np.sqrt(np.sum(diff ** 2, axis=(1, 2)))))


def check_monotone(trace: Sequence[float], rtol: float = 1e-12) -> bool:
    """能量迹是否单调不增(允许舍入量级的上升)"""
    trace = np.asarray(trace, dtype=float)
    if len(trace) < 2:
        return True
    slack = rtol * np.maximum(1.0, np.abs(trace[:-1]))
    return bool(np.all(np.diff(trace) <= slack))
