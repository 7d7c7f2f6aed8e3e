"""
六边形晶体问题与准一维条带

六边形格点上以原点为中心的晶体(外围 3 层约束原子)，中心 K 六边形为原子区域，
其间为连续介质区域；条带问题用于与一维模块交叉验证
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from ac_coupling_project.energy.dof_layout import DeformationState, DofLayout
from ac_coupling_project.energy.energy_models import CouplingGeometry
from ac_coupling_project.errors import DomainValidationError
from ac_coupling_project.fem.mesh import LatticeTriangleSet
from ac_coupling_project.geometry.exact_geometry import IntPoint, PointLocation, Polygon, Region
from ac_coupling_project.lattice.lattice_domain import (
    DomainDecomposition,
    LatticeSpec,
    NeighborSet,
    build_neighbor_set,
)
from ac_coupling_project.models.config_models import ExperimentConfig

COLLAR_LAYERS = 3
_HEX_STEPS: Tuple[IntPoint, ...] = ((0, 1), (-1, 0), (-1, -1), (0, -1), (1, 0), (1, 1))


def hex_distance(p: IntPoint) -> int:
    """六边形格点上到原点的跳数距离(最近邻为 ±(1,0), ±(0,1), ±(1,1))"""
    x, y = p
    return max(abs(x), abs(y), abs(x - y))


def hexagon_polygon(radius: int) -> Polygon:
    """半径 ρ 的正六边形(指标坐标)，边平行于格点方向"""
    if radius < 1:
        raise ValueError("六边形半径必须为正")
    r = radius
    return Polygon(((r, 0), (r, r), (0, r), (-r, 0), (-r, -r), (0, -r)))


def nonaligned_hexagon(radius: int) -> Polygon:
    """顶点沿六边形切向错开 s = max(1, ρ//3) 的六边形，边不平行于格点方向"""
    s = max(1, radius // 3)
    base = hexagon_polygon(radius).vertices
    start = base.index((radius, 0))
    ordered = base[start:] + base[:start]
    return Polygon(tuple(
        (vx + s * dx, vy + s * dy) for (vx, vy), (dx, dy) in zip(ordered, _HEX_STEPS)
    ))


def hexagon_decomposition(
    n: int,
    K: int,
    lattice: LatticeSpec,
    defect: Iterable[IntPoint] = (),
    interface: str = "aligned",
    interface_polygon: Optional[Sequence[IntPoint]] = None,
    neighbors: Optional[NeighborSet] = None,
) -> DomainDecomposition:
    """
    六边形问题的区域分解

    Args:
        n: 晶体六边形每边原子数
        K: 原子区域六边形每边原子数
        lattice: 六边形格点
        defect: 移除的原子
        interface: aligned 或 nonaligned
        interface_polygon: 显式给定的原子区域多边形

    Raises:
        DomainValidationError: 原子区域不在约束层之内，或缺陷原子不在原子区域内部
    """
    rho = n - 1
    inner = rho - COLLAR_LAYERS
    if interface_polygon is not None:
        hole = Polygon(tuple(tuple(v) for v in interface_polygon))
    elif interface == "nonaligned":
        hole = nonaligned_hexagon(K - 1)
    else:
        hole = hexagon_polygon(K - 1)
    outer = hexagon_polygon(inner)
    for v in hole.vertices:
        if outer.locate(v) is not PointLocation.INTERIOR:
            raise DomainValidationError(f"原子区域顶点 {v} 不在连续介质外边界 (半径 {inner}) 内部")
    defect = frozenset((int(x), int(y)) for x, y in defect)
    for p in defect:
        if hole.locate(p) is not PointLocation.INTERIOR:
            raise DomainValidationError(f"缺陷原子 {p} 不在原子区域内部")
    decomp = DomainDecomposition(
        lattice=lattice,
        neighbors=neighbors or build_neighbor_set(lattice),
        domain=hexagon_polygon(rho),
        continuum=Region(outer, (hole,)),
        free_polygon=hexagon_polygon(rho - COLLAR_LAYERS + 1),
        vacancies=defect,
    )
    logger.info(
        f"六边形问题: n={n}, K={K}, 界面={interface if interface_polygon is None else 'explicit'}, "
        f"原子数 {len(decomp.sites)}"
    )
    return decomp


@dataclass(frozen=True, eq=False)
class HexagonProblem:
    """一个 K 值下的六边形问题：区域分解、耦合几何与外加变形"""
    n: int
    K: int
    interface: str
    geometry: CouplingGeometry
    F: np.ndarray

    @property
    def decomp(self) -> DomainDecomposition:
        return self.geometry.decomp

    @property
    def mesh(self):
        return self.geometry.mesh

    @cached_property
    def triangles(self) -> LatticeTriangleSet:
        return LatticeTriangleSet.from_decomposition(self.decomp)

    def initial_state(self, layout: DofLayout) -> DeformationState:
        """y0 = F A i，Dirichlet 值同样取 F A i"""
        return DeformationState.uniform(layout, self.F)


def build_hexagon_problem(
    cfg: ExperimentConfig,
    K: Optional[int] = None,
    interface: Optional[str] = None,
    with_mesh: bool = True,
) -> HexagonProblem:
    """
    由配置构造六边形问题

    Args:
        cfg: 实验配置
        K: 原子区域大小，默认取 cfg.K 的第一个值
        interface: 覆盖 cfg.interface
        with_mesh: 是否构造连续介质网格(纯原子参考解不需要)
    """
    K = K if K is not None else cfg.K[0]
    interface = interface or cfg.interface
    lattice = LatticeSpec.hexagonal(cfg.potential.cutoff)
    decomp = hexagon_decomposition(
        cfg.side, K, lattice, cfg.defect, interface, cfg.interface_polygon
    )
    geometry = CouplingGeometry.build(decomp, grading=cfg.mesh, with_mesh=with_mesh)
    return HexagonProblem(cfg.side, K, interface, geometry, cfg.F)


def hexagon_atom_count(n: int, defect_size: int = 0) -> int:
    """3n² − 3n + 1 − |defect|"""
    return 3 * n * n - 3 * n + 1 - defect_size


def strip_decomposition(N: int, R: int, height: int = 3) -> DomainDecomposition:
    """
    只保留水平相互作用的准一维条带

    Ω = [−N−R+1, N+R−1] × [0, H]，Ω_c = (0, N) × (0, H)；第 0 行、第 H 行以及 |x| ≥ N 的原子固定，
    每一内部行与一维链 Chain1D(N, R) 的自由度一一对应
    """
    if height < 2:
        raise ValueError("条带高度至少为 2")
    lattice = LatticeSpec.square(cutoff=R + 0.1)
    neighbors = NeighborSet.explicit(lattice, [(k, 0) for k in range(1, R + 1)])
    left, right = -N - R + 1, N + R - 1
    return DomainDecomposition(
        lattice=lattice,
        neighbors=neighbors,
        domain=Polygon(((left, 0), (right, 0), (right, height), (left, height))),
        continuum=Region(Polygon(((0, 0), (N, 0), (N, height), (0, height)))),
        free_polygon=Polygon(((-N, 0), (N, 0), (N, height), (-N, height))),
    )


def strip_state(layout: DofLayout, chain_sites: Sequence[int], chain_values: np.ndarray, height: int) -> DeformationState:
    """把一维链的取值复制到条带的每个内部行，第 0 行与第 H 行保持参考位置"""
    values = dict(zip(chain_sites, np.asarray(chain_values, dtype=float)))
    positions: List[Tuple[float, float]] = []
    for x, y in layout.sites:
        if 0 < y < height:
            positions.append((values[x], float(y)))
        else:
            positions.append((float(x), float(y)))
    return DeformationState(layout, np.array(positions))