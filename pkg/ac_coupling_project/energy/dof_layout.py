"""
自由度布局与变形状态

携带取值的格点为 I_a ∪ I_D ∪ 网格节点；位于 Γ 上的原子同时是网格节点，只占一个自由度
"""
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ac_coupling_project.errors import DofLayoutError
from ac_coupling_project.fem.mesh import PiecewiseAffineField, Triangulation
from ac_coupling_project.geometry.exact_geometry import IntPoint, RationalPoint
from ac_coupling_project.lattice.lattice_domain import DomainDecomposition, LatticeSpec


@dataclass(frozen=True, eq=False)
class DofLayout:
    """格点自由度的稠密编号与 Dirichlet 标记"""
    lattice: LatticeSpec
    sites: Tuple[IntPoint, ...]
    fixed: np.ndarray
    mesh: Optional[Triangulation] = None

    @classmethod
    def build(
        cls,
        decomp: DomainDecomposition,
        mesh: Optional[Triangulation] = None,
        extra_fixed: Iterable[IntPoint] = (),
        sites: Optional[Iterable[IntPoint]] = None,
    ) -> "DofLayout":
        """
        构造布局

        Args:
            decomp: 区域分解
            mesh: 连续介质网格；为空时全部格点都是原子自由度
            extra_fixed: 额外固定的格点
            sites: 显式指定的自由度格点(默认 I_a ∪ I_D ∪ 网格节点)
        """
        if sites is None:
            if mesh is None:
                sites = decomp.sites
            else:
                sites = set(decomp.atomistic_sites) | set(decomp.dirichlet_sites) | set(mesh.nodes)
        ordered = tuple(sorted(set(sites)))
        fixed_set = set(decomp.dirichlet_sites) | set(extra_fixed)
        fixed = np.array([p in fixed_set for p in ordered], dtype=bool)
        return cls(decomp.lattice, ordered, fixed, mesh)

    @property
    def n_dofs(self) -> int:
        return len(self.sites)

    @cached_property
    def index(self) -> Dict[IntPoint, int]:
        return {p: k for k, p in enumerate(self.sites)}

    @cached_property
    def free_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.fixed)

    @property
    def n_free(self) -> int:
        return len(self.free_indices)

    @cached_property
    def node_to_dof(self) -> np.ndarray:
        """网格节点编号 -> 自由度编号"""
        if self.mesh is None:
            return np.zeros(0, dtype=np.int64)
        try:
            return np.array([self.index[p] for p in self.mesh.nodes], dtype=np.int64)
        except KeyError as exc:
            raise DofLayoutError(f"网格节点 {exc.args[0]} 不在自由度布局中") from exc

    @cached_property
    def reference_positions(self) -> np.ndarray:
        return self.lattice.physical(self.sites)

    def point_weights(self, point: RationalPoint) -> Dict[int, float]:
        """
        任意有理点处取值的自由度权重

        格点自由度直接取值；closure(Ω_c) 中其余点由 P1 插值给出

        Raises:
            DofLayoutError: 点既不是自由度格点也不在网格内
        """
        x, y = Fraction(point[0]), Fraction(point[1])
        if x.denominator == 1 and y.denominator == 1:
            k = self.index.get((int(x), int(y)))
            if k is not None:
                return {k: 1.0}
        if self.mesh is None:
            raise DofLayoutError(f"点 {point} 没有取值")
        weights = self.mesh.interpolation_weights((x, y))
        dofs = self.node_to_dof
        return {int(dofs[n]): float(w) for n, w in weights.items()}

    def interpolation_matrix(self, points: Sequence[RationalPoint]) -> sparse.csr_matrix:
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for k, p in enumerate(points):
            for j, w in self.point_weights(p).items():
                rows.append(k)
                cols.append(j)
                vals.append(w)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(len(points), self.n_dofs))


@dataclass(eq=False)
class DeformationState:
    """
    变形状态：每个自由度格点的物理位置，以及可选的外力

    Dirichlet 项由求解器保持不变
    """
    layout: DofLayout
    positions: np.ndarray
    forces: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.positions = np.array(self.positions, dtype=float)
        if self.positions.shape != (self.layout.n_dofs, 2):
            raise DofLayoutError(
                f"状态形状 {self.positions.shape} 与布局 ({self.layout.n_dofs}, 2) 不一致"
            )
        if self.forces is not None:
            self.forces = np.array(self.forces, dtype=float)
            if self.forces.shape != self.positions.shape:
                raise DofLayoutError("外力数组形状与状态不一致")

    @classmethod
    def uniform(cls, layout: DofLayout, F: Optional[np.ndarray] = None) -> "DeformationState":
        """均匀变形 y = F x"""
        F = np.eye(2) if F is None else np.asarray(F, dtype=float)
        return cls(layout, layout.reference_positions @ F.T)

    def copy(self) -> "DeformationState":
        return replace(
            self,
            positions=self.positions.copy(),
            forces=None if self.forces is None else self.forces.copy(),
        )

    def free_vector(self) -> np.ndarray:
        return self.positions[self.layout.free_indices].ravel()

    def with_free(self, x: np.ndarray) -> "DeformationState":
        positions = self.positions.copy()
        positions[self.layout.free_indices] = np.asarray(x, dtype=float).reshape(-1, 2)
        return replace(self, positions=positions)

    def value_at(self, point: RationalPoint) -> np.ndarray:
        weights = self.layout.point_weights(point)
        return sum(w * self.positions[k] for k, w in weights.items())

    def site_values(self, sites: Sequence[IntPoint]) -> np.ndarray:
        """一组格点处的取值(非自由度格点由 FE 插值)"""
        return self.layout.interpolation_matrix(sites) @ self.positions

    def field(self) -> PiecewiseAffineField:
        if self.layout.mesh is None:
            raise DofLayoutError("该布局没有连续介质网格")
        return PiecewiseAffineField(self.layout.mesh, self.positions[self.layout.node_to_dof])
