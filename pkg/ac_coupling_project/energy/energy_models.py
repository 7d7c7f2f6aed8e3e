"""
耦合能量模型

键贡献 e_b、c_b、a_b；Atomistic、Cauchy-Born、QCE、ECC、ACC 五种模型的总能量与解析梯度；
均匀变形下的鬼力残差
"""
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ac_coupling_project.energy.assembly import TermAssembler, TermSet, combine
from ac_coupling_project.energy.dof_layout import DeformationState, DofLayout
from ac_coupling_project.errors import DofLayoutError
from ac_coupling_project.fem.mesh import MeshGrading, Triangulation, build_mesh, directional_derivative
from ac_coupling_project.geometry.bond_geometry import (
    BondPartition,
    EffectiveAreaTable,
    bond_triangle_weights,
    effective_areas,
    partition_bond,
)
from ac_coupling_project.geometry.exact_geometry import IntPoint, point_on_segment
from ac_coupling_project.lattice.lattice_domain import (
    Bond,
    BondClass,
    BondTag,
    DomainDecomposition,
    classify_bonds,
    enumerate_bonds,
    vacancy_bonds,
)
from ac_coupling_project.potentials.pair_potentials import PairPotential, eval_pair_vec

EccForm = Literal["effective-area", "bond-split", "definition"]


class ModelVariant(str, Enum):
    """模型类型，取值即配置中的 method 键"""
    ATOMISTIC = "atomistic"
    CAUCHY_BORN = "cauchy-born"
    QCE = "qce"
    ECC = "ecc"
    ACC = "acc"


@dataclass(frozen=True, eq=False)
class CouplingGeometry:
    """
    与势函数无关的预计算几何：键表、键分类、键剖分、键-单元权重、有效面积与 QCE 单元权重

    同一几何可被多个模型与势函数共享
    """
    decomp: DomainDecomposition
    mesh: Optional[Triangulation]
    bonds: Tuple[Bond, ...]
    classes: Tuple[BondClass, ...]

    @classmethod
    def build(
        cls,
        decomp: DomainDecomposition,
        mesh: Optional[Triangulation] = None,
        grading: Optional[MeshGrading] = None,
        with_mesh: bool = True,
    ) -> "CouplingGeometry":
        if mesh is None and with_mesh:
            mesh = build_mesh(decomp, grading)
        bonds = tuple(enumerate_bonds(decomp, decomp.neighbors))
        classes = tuple(classify_bonds(bonds, decomp))
        logger.info(f"耦合几何: {len(bonds)} 条键, 网格单元 {mesh.n_triangles if mesh else 0} 个")
        return cls(decomp, mesh, bonds, classes)

    @property
    def directions(self) -> Tuple[IntPoint, ...]:
        return tuple(self.decomp.neighbors.directions)

    def bonds_with_tag(self, *tags: BondTag) -> List[int]:
        return [k for k, c in enumerate(self.classes) if c.tag in tags]

    @cached_property
    def crossing(self) -> List[int]:
        return self.bonds_with_tag(BondTag.CROSSING)

    @cached_property
    def partitions(self) -> Dict[int, BondPartition]:
        """跨界面键的 χ_{Ω_a} 剖分"""
        return {k: partition_bond(self.bonds[k], self.decomp.continuum) for k in self.crossing}

    def triangle_weights(self, k: int) -> List[Tuple[int, Fraction]]:
        return self._triangle_weight_cache.setdefault(k, bond_triangle_weights(self.bonds[k], self._mesh()))

    @cached_property
    def _triangle_weight_cache(self) -> Dict[int, List[Tuple[int, Fraction]]]:
        return {}

    @cached_property
    def vacancy_bonds(self) -> Tuple[Bond, ...]:
        """端点含空位、进入 Ω_c 的线段；不属于 ℬ，其连续介质部分须从 E_c 中扣除"""
        return tuple(vacancy_bonds(self.decomp))

    @cached_property
    def vacancy_bond_weights(self) -> List[List[Tuple[int, Fraction]]]:
        mesh = self._mesh()
        return [bond_triangle_weights(b, mesh) for b in self.vacancy_bonds]

    @cached_property
    def effective_area_table(self) -> EffectiveAreaTable:
        return effective_areas(self._mesh(), self.bonds, self.decomp, self.classes, removed=self.vacancy_bonds)

    @cached_property
    def qce_weights(self) -> np.ndarray:
        """Ω^qc_T = |T|(1 − n_Γ(T)/3)，n_Γ 为 T 位于 Γ 上的顶点数"""
        mesh = self._mesh()
        gamma = set(self.decomp.interface_sites)
        counts = np.array([
            sum(1 for p in mesh.triangle_sites(t) if p in gamma) for t in range(mesh.n_triangles)
        ])
        return mesh.area_array * (1.0 - counts / 3.0)

    @cached_property
    def directional_tables(self) -> Dict[IntPoint, np.ndarray]:
        mesh = self._mesh()
        return {r: mesh.directional_coefficients(r) for r in self.directions}

    def _mesh(self) -> Triangulation:
        if self.mesh is None:
            raise DofLayoutError("该几何没有连续介质网格")
        return self.mesh


def _pair_terms(
    asm: TermAssembler,
    layout: DofLayout,
    pairs: Sequence[Tuple[IntPoint, IntPoint]],
    coefficient: float,
) -> None:
    """加入 c·φ(|y_q − y_p|) 项；端点不是自由度时用插值权重"""
    index = layout.index
    fast_cols: List[Tuple[int, int]] = []
    for p, q in pairs:
        kp, kq = index.get(p), index.get(q)
        if kp is not None and kq is not None:
            fast_cols.append((kq, kp))
        else:
            asm.add_term(coefficient, combine((1.0, layout.point_weights(q)), (-1.0, layout.point_weights(p))))
    if fast_cols:
        cols = np.array(fast_cols, dtype=np.int64)
        vals = np.tile([1.0, -1.0], (len(cols), 1))
        asm.add_block(np.full(len(cols), coefficient), cols, vals)


def _element_terms(
    asm: TermAssembler,
    geometry: CouplingGeometry,
    layout: DofLayout,
    weights: np.ndarray,
) -> None:
    """Σ_T Σ_r w_{T,r} φ(∇_r y|_T)；weights 形状 (m,) 或 (m, |ℛ|)"""
    mesh = geometry._mesh()
    dofs = layout.node_to_dof[mesh.triangles]
    weights = np.asarray(weights, dtype=float)
    for k, r in enumerate(geometry.directions):
        w = weights if weights.ndim == 1 else weights[:, k]
        keep = w != 0.0
        asm.add_block(w[keep], dofs[keep], geometry.directional_tables[r][keep])


def _continuum_bond_terms(
    asm: TermAssembler,
    geometry: CouplingGeometry,
    layout: DofLayout,
    bond: Bond,
    weights: Sequence[Tuple[int, Fraction]],
    sign: float,
) -> None:
    """c_b = Σ_T β_{b,T} φ(∇_r y|_T)"""
    mesh = geometry._mesh()
    table = geometry.directional_tables[bond.direction]
    for t, beta in weights:
        nodes = layout.node_to_dof[mesh.triangles[t]]
        asm.add_term(sign * float(beta), dict(zip(nodes.tolist(), table[t].tolist())))


def _remove_vacancy_bonds(asm: TermAssembler, geometry: CouplingGeometry, layout: DofLayout) -> None:
    """E_c 只保留 ℬ 中键的连续介质贡献：扣除空位线段的 c_b"""
    for b, weights in zip(geometry.vacancy_bonds, geometry.vacancy_bond_weights):
        _continuum_bond_terms(asm, geometry, layout, b, weights, -1.0)

def _atomistic_bond_term(
    asm: TermAssembler,
    layout: DofLayout,
    bond: Bond,
    partition: BondPartition,
) -> None:
    """a_b = W φ(W⁻¹ Σ w_m (y(t_m) − y(t_{m−1})))；W = 0 时不加项"""
    total = partition.total_weight
    if total == 0:
        return
    parts = []
    for w, t0, t1 in partition.segments():
        if w == 0:
            continue
        scale = float(w / total)
        parts.append((scale, layout.point_weights(point_on_segment(bond.base, bond.direction, t1))))
        parts.append((-scale, layout.point_weights(point_on_segment(bond.base, bond.direction, t0))))
    asm.add_term(float(total), combine(*parts))


@dataclass(frozen=True, eq=False)
class EnergyModel:
    """装配好的耦合能量模型"""
    variant: ModelVariant
    geometry: CouplingGeometry
    potential: PairPotential
    layout: DofLayout
    terms: TermSet
    ecc_form: str = "effective-area"

    @property
    def decomp(self) -> DomainDecomposition:
        return self.geometry.decomp

    @property
    def mesh(self) -> Optional[Triangulation]:
        return self.geometry.mesh if self.variant is not ModelVariant.ATOMISTIC else None

    @property
    def neighbors(self):
        return self.decomp.neighbors

    def with_potential(self, potential: PairPotential) -> "EnergyModel":
        """共享装配结果，更换势函数"""
        return replace(self, potential=potential)

    def uniform_state(self, F: Optional[np.ndarray] = None) -> DeformationState:
        return DeformationState.uniform(self.layout, F)

    def _check(self, state: DeformationState) -> None:
        if state.layout is not self.layout:
            if state.layout.sites != self.layout.sites:
                raise DofLayoutError("变形状态的自由度布局与模型不一致")

    def full_gradient(self, state: DeformationState) -> Tuple[float, np.ndarray]:
        """能量与全部自由度(含 Dirichlet)上的梯度"""
        self._check(state)
        energy, grad = self.terms.evaluate(state.positions, self.potential)
        if state.forces is not None:
            energy -= float(np.sum(state.forces * state.positions))
            grad = grad - state.forces
        return energy, grad

    def energy(self, state: DeformationState) -> Tuple[float, np.ndarray]:
        """
        总能量与自由自由度上的梯度

        Returns:
            (E, g)，g 长度为 2 × 自由自由度数
        """
        energy, grad = self.full_gradient(state)
        return energy, grad[self.layout.free_indices].ravel()

    @cached_property
    def continuum_terms(self) -> TermSet:
        asm = TermAssembler(self.layout.n_dofs)
        _element_terms(asm, self.geometry, self.layout, self.geometry._mesh().area_array)
        return asm.build()

    def connectivity(self) -> np.ndarray:
        """最近邻原子对与网格边(自由度编号)，用于 Laplace 预条件子"""
        index = self.layout.index
        edges = []
        for p in self.layout.sites:
            for r in self.neighbors.nearest_directions():
                q = (p[0] + r[0], p[1] + r[1])
                if q in index:
                    edges.append((index[p], index[q]))
        if self.mesh is not None:
            dofs = self.layout.node_to_dof
            edges.extend((int(dofs[a]), int(dofs[b])) for a, b in self.mesh.edges)
        if not edges:
            return np.zeros((0, 2), dtype=np.int64)
        arr = np.sort(np.array(edges, dtype=np.int64), axis=1)
        return np.unique(arr, axis=0)


def build_energy_model(
    variant: Union[ModelVariant, str],
    geometry: Union[CouplingGeometry, DomainDecomposition],
    potential: PairPotential,
    ecc_form: EccForm = "effective-area",
) -> EnergyModel:
    """
    装配能量模型

    Args:
        variant: 模型类型
        geometry: 预计算几何(或区域分解，此时使用完全细化网格)
        potential: 两体势
        ecc_form: ECC 的装配形式

    Returns:
        能量模型
    """
    variant = ModelVariant(variant)
    if isinstance(geometry, DomainDecomposition):
        geometry = CouplingGeometry.build(geometry, with_mesh=variant is not ModelVariant.ATOMISTIC)
    decomp = geometry.decomp
    bonds = geometry.bonds

    if variant is ModelVariant.ATOMISTIC:
        layout = DofLayout.build(decomp)
    elif variant is ModelVariant.CAUCHY_BORN:
        mesh = geometry._mesh()
        layout = DofLayout.build(decomp, mesh, extra_fixed=decomp.interface_sites, sites=mesh.nodes)
    else:
        layout = DofLayout.build(decomp, geometry._mesh())

    asm = TermAssembler(layout.n_dofs)
    not_continuum = geometry.bonds_with_tag(BondTag.INTERIOR_ATOMISTIC, BondTag.CROSSING)

    if variant is ModelVariant.ATOMISTIC:
        _pair_terms(asm, layout, [(b.base, b.end) for b in bonds], 1.0)
    elif variant is ModelVariant.CAUCHY_BORN:
        _element_terms(asm, geometry, layout, geometry._mesh().area_array)
    elif variant is ModelVariant.QCE:
        _qce_terms(asm, geometry, layout)
    elif variant is ModelVariant.ECC:
        _pair_terms(asm, layout, [(bonds[k].base, bonds[k].end) for k in not_continuum], 1.0)
        if ecc_form == "effective-area":
            _element_terms(asm, geometry, layout, geometry.effective_area_table.as_array())
        elif ecc_form == "bond-split":
            for k in geometry.crossing:
                _continuum_bond_terms(asm, geometry, layout, bonds[k], geometry.triangle_weights(k), -1.0)
            _element_terms(asm, geometry, layout, geometry._mesh().area_array)
            _remove_vacancy_bonds(asm, geometry, layout)
        elif ecc_form == "definition":
            for k in geometry.bonds_with_tag(BondTag.INTERIOR_CONTINUUM):
                _continuum_bond_terms(asm, geometry, layout, bonds[k], geometry.triangle_weights(k), 1.0)
        else:
            raise ValueError(f"未知的 ECC 装配形式: {ecc_form}")
    elif variant is ModelVariant.ACC:
        interior = geometry.bonds_with_tag(BondTag.INTERIOR_ATOMISTIC)
        _pair_terms(asm, layout, [(bonds[k].base, bonds[k].end) for k in interior], 1.0)
        for k in geometry.crossing:
            _atomistic_bond_term(asm, layout, bonds[k], geometry.partitions[k])
        _element_terms(asm, geometry, layout, geometry._mesh().area_array)
        _remove_vacancy_bonds(asm, geometry, layout)

    terms = asm.build()
    logger.info(
        f"{variant.value} 模型装配完成: {terms.n_terms} 项, 自由度 {layout.n_dofs} "
        f"(自由 {layout.n_free})"
    )
    return EnergyModel(variant, geometry, potential, layout, terms, ecc_form)


def _qce_terms(asm: TermAssembler, geometry: CouplingGeometry, layout: DofLayout) -> None:
    """原子半和 (i ∈ I_a ∪ Γ，全部 ±r) 加上 Ω^qc_T 加权的 Cauchy-Born 单元项"""
    decomp = geometry.decomp
    owners = sorted(set(decomp.atomistic_sites) | set(decomp.interface_sites))
    site_set = decomp.site_set
    pairs = []
    for i in owners:
        for r in decomp.neighbors.full():
            q = (i[0] + r[0], i[1] + r[1])
            if q in site_set:
                pairs.append((i, q))
    _pair_terms(asm, layout, pairs, 0.5)
    _element_terms(asm, geometry, layout, geometry.qce_weights)


def exact_contribution(
    b: Bond,
    state: DeformationState,
    potential: PairPotential,
) -> Tuple[float, Tuple[np.ndarray, np.ndarray]]:
    """e_b(y) = φ(|y_{i+r} − y_i|)，返回两端点上的梯度"""
    z = state.value_at(b.end) - state.value_at(b.base)
    value, grad = eval_pair_vec(potential, z)
    return value, (-grad, grad)


def continuum_contribution(b: Bond, state: DeformationState, model: EnergyModel) -> float:
    """c_b(y) = ⨍_b χ_{Ω_c} φ(∇_r y) db = Σ_T β_{b,T} φ(∇_r y|_T)"""
    if model.mesh is None:
        return 0.0
    field = state.field()
    value = 0.0
    for t, beta in bond_triangle_weights(b, model.mesh):
        z = directional_derivative(field, t, b.direction)
        value += float(beta) * eval_pair_vec(model.potential, z)[0]
    return value


def bond_terms(model: EnergyModel, b: Bond, kind: Literal["exact", "continuum", "atomistic"]) -> TermSet:
    """单条键的 e_b、c_b 或 a_b 项，用于逐键变分检验"""
    geometry = model.geometry
    asm = TermAssembler(model.layout.n_dofs)
    if kind == "exact":
        _pair_terms(asm, model.layout, [(b.base, b.end)], 1.0)
    elif kind == "continuum":
        k = geometry.bonds.index(b)
        _continuum_bond_terms(asm, geometry, model.layout, b, geometry.triangle_weights(k), 1.0)
    elif kind == "atomistic":
        _atomistic_bond_term(asm, model.layout, b, partition_bond(b, geometry.decomp.continuum))
    else:
        raise ValueError(f"未知的键贡献类型: {kind}")
    return asm.build()


def atomistic_contribution(b: Bond, state: DeformationState, model: EnergyModel) -> Tuple[float, np.ndarray]:
    """a_b(y) 与其在全部自由度上的梯度"""
    return bond_terms(model, b, "atomistic").evaluate(state.positions, model.potential)


def continuum_energy(model: EnergyModel, state: DeformationState) -> float:
    """E_c(y) = Σ_T Σ_r |T| φ(∇_r y|_T)"""
    return model.continuum_terms.evaluate(state.positions, model.potential)[0]


def max_bond_force(model: EnergyModel, F: np.ndarray) -> float:
    lattice = model.decomp.lattice
    lengths = [
        float(np.linalg.norm(np.asarray(F, dtype=float) @ lattice.matrix @ np.asarray(r, dtype=float)))
        for r in model.neighbors.directions
    ]
    _, d1, _ = model.potential.evaluate(np.array(lengths))
    return float(np.max(np.abs(d1)))


def ghost_force_residual(model: EnergyModel, F: np.ndarray, relative: bool = False) -> float:
    """
    均匀变形 y = F x 处自由自由度梯度的上确界范数

    Args:
        model: 能量模型
        F: 2×2 变形梯度
        relative: 是否除以最大键力 max_r |φ′(|F A r|)|
    """
    state = model.uniform_state(F)
    _, grad = model.energy(state)
    residual = float(np.max(np.abs(grad))) if grad.size else 0.0
    if relative:
        scale = max_bond_force(model, F)
        residual = residual / scale if scale > 0 else residual
    return residual


def iter_models(
    geometry: CouplingGeometry,
    potential: PairPotential,
    variants: Iterable[Union[ModelVariant, str]],
) -> Dict[str, EnergyModel]:
    return {ModelVariant(v).value: build_energy_model(v, geometry, potential) for v in variants}
