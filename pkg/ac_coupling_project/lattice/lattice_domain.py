"""
指标格点、邻居集合与区域分解

几何对象全部位于指标空间 Z²，格点矩阵 A 只用于换算物理坐标
"""
import json
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import ceil, sqrt
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ac_coupling_project.errors import DomainValidationError, NoInteractionError
from ac_coupling_project.geometry.exact_geometry import (
    IntPoint,
    PointLocation,
    Polygon,
    Region,
    chi_profile,
    closed_segment_touch_points,
)

HEXAGONAL_MATRIX = ((1.0, -0.5), (0.0, sqrt(3.0) / 2.0))


class LatticeSpec(BaseModel):
    """Bravais 格点描述"""
    model_config = ConfigDict(frozen=True)

    dimension: int = Field(2, ge=1, le=2, description="维数：1 或 2")
    lattice_matrix: Tuple[Tuple[float, float], Tuple[float, float]] = Field(
        ((1.0, 0.0), (0.0, 1.0)), description="格点矩阵 A，指标到物理坐标的线性映射"
    )
    cutoff: float = Field(..., gt=0.0, description="截断半径 R_cut，以最近邻间距为单位")

    @field_validator("lattice_matrix")
    @classmethod
    def _positive_determinant(cls, value: Tuple[Tuple[float, float], Tuple[float, float]]):
        (a, b), (c, d) = value
        if a * d - b * c <= 0:
            raise ValueError("格点矩阵行列式必须为正")
        return value

    @classmethod
    def hexagonal(cls, cutoff: float) -> "LatticeSpec":
        return cls(dimension=2, lattice_matrix=HEXAGONAL_MATRIX, cutoff=cutoff)

    @classmethod
    def square(cls, cutoff: float, dimension: int = 2) -> "LatticeSpec":
        return cls(dimension=dimension, cutoff=cutoff)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.lattice_matrix, dtype=float)

    def physical(self, sites: Union[Sequence[IntPoint], np.ndarray]) -> np.ndarray:
        """指标坐标 -> 物理坐标 x = A i"""
        return np.asarray(sites, dtype=float) @ self.matrix.T

    def length(self, r: IntPoint) -> float:
        return float(np.linalg.norm(self.matrix @ np.asarray(r, dtype=float)))


@dataclass(frozen=True)
class NeighborSet:
    """相互作用方向集合 ℛ，每个 ±r 对只保留一个代表"""
    lattice: LatticeSpec
    directions: Tuple[IntPoint, ...]
    cutoff_closed: bool = True

    def __post_init__(self) -> None:
        dirs = tuple((int(x), int(y)) for x, y in self.directions)
        seen = set(dirs)
        if (0, 0) in seen:
            raise ValueError("邻居方向不能包含零向量")
        if len(seen) != len(dirs):
            raise ValueError("邻居方向存在重复")
        for r in dirs:
            if (-r[0], -r[1]) in seen:
                raise ValueError(f"方向 {r} 与其反向同时出现")
            if self.lattice.length(r) > self.lattice.cutoff + 1e-9:
                raise ValueError(f"方向 {r} 超出截断半径")
        object.__setattr__(self, "directions", dirs)

    @classmethod
    def explicit(cls, lattice: LatticeSpec, directions: Iterable[IntPoint]) -> "NeighborSet":
        """由给定方向构造(不要求在截断半径内封闭)"""
        return cls(lattice=lattice, directions=tuple(directions), cutoff_closed=False)

    def __len__(self) -> int:
        return len(self.directions)

    def __iter__(self):
        return iter(self.directions)

    def full(self) -> Tuple[IntPoint, ...]:
        """ℛ ∪ (−ℛ)"""
        return self.directions + tuple((-x, -y) for x, y in self.directions)

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.array([self.lattice.length(r) for r in self.directions])

    @cached_property
    def max_length(self) -> float:
        return float(self.lengths.max())

    def nearest_directions(self) -> Tuple[IntPoint, ...]:
        shortest = self.lengths.min()
        return tuple(r for r, l in zip(self.directions, self.lengths) if l <= shortest + 1e-9)

    @cached_property
    def max_index_extent(self) -> int:
        return max(max(abs(x), abs(y)) for x, y in self.directions)


def build_neighbor_set(lattice: LatticeSpec) -> NeighborSet:
    """
    枚举截断半径内的全部方向代表

    代表取 r_x > 0，或 r_x = 0 且 r_y > 0；按 (r_x, r_y) 字典序排列

    Args:
        lattice: 格点描述

    Returns:
        邻居集合

    Raises:
        NoInteractionError: 截断半径内没有方向
    """
    sigma_min = np.linalg.svd(lattice.matrix, compute_uv=False).min()
    bound = int(ceil(lattice.cutoff / sigma_min)) + 1
    y_range = range(-bound, bound + 1) if lattice.dimension == 2 else range(0, 1)
    found: List[IntPoint] = []
    for rx in range(0, bound + 1):
        for ry in y_range:
            if rx == 0 and ry <= 0:
                continue
            if lattice.length((rx, ry)) <= lattice.cutoff + 1e-9:
                found.append((rx, ry))
    if not found:
        raise NoInteractionError(lattice.cutoff)
    found.sort()
    logger.debug(f"截断半径 {lattice.cutoff} 内共 {len(found)} 个方向代表")
    return NeighborSet(lattice=lattice, directions=tuple(found))


@dataclass(frozen=True, order=True)
class Bond:
    """键 (i, i+r)"""
    base: IntPoint
    direction: IntPoint

    @property
    def end(self) -> IntPoint:
        return (self.base[0] + self.direction[0], self.base[1] + self.direction[1])


class BondTag(str, Enum):
    INTERIOR_ATOMISTIC = "interior_atomistic"
    INTERIOR_CONTINUUM = "interior_continuum"
    CROSSING = "crossing"


class CrossingSubtype(str, Enum):
    ONE_POINT = "one_point"
    TWO_POINTS = "two_points"
    INTERVAL_ON_GAMMA = "interval_on_Γ"


@dataclass(frozen=True)
class BondClass:
    tag: BondTag
    crossing_subtype: Optional[CrossingSubtype] = None


@dataclass(frozen=True)
class DomainDecomposition:
    """
    区域分解

    - domain: Ω 的闭多边形，I 为其中格点去掉空位
    - continuum: 连续介质区域 Ω_c(外多边形减孔洞)
    - free_polygon: 自由原子所在的开多边形，其外(含边界)的格点构成 Dirichlet 集 I_D
    - vacancies: 缺陷移除的格点

    原子区域 Ω_a 取为 Ω 中 closure(Ω_c) 的补集，界面 Γ = ∂Ω_c
    """
    lattice: LatticeSpec
    neighbors: NeighborSet
    domain: Polygon
    continuum: Region
    free_polygon: Optional[Polygon] = None
    vacancies: FrozenSet[IntPoint] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        object.__setattr__(self, "vacancies", frozenset((int(x), int(y)) for x, y in self.vacancies))
        for v in self.continuum.outer.vertices:
            if self.domain.locate(v) is PointLocation.EXTERIOR:
                raise DomainValidationError(f"连续介质区域顶点 {v} 不在 Ω 内")
        self._validate()
        logger.debug(
            f"区域分解: |I|={len(self.sites)}, |I_a|={len(self.atomistic_sites)}, "
            f"|I_D|={len(self.dirichlet_sites)}, |Γ格点|={len(self.interface_sites)}"
        )

    @cached_property
    def sites(self) -> Tuple[IntPoint, ...]:
        """I：Ω 闭包内的格点去掉空位"""
        return tuple(p for p in self.domain.lattice_points(closed=True) if p not in self.vacancies)

    @cached_property
    def site_set(self) -> FrozenSet[IntPoint]:
        return frozenset(self.sites)

    @cached_property
    def _site_locations(self) -> Dict[IntPoint, PointLocation]:
        return {p: self.continuum.locate(p) for p in self.sites}

    @cached_property
    def atomistic_sites(self) -> Tuple[IntPoint, ...]:
        """I_a：不在 closure(Ω_c) 中的格点"""
        return tuple(p for p in self.sites if self._site_locations[p] is PointLocation.EXTERIOR)

    @cached_property
    def interface_sites(self) -> Tuple[IntPoint, ...]:
        """Γ 上的格点"""
        return tuple(
            p for p in self.sites
            if self._site_locations[p] in (PointLocation.EDGE, PointLocation.VERTEX)
        )

    @cached_property
    def continuum_sites(self) -> Tuple[IntPoint, ...]:
        """closure(Ω_c) 中的格点"""
        return tuple(p for p in self.sites if self._site_locations[p] is not PointLocation.EXTERIOR)

    @cached_property
    def dirichlet_sites(self) -> Tuple[IntPoint, ...]:
        if self.free_polygon is None:
            return ()
        return tuple(
            p for p in self.sites
            if self.free_polygon.locate(p) is not PointLocation.INTERIOR
        )

    @cached_property
    def dirichlet_set(self) -> FrozenSet[IntPoint]:
        return frozenset(self.dirichlet_sites)

    @cached_property
    def free_index_map(self) -> Dict[IntPoint, int]:
        """I \\ I_D 到稠密区间的双射"""
        free = [p for p in self.sites if p not in self.dirichlet_set]
        return {p: k for k, p in enumerate(free)}

    @cached_property
    def atomistic_convex(self) -> bool:
        """原子核心区(Ω_c 的唯一孔洞)是否为凸多边形；外围约束层不计入"""
        return len(self.continuum.holes) == 1 and self.continuum.holes[0].is_convex

    def _validate(self) -> None:
        for p in self.dirichlet_sites:
            if self._site_locations[p] is PointLocation.INTERIOR:
                raise DomainValidationError(f"Dirichlet 原子 {p} 位于 Ω_c 内部")
        allowed = self.site_set | self.vacancies
        full = self.neighbors.full()
        for p in self.sites:
            if p in self.dirichlet_set:
                continue
            for r in full:
                q = (p[0] + r[0], p[1] + r[1])
                if q not in allowed:
                    raise DomainValidationError(
                        f"自由原子 {p} 缺少邻居 {q}，边界约束层宽度不足"
                    )
        # 与 closure(Ω_c) 相交的键两端都必须在 I 中
        x0, y0, x1, y1 = self.continuum.outer.bbox
        reach = self.neighbors.max_index_extent
        for p in self.sites:
            if not (x0 - reach <= p[0] <= x1 + reach and y0 - reach <= p[1] <= y1 + reach):
                continue
            for r in full:
                q = (p[0] + r[0], p[1] + r[1])
                if q in allowed:
                    continue
                if _segment_meets_closure(p, r, self.continuum):
                    raise DomainValidationError(f"键 ({p}, {q}) 与 Ω_c 相交但端点不在 I 中")

    def to_json(self) -> str:
        doc = DecompositionDocument(
            lattice=self.lattice,
            directions=list(self.neighbors.directions),
            cutoff_closed=self.neighbors.cutoff_closed,
            domain=list(self.domain.vertices),
            continuum_outer=list(self.continuum.outer.vertices),
            continuum_holes=[list(h.vertices) for h in self.continuum.holes],
            free_polygon=list(self.free_polygon.vertices) if self.free_polygon else None,
            vacancies=sorted(self.vacancies),
        )
        return doc.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DomainDecomposition":
        doc = DecompositionDocument.model_validate(json.loads(text))
        neighbors = NeighborSet(doc.lattice, tuple(doc.directions), doc.cutoff_closed)
        return cls(
            lattice=doc.lattice,
            neighbors=neighbors,
            domain=Polygon(tuple(doc.domain)),
            continuum=Region(
                Polygon(tuple(doc.continuum_outer)),
                tuple(Polygon(tuple(h)) for h in doc.continuum_holes),
            ),
            free_polygon=Polygon(tuple(doc.free_polygon)) if doc.free_polygon else None,
            vacancies=frozenset(doc.vacancies),
        )


class DecompositionDocument(BaseModel):
    """区域分解的 JSON 文档；格点集合在加载时重新生成"""
    lattice: LatticeSpec
    directions: List[Tuple[int, int]] = Field(..., description="邻居方向代表")
    cutoff_closed: bool = Field(True, description="方向集合是否为截断半径内的完整集合")
    domain: List[Tuple[int, int]] = Field(..., description="Ω 顶点")
    continuum_outer: List[Tuple[int, int]] = Field(..., description="Ω_c 外边界顶点")
    continuum_holes: List[List[Tuple[int, int]]] = Field(default_factory=list, description="Ω_c 孔洞")
    free_polygon: Optional[List[Tuple[int, int]]] = Field(None, description="自由原子开多边形")
    vacancies: List[Tuple[int, int]] = Field(default_factory=list, description="空位")


def _segment_meets_closure(p: IntPoint, d: IntPoint, region: Region) -> bool:
    if any(piece.chi > 0 for piece in chi_profile(p, d, region)):
        return True
    points, intervals = closed_segment_touch_points(p, d, region)
    return bool(points or intervals)


def enumerate_bonds(
    decomp: Union[DomainDecomposition, Iterable[IntPoint]],
    nbrs: NeighborSet,
) -> List[Bond]:
    """
    全部键 {(i, i+r) : r ∈ ℛ, i ∈ I, i+r ∈ I}

    按格点顺序、再按方向顺序排列，每个几何键只出现一次
    """
    sites = decomp.sites if isinstance(decomp, DomainDecomposition) else sorted(
        (int(x), int(y)) for x, y in decomp
    )
    site_set = set(sites)
    bonds = []
    for i in sites:
        for r in nbrs.directions:
            if (i[0] + r[0], i[1] + r[1]) in site_set:
                bonds.append(Bond(i, r))
    return bonds


def vacancy_bonds(decomp: DomainDecomposition) -> List[Bond]:
    """
    端点含空位且进入 Ω_c 的格点线段

    这些线段不属于 ℬ，但其在 Ω_c 内的部分被 Cauchy-Born 积分计入，装配时需扣除
    """
    if not decomp.vacancies:
        return []
    lattice_points = decomp.site_set | decomp.vacancies
    directions = set(decomp.neighbors.directions)
    found = set()
    for v in decomp.vacancies:
        for r in decomp.neighbors.full():
            q = (v[0] + r[0], v[1] + r[1])
            if q not in lattice_points:
                continue
            b = Bond(v, r) if r in directions else Bond(q, (-r[0], -r[1]))
            if b not in found and any(piece.chi > 0 for piece in chi_profile(b.base, b.direction, decomp.continuum)):
                found.add(b)
    bonds = sorted(found)
    if bonds:
        logger.debug(f"空位键: {len(bonds)} 条进入 Ω_c")
    return bonds


def classify_bond(b: Bond, decomp: DomainDecomposition) -> BondClass:
    """
    键分类：interior_continuum(开线段含于 Ω_c)、interior_atomistic(闭线段含于 Ω_a)、
    其余为 crossing；Ω_a 为凸集时按与 Γ 的接触方式给出子类型
    """
    profile = chi_profile(b.base, b.direction, decomp.continuum)
    if len(profile) == 1 and profile[0].chi == 1:
        return BondClass(BondTag.INTERIOR_CONTINUUM)
    points, intervals = closed_segment_touch_points(b.base, b.direction, decomp.continuum)
    if not points and not intervals and all(piece.chi == 0 for piece in profile):
        return BondClass(BondTag.INTERIOR_ATOMISTIC)
    subtype = None
    if decomp.atomistic_convex:
        if intervals:
            subtype = CrossingSubtype.INTERVAL_ON_GAMMA
        elif len(points) >= 2:
            subtype = CrossingSubtype.TWO_POINTS
        else:
            subtype = CrossingSubtype.ONE_POINT
    return BondClass(BondTag.CROSSING, subtype)


def classify_bonds(bonds: Sequence[Bond], decomp: DomainDecomposition) -> List[BondClass]:
    """批量分类：远离界面的键用浮点预筛选加中点判定，其余走精确路径"""
    if not bonds:
        return []
    starts = np.array([b.base for b in bonds], dtype=float)
    ends = np.array([b.end for b in bonds], dtype=float)
    near = decomp.continuum.segments_near_boundary(starts, ends)
    classes: List[BondClass] = []
    for b, is_near in zip(bonds, near):
        if is_near:
            classes.append(classify_bond(b, decomp))
            continue
        X = 2 * b.base[0] + b.direction[0]
        Y = 2 * b.base[1] + b.direction[1]
        inside = decomp.continuum.chi_homogeneous(X, Y, 2) == 1
        classes.append(BondClass(BondTag.INTERIOR_CONTINUUM if inside else BondTag.INTERIOR_ATOMISTIC))
    logger.debug(f"键分类完成: 共 {len(bonds)} 条，其中 {int(near.sum())} 条靠近界面")
    return classes


def bond_in_continuum(b: Bond, decomp: DomainDecomposition) -> bool:
    """b ⊂ Ω_c(开线段)"""
    profile = chi_profile(b.base, b.direction, decomp.continuum)
    return len(profile) == 1 and profile[0].chi == Fraction(1)
