"""
键几何

多边形特征函数、键平均、按区域剖分键、有效面积 Ω_{T,r} 以及键密度恒等式检验。
全部结果为有理数，只有在能量装配时才转换为浮点数
"""
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ac_coupling_project.errors import InternalGeometryError
from ac_coupling_project.geometry.exact_geometry import (
    IntPoint,
    PointLocation,
    Polygon,
    RationalPoint,
    Region,
    chi_profile,
    homogeneous,
)
from ac_coupling_project.lattice.lattice_domain import BondTag, classify_bonds

Triangle = Tuple[IntPoint, IntPoint, IntPoint]


@dataclass(frozen=True)
class CharacteristicValue:
    """
    特征函数取值

    顶点处 value 为内角分数 α/(2π) 的有理近似，同时记录 angle_fraction 浮点值
    """
    value: Fraction
    location: PointLocation
    angle_fraction: Optional[float] = None

    def __float__(self) -> float:
        return float(self.value)


def chi_at_point(omega: Union[Polygon, Region], x: RationalPoint) -> CharacteristicValue:
    """多边形(或区域)特征函数在有理点 x 处的值"""
    region = omega if isinstance(omega, Region) else Region(omega)
    X, Y, m = homogeneous(x)
    value = region.chi_homogeneous(X, Y, m)
    loc = region.locate(x)
    if loc is PointLocation.VERTEX:
        return CharacteristicValue(value, loc, float(value))
    return CharacteristicValue(value, loc)


def _segment_tuple(b) -> Tuple[IntPoint, IntPoint]:
    if hasattr(b, "base"):
        return b.base, b.direction
    p, r = b
    return (int(p[0]), int(p[1])), (int(r[0]), int(r[1]))


@lru_cache(maxsize=None)
def _normalized_average(tri: Triangle, p: IntPoint, r: IntPoint) -> Fraction:
    return sum(
        (piece.length * piece.chi for piece in chi_profile(p, r, Polygon(tri))),
        Fraction(0),
    )


def bond_average_chi(b, T: Sequence[IntPoint]) -> Fraction:
    """
    ⨍_b χ_T db：内部重叠权重1，沿边重叠权重1/2，孤立交点不计

    结果按平移归一化后缓存(平移不变性)

    Args:
        b: Bond 或 (i, r)
        T: 三角形的三个格点顶点
    """
    p, r = _segment_tuple(b)
    tri = tuple(sorted((int(v[0]), int(v[1])) for v in T))
    ox, oy = tri[0]
    key = tuple((x - ox, y - oy) for x, y in tri)
    return _normalized_average(key, (p[0] - ox, p[1] - oy), r)


@dataclass(frozen=True)
class BondPartition:
    """键在原子区域上的剖分：断点 t_0 < … < t_M 与每段权重 w_m = χ_{Ω_a}"""
    breakpoints: Tuple[Fraction, ...]
    weights: Tuple[Fraction, ...]

    @property
    def total_weight(self) -> Fraction:
        """W = Σ w_m (t_m − t_{m−1})"""
        return sum(
            (w * (t1 - t0) for w, t0, t1 in zip(self.weights, self.breakpoints, self.breakpoints[1:])),
            Fraction(0),
        )

    def segments(self):
        return zip(self.weights, self.breakpoints, self.breakpoints[1:])


def partition_bond(b, omega_c: Region) -> BondPartition:
    """
    沿键的 χ_{Ω_a} = 1 − χ_{Ω_c} 分段

    Args:
        b: Bond 或 (i, r)
        omega_c: 连续介质区域

    Returns:
        极大段剖分
    """
    p, r = _segment_tuple(b)
    pieces = chi_profile(p, r, omega_c)
    breakpoints = (pieces[0].t0,) + tuple(piece.t1 for piece in pieces)
    return BondPartition(breakpoints, tuple(1 - piece.chi for piece in pieces))


def continuum_overlap(b, omega_c: Region) -> Fraction:
    """⨍_b χ_{Ω_c} db"""
    p, r = _segment_tuple(b)
    return sum((piece.length * piece.chi for piece in chi_profile(p, r, omega_c)), Fraction(0))


def _float_overlap(p: IntPoint, r: IntPoint, tri: Triangle, tol: float = 1e-9) -> bool:
    """浮点裁剪：线段与闭三角形的重叠长度是否可能为正"""
    (ax, ay), (bx, by), (cx, cy) = tri
    if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) < 0:
        (bx, by), (cx, cy) = (cx, cy), (bx, by)
    t0, t1 = 0.0, 1.0
    for (ex0, ey0), (ex1, ey1) in (((ax, ay), (bx, by)), ((bx, by), (cx, cy)), ((cx, cy), (ax, ay))):
        ex, ey = ex1 - ex0, ey1 - ey0
        f0 = ex * (p[1] - ey0) - ey * (p[0] - ex0) + tol
        slope = ex * r[1] - ey * r[0]
        if slope == 0:
            if f0 < 0:
                return False
            continue
        t = -f0 / slope
        if slope > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t1 - t0 <= tol:
            return False
    return True


def bond_triangle_weights(b, mesh) -> List[Tuple[int, Fraction]]:
    """
    键与网格单元的平均权重 β_{b,T} = ⨍_b χ_T db

    只返回非零权重；按三角形编号排序
    """
    p, r = _segment_tuple(b)
    q = (p[0] + r[0], p[1] + r[1])
    weights = []
    for t in mesh.candidate_triangles(min(p[0], q[0]), min(p[1], q[1]), max(p[0], q[0]), max(p[1], q[1])):
        tri = mesh.triangle_sites(t)
        if not _float_overlap(p, r, tri):
            continue
        beta = bond_average_chi((p, r), tri)
        if beta:
            weights.append((t, beta))
    return weights


@dataclass(frozen=True, eq=False)
class EffectiveAreaTable:
    """(T, r) -> Ω_{T,r}；directions 与 areas 的列一一对应"""
    directions: Tuple[IntPoint, ...]
    areas: Tuple[Tuple[Fraction, ...], ...]

    def area(self, t: int, r: IntPoint) -> Fraction:
        return self.areas[t][self.directions.index(tuple(r))]

    def as_array(self) -> np.ndarray:
        return np.array([[float(a) for a in row] for row in self.areas])

    def column_sum(self, r: IntPoint) -> Fraction:
        k = self.directions.index(tuple(r))
        return sum((row[k] for row in self.areas), Fraction(0))


def effective_areas(
    mesh,
    bonds: Sequence,
    decomp,
    classes: Optional[Sequence] = None,
    removed: Sequence = (),
) -> EffectiveAreaTable:
    """
    有效面积的两步算法

    第一步令 Ω_{T,r} = |T|；第二步对每条不含于 Ω_c 的键 b = (i, i+r)，
    从与之相交的三角形中减去 β_{b,T}(沿边重叠自动带 1/2 因子)。
    removed 中的线段(端点为空位)不属于 ℬ，其 β_{b,T} 同样扣除

    Args:
        mesh: 三角剖分
        bonds: 键列表
        decomp: 区域分解
        classes: 可选的键分类结果(与 bonds 对齐)
        removed: 端点含空位、进入 Ω_c 的线段

    Returns:
        有效面积表

    Raises:
        InternalGeometryError: 出现负的有效面积
    """
    directions = tuple(decomp.neighbors.directions)
    col = {r: k for k, r in enumerate(directions)}
    table: List[List[Fraction]] = [[a] * len(directions) for a in mesh.areas]
    if classes is None:
        classes = classify_bonds(bonds, decomp)
    touched = 0
    for b, cls in zip(bonds, classes):
        if cls.tag is not BondTag.CROSSING:
            continue
        k = col[b.direction]
        for t, beta in bond_triangle_weights(b, mesh):
            table[t][k] -= beta
            touched += 1
    for b in removed:
        k = col[b.direction]
        for t, beta in bond_triangle_weights(b, mesh):
            table[t][k] -= beta
            touched += 1
    for t, row in enumerate(table):
        for k, value in enumerate(row):
            if value < 0:
                raise InternalGeometryError(
                    f"三角形 {mesh.triangle_sites(t)} 方向 {directions[k]} 的有效面积为负: {value}"
                )
    logger.debug(f"有效面积: 修正 {touched} 个 (T, r) 项")
    return EffectiveAreaTable(directions, tuple(tuple(row) for row in table))


def verify_bond_density(T: Sequence[IntPoint], r: IntPoint) -> Tuple[Fraction, Fraction]:
    """
    键密度恒等式 Σ_i ⨍_{(i,i+r)} χ_T db = |T|

    Returns:
        (lhs, rhs)
    """
    tri = tuple((int(v[0]), int(v[1])) for v in T)
    rx, ry = int(r[0]), int(r[1])
    if (rx, ry) == (0, 0):
        raise ValueError("方向 r 不能为零")
    poly = Polygon(tri)
    x0, y0, x1, y1 = poly.bbox
    lhs = Fraction(0)
    for ix in range(x0 - max(0, rx), x1 - min(0, rx) + 1):
        for iy in range(y0 - max(0, ry), y1 - min(0, ry) + 1):
            lhs += bond_average_chi(((ix, iy), (rx, ry)), tri)
    return lhs, poly.area
