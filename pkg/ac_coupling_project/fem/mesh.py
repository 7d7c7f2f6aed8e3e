"""
连续介质区域的三角剖分与分片线性场

节点全部位于格点上；完全细化网格直接由单位格点三角形拼成，
非对齐界面与分级网格使用 triangle 库的约束 Delaunay 剖分(不插入 Steiner 点)
"""
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from math import ceil, gcd
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import triangle as tr
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from ac_coupling_project.errors import DofLayoutError, MeshError
from ac_coupling_project.geometry.exact_geometry import (
    IntPoint,
    RationalPoint,
    Region,
    iter_unit_triangles,
)
from ac_coupling_project.lattice.lattice_domain import DomainDecomposition, LatticeSpec


class MeshGrading(BaseModel):
    """网格分级方式"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["full", "graded"] = Field("full", description="full 完全细化；graded 分级粗化")
    band_width: int = Field(4, ge=1, description="界面附近完全细化带宽 w(物理长度)")
    coarsening: int = Field(2, ge=2, description="每一环的粗化倍数")
    ring_width: int = Field(3, ge=1, description="每一环包含的粗网格间距数")


@dataclass(frozen=True, eq=False)
class Triangulation:
    """节点位于格点的协调三角剖分，三角形在指标空间中正定向"""
    nodes: Tuple[IntPoint, ...]
    triangles: np.ndarray
    areas: Tuple[Fraction, ...]
    lattice: Optional[LatticeSpec] = None

    @cached_property
    def node_index(self) -> Dict[IntPoint, int]:
        return {p: k for k, p in enumerate(self.nodes)}

    @cached_property
    def node_array(self) -> np.ndarray:
        return np.array(self.nodes, dtype=np.int64).reshape(-1, 2)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def total_area(self) -> Fraction:
        return sum(self.areas, Fraction(0))

    @cached_property
    def area_array(self) -> np.ndarray:
        return np.array([float(a) for a in self.areas])

    def triangle_sites(self, t: int) -> Tuple[IntPoint, IntPoint, IntPoint]:
        a, b, c = self.triangles[t]
        return self.nodes[a], self.nodes[b], self.nodes[c]

    @cached_property
    def edges(self) -> np.ndarray:
        """全部网格边(节点编号对，升序去重)"""
        tri = self.triangles
        pairs = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        pairs.sort(axis=1)
        return np.unique(pairs, axis=0)

    @cached_property
    def _inverse_frames(self) -> np.ndarray:
        """每个三角形 M = [p1−p0, p2−p0] 的逆矩阵 (m, 2, 2)"""
        pts = self.node_array[self.triangles]
        frames = np.stack([pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0]], axis=2).astype(float)
        det = frames[:, 0, 0] * frames[:, 1, 1] - frames[:, 0, 1] * frames[:, 1, 0]
        if np.any(det == 0):
            raise MeshError("网格中存在退化三角形")
        inv = np.empty_like(frames)
        inv[:, 0, 0] = frames[:, 1, 1] / det
        inv[:, 1, 1] = frames[:, 0, 0] / det
        inv[:, 0, 1] = -frames[:, 0, 1] / det
        inv[:, 1, 0] = -frames[:, 1, 0] / det
        return inv

    def directional_coefficients(self, r: IntPoint) -> np.ndarray:
        """
        ∇_r y|_T = Σ_k c_k y_{T,k} 的系数，形状 (m, 3)

        s = M⁻¹ r，J r = (y1 − y0) s0 + (y2 − y0) s1
        """
        s = self._inverse_frames @ np.asarray(r, dtype=float)
        return np.stack([-s[:, 0] - s[:, 1], s[:, 0], s[:, 1]], axis=1)

    @cached_property
    def _cell_index(self) -> Dict[IntPoint, List[int]]:
        cells: Dict[IntPoint, List[int]] = defaultdict(list)
        pts = self.node_array[self.triangles]
        lo = pts.min(axis=1)
        hi = pts.max(axis=1)
        for t in range(len(pts)):
            for x in range(lo[t, 0], hi[t, 0] + 1):
                for y in range(lo[t, 1], hi[t, 1] + 1):
                    cells[(x, y)].append(t)
        return cells

    def candidate_triangles(self, x0: float, y0: float, x1: float, y1: float) -> List[int]:
        """包围盒 [x0,x1]×[y0,y1] 附近的候选三角形"""
        found = set()
        for x in range(int(np.floor(x0)) - 1, int(np.ceil(x1)) + 1):
            for y in range(int(np.floor(y0)) - 1, int(np.ceil(y1)) + 1):
                found.update(self._cell_index.get((x, y), ()))
        return sorted(found)

    def barycentric(self, t: int, point: RationalPoint) -> Tuple[Fraction, Fraction, Fraction]:
        p0, p1, p2 = self.triangle_sites(t)
        x, y = Fraction(point[0]) - p0[0], Fraction(point[1]) - p0[1]
        ax, ay = p1[0] - p0[0], p1[1] - p0[1]
        bx, by = p2[0] - p0[0], p2[1] - p0[1]
        det = ax * by - ay * bx
        l1 = (x * by - y * bx) / det
        l2 = (ax * y - ay * x) / det
        return 1 - l1 - l2, l1, l2

    def locate(self, point: RationalPoint) -> Tuple[int, Tuple[Fraction, Fraction, Fraction]]:
        """
        精确定位点所在(闭)三角形

        Raises:
            DofLayoutError: 点不在网格覆盖范围内
        """
        px, py = float(point[0]), float(point[1])
        for t in self.candidate_triangles(px, py, px, py):
            lam = self.barycentric(t, point)
            if min(lam) >= 0:
                return t, lam
        raise DofLayoutError(f"点 {point} 不在网格中")

    def interpolation_weights(self, point: RationalPoint) -> Dict[int, Fraction]:
        """点处 P1 插值的节点权重"""
        key = (Fraction(point[0]), Fraction(point[1]))
        if key[0].denominator == 1 and key[1].denominator == 1:
            k = self.node_index.get((int(key[0]), int(key[1])))
            if k is not None:
                return {k: Fraction(1)}
        t, lam = self.locate(key)
        return {int(n): w for n, w in zip(self.triangles[t], lam) if w != 0}


@dataclass(frozen=True, eq=False)
class PiecewiseAffineField:
    """P1(𝒯) 中的场：每个节点一个取值向量"""
    mesh: Triangulation
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if len(values) != len(self.mesh.nodes):
            raise DofLayoutError("节点取值数量与网格节点数不一致")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: Triangulation, func) -> "PiecewiseAffineField":
        return cls(mesh, np.array([func(np.asarray(p, dtype=float)) for p in mesh.nodes]))

    def element_jacobian(self, t: int) -> np.ndarray:
        """y|_T 在指标坐标下的 Jacobian"""
        a, b, c = self.mesh.triangles[t]
        dy = np.stack([self.values[b] - self.values[a], self.values[c] - self.values[a]], axis=1)
        return dy @ self.mesh._inverse_frames[t]

    def evaluate(self, point: RationalPoint) -> np.ndarray:
        weights = self.mesh.interpolation_weights(point)
        return sum(float(w) * self.values[k] for k, w in weights.items())


def directional_derivative(field: PiecewiseAffineField, t: int, r: IntPoint) -> np.ndarray:
    """三角形 T 上 ∇_r y 的常数值"""
    if not 0 <= t < field.mesh.n_triangles:
        raise MeshError(f"三角形编号 {t} 越界")
    coeffs = field.mesh.directional_coefficients(r)[t]
    nodes = field.mesh.triangles[t]
    return coeffs @ field.values[nodes]


def lattice_jacobian(
    values: np.ndarray,
    triangle_sites: Sequence[IntPoint],
    lattice: LatticeSpec,
) -> np.ndarray:
    """
    单位格点三角形上变形的仿射 Jacobian(相对物理参考坐标)

    Args:
        values: (3, 2) 三个原子的变形位置
        triangle_sites: 三个格点指标
        lattice: 格点描述

    Returns:
        2×2 矩阵
    """
    x = lattice.physical(triangle_sites)
    frame = np.stack([x[1] - x[0], x[2] - x[0]], axis=1)
    dy = np.stack([values[1] - values[0], values[2] - values[0]], axis=1)
    return dy @ np.linalg.inv(frame)


@dataclass(frozen=True, eq=False)
class LatticeTriangleSet:
    """三个顶点都属于 I 的全部单位格点三角形"""
    triangles: np.ndarray

    @classmethod
    def from_decomposition(cls, decomp: DomainDecomposition) -> "LatticeTriangleSet":
        sites = decomp.site_set
        x0, y0, x1, y1 = decomp.domain.bbox
        keep = [tri for tri in iter_unit_triangles(x0, y0, x1, y1) if all(p in sites for p in tri)]
        return cls(np.array(keep, dtype=np.int64).reshape(-1, 3, 2))

    def __len__(self) -> int:
        return len(self.triangles)


def build_mesh(decomp: DomainDecomposition, grading: Optional[MeshGrading] = None) -> Triangulation:
    """
    构造 Ω_c 的三角剖分

    Args:
        decomp: 区域分解
        grading: 分级方式，默认完全细化

    Returns:
        三角剖分

    Raises:
        MeshError: 覆盖不精确、出现非格点节点或退化单元
    """
    grading = grading or MeshGrading()
    region = decomp.continuum
    if grading.kind == "full":
        mesh = _unit_triangle_mesh(region, decomp.lattice)
        if mesh is not None:
            logger.debug(f"完全细化网格: {mesh.n_triangles} 个单元")
            return mesh
        logger.debug("界面与格点方向不对齐，改用约束 Delaunay 剖分")
        sites = region.lattice_points(closed=True)
    else:
        if grading.band_width < ceil(decomp.lattice.cutoff):
            raise MeshError(f"细化带宽 {grading.band_width} 小于 ceil(R_cut)")
        sites = _graded_sites(region, decomp.lattice, grading)
    mesh = _constrained_triangulation(region, sites, decomp.lattice)
    logger.debug(f"约束剖分网格: {len(mesh.nodes)} 个节点, {mesh.n_triangles} 个单元")
    return mesh


def _unit_triangle_mesh(region: Region, lattice: LatticeSpec) -> Optional[Triangulation]:
    x0, y0, x1, y1 = region.outer.bbox
    keep = []
    for tri in iter_unit_triangles(x0, y0, x1, y1):
        cx = tri[0][0] + tri[1][0] + tri[2][0]
        cy = tri[0][1] + tri[1][1] + tri[2][1]
        if region.chi_homogeneous(cx, cy, 3) != 1:
            continue
        if all(region.contains_closed(p) for p in tri):
            keep.append(tri)
    if Fraction(len(keep), 2) != region.area:
        return None
    return _assemble(keep, lattice)


def _assemble(tris: Sequence[Tuple[IntPoint, IntPoint, IntPoint]], lattice: LatticeSpec) -> Triangulation:
    nodes = sorted({p for tri in tris for p in tri})
    index = {p: k for k, p in enumerate(nodes)}
    triangles = np.empty((len(tris), 3), dtype=np.int64)
    areas = []
    for t, (a, b, c) in enumerate(tris):
        twice = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if twice == 0:
            raise MeshError(f"退化三角形 {a}, {b}, {c}")
        if twice < 0:
            b, c = c, b
        triangles[t] = (index[a], index[b], index[c])
        areas.append(Fraction(abs(twice), 2))
    return Triangulation(tuple(nodes), triangles, tuple(areas), lattice)


def _boundary_lattice_points(region: Region) -> List[Tuple[IntPoint, IntPoint]]:
    """把边界边在格点处切分为线段"""
    pieces = []
    for a, b in region.boundary_edges:
        dx, dy = b[0] - a[0], b[1] - a[1]
        g = gcd(abs(dx), abs(dy))
        sx, sy = dx // g, dy // g
        for k in range(g):
            pieces.append(((a[0] + k * sx, a[1] + k * sy), (a[0] + (k + 1) * sx, a[1] + (k + 1) * sy)))
    return pieces


def _constrained_triangulation(
    region: Region,
    sites: Sequence[IntPoint],
    lattice: LatticeSpec,
) -> Triangulation:
    pieces = _boundary_lattice_points(region)
    points = sorted(set(sites) | {p for piece in pieces for p in piece})
    index = {p: k for k, p in enumerate(points)}
    data = {
        "vertices": lattice.physical(points),
        "segments": np.array([[index[a], index[b]] for a, b in pieces], dtype=np.int32),
    }
    if region.holes:
        holes = [hole.interior_point() for hole in region.holes]
        data["holes"] = lattice.physical(np.array([[float(x), float(y)] for x, y in holes]))
    result = tr.triangulate(data, "pQ")
    if len(result["vertices"]) != len(points):
        raise MeshError("约束剖分插入了非格点节点")
    tris = []
    for a, b, c in result["triangles"]:
        tri = (points[a], points[b], points[c])
        cx = sum(p[0] for p in tri)
        cy = sum(p[1] for p in tri)
        if region.chi_homogeneous(cx, cy, 3) != 1:
            raise MeshError(f"三角形 {tri} 落在 Ω_c 之外")
        tris.append(tri)
    mesh = _assemble(tris, lattice)
    if mesh.total_area != region.area:
        raise MeshError(f"网格面积 {mesh.total_area} 与 |Ω_c| = {region.area} 不一致")
    return mesh


def boundary_distances(points: np.ndarray, region: Region, lattice: LatticeSpec) -> np.ndarray:
    """格点到 ∂Ω_c 的物理距离"""
    phys = lattice.physical(points)
    best = np.full(len(phys), np.inf)
    for a, b in region.boundary_edges:
        pa, pb = lattice.physical([a, b])
        ab = pb - pa
        t = np.clip(((phys - pa) @ ab) / (ab @ ab), 0.0, 1.0)
        best = np.minimum(best, np.linalg.norm(phys - (pa + t[:, None] * ab), axis=1))
    return best


def _graded_sites(region: Region, lattice: LatticeSpec, grading: MeshGrading) -> List[IntPoint]:
    candidates = region.lattice_points(closed=True)
    arr = np.array(candidates, dtype=np.int64)
    dist = boundary_distances(arr, region, lattice)
    keep = dist <= grading.band_width + 1e-9
    inner = float(grading.band_width)
    spacing = 1
    far = float(dist.max()) if len(dist) else 0.0
    while inner < far:
        spacing *= grading.coarsening
        outer = inner + grading.ring_width * spacing
        ring = (dist > inner + 1e-9) & (dist <= outer + 1e-9)
        on_grid = (arr[:, 0] % spacing == 0) & (arr[:, 1] % spacing == 0)
        keep |= ring & on_grid
        inner = outer
    return [candidates[k] for k in np.flatnonzero(keep)]


def write_mesh(mesh: Triangulation, path: Union[str, Path]) -> Path:
    """按 "n x y" / "t i j k" 文本格式写出网格"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"n {x} {y}" for x, y in mesh.nodes]
    lines += [f"t {a} {b} {c}" for a, b, c in mesh.triangles]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_mesh(path: Union[str, Path], lattice: Optional[LatticeSpec] = None) -> Triangulation:
    nodes: List[IntPoint] = []
    tris: List[Tuple[int, int, int]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "n":
            nodes.append((int(parts[1]), int(parts[2])))
        elif parts[0] == "t":
            tris.append((int(parts[1]), int(parts[2]), int(parts[3])))
    areas = []
    for a, b, c in tris:
        pa, pb, pc = nodes[a], nodes[b], nodes[c]
        twice = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
        areas.append(Fraction(twice, 2))
    return Triangulation(tuple(nodes), np.array(tris, dtype=np.int64).reshape(-1, 3), tuple(areas), lattice)
