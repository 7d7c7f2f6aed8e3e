"""
精确几何谓词

格点多边形、区域(外多边形减去孔洞)、有理点定位与线段剖分。
所有判定均在整数/有理数上完成，浮点数只用于远离边界的快速预筛选
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import atan2, lcm, pi
from typing import Iterable, Iterator, List, NamedTuple, Sequence, Tuple, Union

import numpy as np

IntPoint = Tuple[int, int]
Number = Union[int, Fraction]
RationalPoint = Tuple[Number, Number]


class PointLocation(str, Enum):
    """点相对多边形的位置"""
    INTERIOR = "interior"
    EDGE = "edge"
    VERTEX = "vertex"
    EXTERIOR = "exterior"


class SegmentPiece(NamedTuple):
    """线段剖分中的一段：参数区间 (t0, t1) 与该段上特征函数的常数值"""
    t0: Fraction
    t1: Fraction
    chi: Fraction

    @property
    def length(self) -> Fraction:
        return self.t1 - self.t0


def cross(ax: int, ay: int, bx: int, by: int) -> int:
    return ax * by - ay * bx


def homogeneous(point: RationalPoint) -> Tuple[int, int, int]:
    """把有理点转换为齐次整数坐标 (X, Y, m)，m > 0"""
    x, y = Fraction(point[0]), Fraction(point[1])
    m = lcm(x.denominator, y.denominator)
    return int(x * m), int(y * m), m


def point_on_segment(p: RationalPoint, d: IntPoint, t: Fraction) -> Tuple[Fraction, Fraction]:
    return (p[0] + t * d[0], p[1] + t * d[1])


@dataclass(frozen=True)
class Polygon:
    """
    顶点为格点的简单多边形

    顶点在构造时统一为逆时针方向
    """
    vertices: Tuple[IntPoint, ...]

    def __post_init__(self) -> None:
        verts = tuple((int(x), int(y)) for x, y in self.vertices)
        if len(verts) < 3:
            raise ValueError(f"多边形至少需要3个顶点，实际为 {len(verts)}")
        twice = _twice_signed_area(verts)
        if twice == 0:
            raise ValueError("多边形面积为零")
        if twice < 0:
            verts = tuple(reversed(verts))
        object.__setattr__(self, "vertices", verts)

    @cached_property
    def area(self) -> Fraction:
        return Fraction(abs(_twice_signed_area(self.vertices)), 2)

    @cached_property
    def edges(self) -> Tuple[Tuple[IntPoint, IntPoint], ...]:
        n = len(self.vertices)
        return tuple((self.vertices[k], self.vertices[(k + 1) % n]) for k in range(n))

    @cached_property
    def bbox(self) -> Tuple[int, int, int, int]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    @cached_property
    def is_convex(self) -> bool:
        n = len(self.vertices)
        for k in range(n):
            a, b, c = self.vertices[k], self.vertices[(k + 1) % n], self.vertices[(k + 2) % n]
            if cross(b[0] - a[0], b[1] - a[1], c[0] - b[0], c[1] - b[1]) < 0:
                return False
        return True

    def translate(self, dx: int, dy: int) -> "Polygon":
        return Polygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def locate(self, point: RationalPoint) -> PointLocation:
        return self.locate_homogeneous(*homogeneous(point))

    def locate_homogeneous(self, X: int, Y: int, m: int) -> PointLocation:
        """定位齐次坐标点 (X/m, Y/m)，纯整数运算"""
        inside = False
        for (ax, ay), (bx, by) in self.edges:
            Ax, Ay, Bx, By = ax * m, ay * m, bx * m, by * m
            if cross(Bx - Ax, By - Ay, X - Ax, Y - Ay) == 0 and \
                    min(Ax, Bx) <= X <= max(Ax, Bx) and min(Ay, By) <= Y <= max(Ay, By):
                if (X, Y) in ((Ax, Ay), (Bx, By)):
                    return PointLocation.VERTEX
                return PointLocation.EDGE
            if (Ay > Y) != (By > Y):
                dy = By - Ay
                lhs = (X - Ax) * dy
                rhs = (Y - Ay) * (Bx - Ax)
                if (lhs < rhs) if dy > 0 else (lhs > rhs):
                    inside = not inside
        return PointLocation.INTERIOR if inside else PointLocation.EXTERIOR

    def chi_homogeneous(self, X: int, Y: int, m: int) -> Fraction:
        """非顶点处的特征函数值：内部1，边上1/2，外部0"""
        loc = self.locate_homogeneous(X, Y, m)
        if loc is PointLocation.INTERIOR:
            return Fraction(1)
        if loc is PointLocation.EXTERIOR:
            return Fraction(0)
        if loc is PointLocation.EDGE:
            return Fraction(1, 2)
        return self.angle_fraction(self.vertices.index((X // m, Y // m)))

    def angle_fraction(self, index: int) -> Fraction:
        """顶点内角 α 对应的 α/(2π)，以有理数近似表示"""
        n = len(self.vertices)
        v = self.vertices[index]
        nxt = self.vertices[(index + 1) % n]
        prv = self.vertices[(index - 1) % n]
        ux, uy = nxt[0] - v[0], nxt[1] - v[1]
        wx, wy = prv[0] - v[0], prv[1] - v[1]
        alpha = atan2(cross(ux, uy, wx, wy), ux * wx + uy * wy)
        if alpha <= 0:
            alpha += 2 * pi
        return Fraction(alpha / (2 * pi)).limit_denominator(10 ** 6)

    def interior_point(self) -> Tuple[Fraction, Fraction]:
        """返回严格位于多边形内部的一个有理点(扇形三角形重心)"""
        v0 = self.vertices[0]
        for k in range(1, len(self.vertices) - 1):
            a, b = self.vertices[k], self.vertices[k + 1]
            c = (Fraction(v0[0] + a[0] + b[0], 3), Fraction(v0[1] + a[1] + b[1], 3))
            if self.locate(c) is PointLocation.INTERIOR:
                return c
        raise ValueError("无法找到多边形内部点")

    def lattice_points(self, closed: bool = True) -> List[IntPoint]:
        """多边形(默认闭包)内的全部格点，按 (x, y) 字典序"""
        x0, y0, x1, y1 = self.bbox
        keep = []
        for x in range(x0, x1 + 1):
            for y in range(y0, y1 + 1):
                loc = self.locate_homogeneous(x, y, 1)
                if loc is PointLocation.INTERIOR or (closed and loc is not PointLocation.EXTERIOR):
                    keep.append((x, y))
        return keep


def _twice_signed_area(verts: Sequence[IntPoint]) -> int:
    n = len(verts)
    return sum(cross(verts[k][0], verts[k][1], verts[(k + 1) % n][0], verts[(k + 1) % n][1])
               for k in range(n))


@dataclass(frozen=True)
class Region:
    """外多边形减去互不相交的内部孔洞；χ_region = χ_outer − Σ χ_hole"""
    outer: Polygon
    holes: Tuple[Polygon, ...] = field(default_factory=tuple)

    @cached_property
    def area(self) -> Fraction:
        return self.outer.area - sum((h.area for h in self.holes), Fraction(0))

    @cached_property
    def polygons(self) -> Tuple[Polygon, ...]:
        return (self.outer,) + tuple(self.holes)

    @cached_property
    def boundary_edges(self) -> Tuple[Tuple[IntPoint, IntPoint], ...]:
        return tuple(e for poly in self.polygons for e in poly.edges)

    @cached_property
    def vertices(self) -> Tuple[IntPoint, ...]:
        return tuple(v for poly in self.polygons for v in poly.vertices)

    @cached_property
    def _edge_array(self) -> np.ndarray:
        return np.array([[a[0], a[1], b[0], b[1]] for a, b in self.boundary_edges], dtype=float)

    def translate(self, dx: int, dy: int) -> "Region":
        return Region(self.outer.translate(dx, dy), tuple(h.translate(dx, dy) for h in self.holes))

    def chi_homogeneous(self, X: int, Y: int, m: int) -> Fraction:
        value = self.outer.chi_homogeneous(X, Y, m)
        for hole in self.holes:
            value -= hole.chi_homogeneous(X, Y, m)
        return value

    def chi(self, point: RationalPoint) -> Fraction:
        return self.chi_homogeneous(*homogeneous(point))

    def locate(self, point: RationalPoint) -> PointLocation:
        """区域意义下的位置：孔洞边界视为区域边界"""
        X, Y, m = homogeneous(point)
        outer = self.outer.locate_homogeneous(X, Y, m)
        if outer is PointLocation.EXTERIOR:
            return outer
        for hole in self.holes:
            loc = hole.locate_homogeneous(X, Y, m)
            if loc is PointLocation.INTERIOR:
                return PointLocation.EXTERIOR
            if loc is not PointLocation.EXTERIOR:
                return loc
        return outer

    def contains_closed(self, point: RationalPoint) -> bool:
        return self.locate(point) is not PointLocation.EXTERIOR

    def lattice_points(self, closed: bool = True) -> List[IntPoint]:
        pts = []
        for p in self.outer.lattice_points(closed=True):
            loc = self.locate(p)
            if loc is PointLocation.INTERIOR or (closed and loc is not PointLocation.EXTERIOR):
                pts.append(p)
        return pts

    def on_boundary(self, point: RationalPoint) -> bool:
        return self.locate(point) in (PointLocation.EDGE, PointLocation.VERTEX)

    def segments_near_boundary(
        self,
        starts: np.ndarray,
        ends: np.ndarray,
        tol: float = 1e-9,
    ) -> np.ndarray:
        """
        浮点预筛选：判断每条线段的闭包是否可能接触区域边界

        Args:
            starts: (M, 2) 起点
            ends: (M, 2) 终点
            tol: 距离容差

        Returns:
            (M,) 布尔数组，True 表示需要精确处理
        """
        starts = np.asarray(starts, dtype=float)
        ends = np.asarray(ends, dtype=float)
        near = np.zeros(len(starts), dtype=bool)
        for ax, ay, bx, by in self._edge_array:
            a = np.array([ax, ay])
            b = np.array([bx, by])
            d_pts = np.minimum.reduce([
                _point_segment_distance(starts, a, b),
                _point_segment_distance(ends, a, b),
                _point_segment_distance(np.broadcast_to(a, starts.shape), starts, ends),
                _point_segment_distance(np.broadcast_to(b, starts.shape), starts, ends),
            ])
            o1 = _orient(starts, ends, a)
            o2 = _orient(starts, ends, b)
            o3 = _orient_pts(a, b, starts)
            o4 = _orient_pts(a, b, ends)
            crossing = (o1 * o2 < 0) & (o3 * o4 < 0)
            near |= (d_pts <= tol) | crossing
        return near


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    ap = points - a
    denom = np.einsum("...i,...i->...", ab, ab)
    denom = np.where(denom == 0.0, 1.0, denom)
    t = np.clip(np.einsum("...i,...i->...", ap, ab) / denom, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(points - proj, axis=-1)


def _orient(p: np.ndarray, q: np.ndarray, c: np.ndarray) -> np.ndarray:
    return (q[:, 0] - p[:, 0]) * (c[1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (c[0] - p[:, 0])


def _orient_pts(a: np.ndarray, b: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])


def segment_breakpoints(
    p: IntPoint,
    d: IntPoint,
    edges: Iterable[Tuple[IntPoint, IntPoint]],
) -> List[Fraction]:
    """
    线段 p + t·d (t ∈ [0,1]) 与一组边的全部交点参数

    共线重叠时加入重叠区间端点。返回值包含 0 和 1，已排序去重
    """
    px, py = p
    dx, dy = d
    qx, qy = px + dx, py + dy
    lo_x, hi_x = min(px, qx), max(px, qx)
    lo_y, hi_y = min(py, qy), max(py, qy)
    dd = dx * dx + dy * dy
    ts = {Fraction(0), Fraction(1)}
    for (ax, ay), (bx, by) in edges:
        if max(ax, bx) < lo_x or min(ax, bx) > hi_x or max(ay, by) < lo_y or min(ay, by) > hi_y:
            continue
        ex, ey = bx - ax, by - ay
        wx, wy = ax - px, ay - py
        den = cross(dx, dy, ex, ey)
        if den != 0:
            nt = cross(wx, wy, ex, ey)
            ns = cross(wx, wy, dx, dy)
            if den < 0:
                den, nt, ns = -den, -nt, -ns
            if 0 <= nt <= den and 0 <= ns <= den:
                ts.add(Fraction(nt, den))
        elif cross(wx, wy, dx, dy) == 0:
            for vx, vy in ((ax, ay), (bx, by)):
                num = (vx - px) * dx + (vy - py) * dy
                if 0 <= num <= dd:
                    ts.add(Fraction(num, dd))
    return sorted(ts)


def chi_profile(p: IntPoint, d: IntPoint, region: Union[Region, Polygon]) -> List[SegmentPiece]:
    """
    线段 p + t·d 上区域特征函数的分段常数剖面(极大段)

    Args:
        p: 起点(格点)
        d: 方向(整数向量)
        region: 多边形或区域

    Returns:
        按 t 递增的极大段列表，相邻段取值不同
    """
    if isinstance(region, Polygon):
        region = Region(region)
    ts = segment_breakpoints(p, d, region.boundary_edges)
    pieces: List[SegmentPiece] = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        tm = (t0 + t1) / 2
        m = tm.denominator
        X = p[0] * m + d[0] * tm.numerator
        Y = p[1] * m + d[1] * tm.numerator
        chi = region.chi_homogeneous(X, Y, m)
        if pieces and pieces[-1].chi == chi:
            pieces[-1] = SegmentPiece(pieces[-1].t0, t1, chi)
        else:
            pieces.append(SegmentPiece(t0, t1, chi))
    return pieces


def closed_segment_touch_points(
    p: IntPoint,
    d: IntPoint,
    region: Region,
) -> Tuple[List[Fraction], List[Tuple[Fraction, Fraction]]]:
    """
    闭线段与区域边界的接触：孤立接触点参数和落在边界上的参数区间

    Returns:
        (points, intervals)
    """
    ts = segment_breakpoints(p, d, region.boundary_edges)
    intervals: List[Tuple[Fraction, Fraction]] = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if region.on_boundary(point_on_segment(p, d, (t0 + t1) / 2)):
            if intervals and intervals[-1][1] == t0:
                intervals[-1] = (intervals[-1][0], t1)
            else:
                intervals.append((t0, t1))
    points = [
        t for t in ts
        if region.on_boundary(point_on_segment(p, d, t))
        and not any(a <= t <= b for a, b in intervals)
    ]
    return points, intervals


def iter_unit_triangles(x0: int, y0: int, x1: int, y1: int) -> Iterator[Tuple[IntPoint, IntPoint, IntPoint]]:
    """枚举包围盒内全部单位格点三角形 {i, i+e1, i+e1+e2} 与 {i, i+e1+e2, i+e2}"""
    for x in range(x0, x1):
        for y in range(y0, y1):
            yield (x, y), (x + 1, y), (x + 1, y + 1)
            yield (x, y), (x + 1, y + 1), (x, y + 1)
