"""
精确几何与键几何测试：特征函数、键平均、键剖分、键密度恒等式与有效面积
"""
from fractions import Fraction

import numpy as np
import pytest

from ac_coupling_project.geometry.bond_geometry import (
    bond_average_chi,
    chi_at_point,
    continuum_overlap,
    effective_areas,
    partition_bond,
    verify_bond_density,
)
from ac_coupling_project.experiments.hexagon_problem import hex_distance
from ac_coupling_project.geometry.exact_geometry import PointLocation, Polygon, Region, chi_profile
from ac_coupling_project.lattice.lattice_domain import Bond, BondTag

UNIT_TRIANGLE = ((0, 0), (1, 0), (0, 1))
SQUARE = Polygon(((0, 0), (2, 0), (2, 2), (0, 2)))


class TestCharacteristicFunction:
    @pytest.mark.parametrize(
        "point, value, location",
        [
            ((1, 1), Fraction(1), PointLocation.INTERIOR),
            ((1, 0), Fraction(1, 2), PointLocation.EDGE),
            ((Fraction(1, 2), 2), Fraction(1, 2), PointLocation.EDGE),
            ((0, 0), Fraction(1, 4), PointLocation.VERTEX),
            ((3, 1), Fraction(0), PointLocation.EXTERIOR),
        ],
    )
    def test_square(self, point, value, location):
        chi = chi_at_point(SQUARE, point)
        assert chi.value == value
        assert chi.location is location

    def test_vertex_reports_angle_fraction(self):
        chi = chi_at_point(Polygon(UNIT_TRIANGLE), (1, 0))
        assert chi.location is PointLocation.VERTEX
        assert chi.angle_fraction == pytest.approx(1 / 8, abs=1e-6)

    def test_region_with_hole(self):
        region = Region(Polygon(((0, 0), (6, 0), (6, 6), (0, 6))), (Polygon(((2, 2), (4, 2), (4, 4), (2, 4))),))
        assert region.chi((1, 1)) == 1
        assert region.chi((3, 3)) == 0
        assert region.chi((3, 2)) == Fraction(1, 2)
        assert region.area == 32

    def test_orientation_normalized(self):
        cw = Polygon(((0, 0), (0, 1), (1, 0)))
        assert cw.area == Fraction(1, 2)
        assert cw.vertices == ((1, 0), (0, 1), (0, 0))


class TestBondAverage:
    def test_edge_overlap_is_half(self):
        """沿单位三角形一条边的键：β = 1/2"""
        assert bond_average_chi(((0, 0), (1, 0)), UNIT_TRIANGLE) == Fraction(1, 2)

    def test_isolated_vertex_contact_counts_zero(self):
        assert bond_average_chi(((1, 0), (1, 0)), UNIT_TRIANGLE) == 0

    def test_bond_through_interior(self):
        """穿过三角形内部的键在三角形内的部分权重为 1"""
        tri = ((0, 0), (2, 0), (0, 2))
        # (0, 1) → (2, 1)，与三角形相交于 t ∈ [0, 1/2]
        assert bond_average_chi(((0, 1), (2, 0)), tri) == Fraction(1, 2)

    def test_accepts_bond_objects(self):
        b = Bond((0, 0), (1, 1))
        assert bond_average_chi(b, UNIT_TRIANGLE) == bond_average_chi(((0, 0), (1, 1)), UNIT_TRIANGLE)

    def test_translation_invariance(self, rng):
        for _ in range(20):
            shift = tuple(int(v) for v in rng.integers(-7, 8, size=2))
            base = tuple(int(v) for v in rng.integers(-2, 3, size=2))
            r = (int(rng.integers(1, 3)), int(rng.integers(-2, 3)))
            tri = ((0, 0), (2, 1), (1, 3))
            moved = tuple((x + shift[0], y + shift[1]) for x, y in tri)
            moved_base = (base[0] + shift[0], base[1] + shift[1])
            assert bond_average_chi((base, r), tri) == bond_average_chi((moved_base, r), moved)


class TestBondPartition:
    def test_partition_weights(self):
        """穿入 Ω_c 的键：原子段权重 1，连续介质段 0"""
        omega_c = Region(Polygon(((2, -2), (6, -2), (6, 0), (4, 0), (4, 2), (2, 2))))
        part = partition_bond(((0, 0), (4, 0)), omega_c)
        assert part.breakpoints == (0, Fraction(1, 2), 1)
        assert part.weights == (1, 0)
        assert part.total_weight == Fraction(1, 2)

    def test_segment_on_boundary(self):
        omega_c = Region(Polygon(((1, 0), (3, 0), (3, 2), (1, 2))))
        # (0,0) → (4,0)：[1/4, 3/4] 位于 Ω_c 的下边上
        part = partition_bond(((0, 0), (4, 0)), omega_c)
        assert part.breakpoints == (0, Fraction(1, 4), Fraction(3, 4), 1)
        assert part.weights == (1, Fraction(1, 2), 1)

    def test_weight_plus_overlap_is_one(self, aligned_problem):
        """每条键上 W + ⨍_b χ_Ωc = 1"""
        geometry = aligned_problem.geometry
        omega_c = geometry.decomp.continuum
        for k in geometry.crossing:
            b = geometry.bonds[k]
            assert geometry.partitions[k].total_weight + continuum_overlap(b, omega_c) == 1

    def test_profile_is_maximal(self):
        pieces = chi_profile((0, 0), (6, 0), SQUARE.translate(2, -1))
        assert [p.chi for p in pieces] == [0, 1, 0]
        assert pieces[0].t1 == Fraction(1, 3)


class TestBondDensity:
    def test_unit_triangle(self):
        lhs, area = verify_bond_density(UNIT_TRIANGLE, (1, 0))
        assert lhs == area == Fraction(1, 2)

    def test_random_triangles(self, rng):
        """≥100 个随机格点三角形与方向上的精确相等"""
        checked = 0
        while checked < 100:
            verts = rng.integers(-5, 6, size=(3, 2))
            (ax, ay), (bx, by), (cx, cy) = verts.tolist()
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) == 0:
                continue
            r = tuple(rng.integers(-4, 5, size=2).tolist())
            if r == (0, 0):
                continue
            lhs, area = verify_bond_density(((ax, ay), (bx, by), (cx, cy)), r)
            assert lhs == area
            checked += 1

    def test_zero_direction(self):
        with pytest.raises(ValueError):
            verify_bond_density(UNIT_TRIANGLE, (0, 0))


class TestEffectiveAreas:
    @pytest.fixture(scope="class", params=["aligned", "nonaligned"])
    def geometry(self, request, aligned_problem, nonaligned_problem):
        problem = aligned_problem if request.param == "aligned" else nonaligned_problem
        return problem.geometry

    def test_non_negative_and_bounded(self, geometry):
        table = geometry.effective_area_table
        areas = np.array([[float(a) for a in row] for row in table.areas])
        assert np.all(areas >= 0)
        assert np.all(areas <= geometry.mesh.area_array[:, None] + 1e-15)

    def test_column_identity(self, geometry):
        """Σ_T Ω_{T,r} + Σ_{b∉Ωc} ⨍_b χ_Ωc = |Ω_c|，对每个方向 r"""
        table = geometry.effective_area_table
        omega_c = geometry.decomp.continuum
        for r in geometry.directions:
            crossing = sum(
                (continuum_overlap(geometry.bonds[k], omega_c)
                 for k in geometry.crossing if geometry.bonds[k].direction == r),
                Fraction(0),
            )
            assert table.column_sum(r) + crossing == omega_c.area

    def test_interior_triangles_untouched(self, geometry):
        """两个顶点环之间的三角形不与任何跨界面的最近邻键重叠，有效面积等于 |T|"""
        mesh = geometry.mesh
        table = geometry.effective_area_table
        checked = 0
        for t in range(mesh.n_triangles):
            sites = mesh.triangle_sites(t)
            if all(4 <= hex_distance(p) <= 5 for p in sites):
                for r in geometry.decomp.neighbors.nearest_directions():
                    assert table.area(t, r) == mesh.areas[t]
                checked += 1
        assert checked > 0

    def test_recomputation_matches(self, geometry):
        classes = list(geometry.classes)
        fresh = effective_areas(geometry.mesh, geometry.bonds, geometry.decomp, classes)
        assert fresh.areas == geometry.effective_area_table.areas
        assert sum(1 for c in classes if c.tag is BondTag.CROSSING) == len(geometry.crossing)
