"""
格点、邻居集合与区域分解测试
"""
import pytest
from pydantic import ValidationError

from ac_coupling_project.errors import DomainValidationError, NoInteractionError
from ac_coupling_project.experiments.hexagon_problem import (
    hex_distance,
    hexagon_atom_count,
    hexagon_decomposition,
    hexagon_polygon,
    nonaligned_hexagon,
)
from ac_coupling_project.geometry.exact_geometry import Region
from ac_coupling_project.lattice.lattice_domain import (
    Bond,
    BondTag,
    CrossingSubtype,
    DomainDecomposition,
    LatticeSpec,
    NeighborSet,
    bond_in_continuum,
    build_neighbor_set,
    classify_bond,
    classify_bonds,
    enumerate_bonds,
    vacancy_bonds,
)


class TestNeighborSet:
    @pytest.mark.parametrize(
        "cutoff, expected",
        [(1.1, 3), (1.8, 6), (2.1, 9), (3.1, 18)],
    )
    def test_hexagonal_representatives(self, cutoff, expected):
        """六边形格点上截断半径内的方向代表个数"""
        nbrs = build_neighbor_set(LatticeSpec.hexagonal(cutoff))
        assert len(nbrs) == expected
        assert len(nbrs.full()) == 2 * expected

    def test_nearest_directions(self):
        nbrs = build_neighbor_set(LatticeSpec.hexagonal(3.1))
        assert set(nbrs.nearest_directions()) == {(0, 1), (1, 0), (1, 1)}
        assert nbrs.max_index_extent == 3
        assert nbrs.max_length == pytest.approx(3.0)

    def test_representatives_are_canonical(self):
        """每个 ±r 对只出现一次，且代表满足 r_x > 0 或 (r_x = 0, r_y > 0)"""
        nbrs = build_neighbor_set(LatticeSpec.hexagonal(3.1))
        for rx, ry in nbrs:
            assert rx > 0 or (rx == 0 and ry > 0)
        full = nbrs.full()
        assert len(set(full)) == len(full)

    def test_square_lattice(self):
        nbrs = build_neighbor_set(LatticeSpec.square(1.5))
        assert set(nbrs) == {(0, 1), (1, -1), (1, 0), (1, 1)}
        assert set(nbrs.nearest_directions()) == {(0, 1), (1, 0)}

    def test_no_interaction(self):
        with pytest.raises(NoInteractionError, match="no interaction"):
            build_neighbor_set(LatticeSpec.square(0.5))

    def test_one_dimensional(self):
        nbrs = build_neighbor_set(LatticeSpec.square(2.1, dimension=1))
        assert nbrs.directions == ((1, 0), (2, 0))

    def test_rejects_opposite_pair(self):
        lattice = LatticeSpec.square(2.0)
        with pytest.raises(ValueError):
            NeighborSet.explicit(lattice, [(1, 0), (-1, 0)])

    def test_rejects_direction_beyond_cutoff(self):
        lattice = LatticeSpec.square(1.2)
        with pytest.raises(ValueError):
            NeighborSet(lattice, ((1, 0), (2, 0)))

    def test_negative_determinant(self):
        with pytest.raises(ValidationError):
            LatticeSpec(lattice_matrix=((0.0, 1.0), (1.0, 0.0)), cutoff=1.0)


class TestBondEnumeration:
    def test_small_hexagon_nearest_bonds(self):
        """每边 3 个原子的六边形：19 个原子，42 条最近邻键"""
        sites = hexagon_polygon(2).lattice_points()
        assert len(sites) == 19
        bonds = enumerate_bonds(sites, build_neighbor_set(LatticeSpec.hexagonal(1.1)))
        assert len(bonds) == 42

    def test_chain_bonds(self):
        """链 {0..4}，ℛ = {1, 2}：4 + 3 条键"""
        nbrs = build_neighbor_set(LatticeSpec.square(2.1, dimension=1))
        bonds = enumerate_bonds([(i, 0) for i in range(5)], nbrs)
        assert len(bonds) == 7
        assert Bond((3, 0), (2, 0)) not in bonds

    def test_each_geometric_bond_once(self):
        sites = hexagon_polygon(3).lattice_points()
        bonds = enumerate_bonds(sites, build_neighbor_set(LatticeSpec.hexagonal(3.1)))
        segments = {frozenset((b.base, b.end)) for b in bonds}
        assert len(segments) == len(bonds)

    @pytest.mark.parametrize("n", [3, 10, 33])
    def test_hexagon_atom_count(self, n):
        assert len(hexagon_polygon(n - 1).lattice_points()) == hexagon_atom_count(n)

    def test_full_scale_atom_count(self):
        """n = 129 去掉 8 个缺陷原子后为 49529"""
        assert hexagon_atom_count(129, 8) == 49529
        assert len(hexagon_polygon(128).lattice_points()) - 8 == 49529


class TestDecomposition:
    def test_index_sets(self, aligned_problem):
        decomp = aligned_problem.decomp
        assert len(decomp.sites) == 271
        assert len(decomp.interface_sites) == 18
        assert len(decomp.continuum_sites) == 127 - 19
        assert len(decomp.atomistic_sites) == 19 + 144
        assert len(decomp.dirichlet_sites) == 144
        assert all(hex_distance(p) >= 7 for p in decomp.dirichlet_sites)

    def test_free_index_map_is_dense(self, aligned_problem):
        index = aligned_problem.decomp.free_index_map
        assert sorted(index.values()) == list(range(len(index)))
        assert len(index) == 127

    def test_vacancies_removed(self, defect_problem, small_config):
        decomp = defect_problem.decomp
        assert len(decomp.sites) == 271 - len(small_config.defect)
        assert not set(map(tuple, small_config.defect)) & decomp.site_set

    def test_atomistic_convex(self, aligned_problem, nonaligned_problem):
        assert aligned_problem.decomp.atomistic_convex
        assert nonaligned_problem.decomp.atomistic_convex

    def test_three_layer_collar_passes_one_layer_fails(self):
        lattice = LatticeSpec.hexagonal(3.1)
        nbrs = build_neighbor_set(lattice)
        # 约束层只有 1 层时自由原子缺少第 2、3 近邻
        with pytest.raises(DomainValidationError):
            DomainDecomposition(
                lattice=lattice,
                neighbors=nbrs,
                domain=hexagon_polygon(9),
                continuum=Region(hexagon_polygon(8), (hexagon_polygon(3),)),
                free_polygon=hexagon_polygon(9),
            )
        decomp = hexagon_decomposition(10, 4, lattice)
        assert len(decomp.sites) == 271

    def test_hole_must_fit_inside_collar(self):
        with pytest.raises(DomainValidationError):
            hexagon_decomposition(10, 8, LatticeSpec.hexagonal(3.1))

    def test_defect_must_lie_in_atomistic_region(self):
        with pytest.raises(DomainValidationError):
            hexagon_decomposition(10, 4, LatticeSpec.hexagonal(3.1), defect=[(5, 0)])

    def test_vacancy_bonds_reaching_continuum(self, defect_problem, aligned_problem):
        """空位 (2, 1) 距 Γ 一层：方向 (3, 0) 的线段进入 Ω_c"""
        decomp = defect_problem.decomp
        bonds = vacancy_bonds(decomp)
        assert Bond((2, 1), (3, 0)) in bonds
        assert bonds == sorted(set(bonds))
        for b in bonds:
            assert b.base in decomp.vacancies or b.end in decomp.vacancies
            assert b.direction in decomp.neighbors.directions
            assert classify_bond(b, decomp).tag is BondTag.CROSSING
        assert vacancy_bonds(aligned_problem.decomp) == []

    def test_vacancy_far_from_interface(self):
        decomp = hexagon_decomposition(10, 5, LatticeSpec.hexagonal(3.1), defect=[(0, 0)])
        assert vacancy_bonds(decomp) == []

    def test_json_round_trip(self, defect_problem):
        decomp = defect_problem.decomp
        loaded = DomainDecomposition.from_json(decomp.to_json())
        assert loaded.sites == decomp.sites
        assert loaded.atomistic_sites == decomp.atomistic_sites
        assert loaded.interface_sites == decomp.interface_sites
        assert loaded.dirichlet_sites == decomp.dirichlet_sites
        assert loaded.vacancies == decomp.vacancies
        assert loaded.neighbors.directions == decomp.neighbors.directions


class TestClassification:
    @pytest.mark.parametrize(
        "bond, tag, subtype",
        [
            (Bond((4, 0), (1, 0)), BondTag.INTERIOR_CONTINUUM, None),
            (Bond((0, 0), (1, 0)), BondTag.INTERIOR_ATOMISTIC, None),
            (Bond((2, 0), (2, 0)), BondTag.CROSSING, CrossingSubtype.ONE_POINT),
            (Bond((2, 0), (1, 0)), BondTag.CROSSING, CrossingSubtype.ONE_POINT),
            (Bond((2, 3), (1, -1)), BondTag.CROSSING, CrossingSubtype.TWO_POINTS),
            (Bond((3, 0), (0, 1)), BondTag.CROSSING, CrossingSubtype.INTERVAL_ON_GAMMA),
        ],
    )
    def test_examples(self, aligned_problem, bond, tag, subtype):
        cls = classify_bond(bond, aligned_problem.decomp)
        assert cls.tag is tag
        assert cls.crossing_subtype is subtype

    def test_batch_matches_exact(self, aligned_problem, nonaligned_problem):
        """浮点预筛选的批量分类与逐条精确分类一致"""
        for problem in (aligned_problem, nonaligned_problem):
            decomp = problem.decomp
            bonds = enumerate_bonds(decomp, decomp.neighbors)
            fast = classify_bonds(bonds, decomp)
            exact = [classify_bond(b, decomp) for b in bonds]
            assert [c.tag for c in fast] == [c.tag for c in exact]

    def test_interior_continuum_agrees(self, aligned_problem):
        decomp = aligned_problem.decomp
        for b in enumerate_bonds(decomp, decomp.neighbors)[:400]:
            inside = classify_bond(b, decomp).tag is BondTag.INTERIOR_CONTINUUM
            assert inside == bond_in_continuum(b, decomp)

    def test_concave_hole_has_no_subtype(self):
        """L 形原子区域不是凸集，跨界面键不给出子类型"""
        l_shape = [(-2, -2), (2, -2), (2, 0), (0, 0), (0, 2), (-2, 2)]
        decomp = hexagon_decomposition(10, 4, LatticeSpec.hexagonal(3.1), interface_polygon=l_shape)
        assert not decomp.atomistic_convex
        cls = classify_bond(Bond((1, -1), (1, 1)), decomp)
        assert cls.tag is BondTag.CROSSING
        assert cls.crossing_subtype is None

    def test_nonaligned_polygon_is_convex(self):
        poly = nonaligned_hexagon(3)
        assert poly.is_convex
        assert set(poly.vertices) == {(3, 1), (2, 3), (-1, 2), (-3, -1), (-2, -3), (1, -2)}
