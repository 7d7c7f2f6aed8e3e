"""
连续介质网格测试
"""
from fractions import Fraction

import numpy as np
import pytest

from ac_coupling_project.errors import DofLayoutError, MeshError
from ac_coupling_project.experiments.hexagon_problem import hex_distance, hexagon_decomposition
from ac_coupling_project.fem.mesh import (
    MeshGrading,
    PiecewiseAffineField,
    boundary_distances,
    build_mesh,
    directional_derivative,
    lattice_jacobian,
    read_mesh,
    write_mesh,
)
from ac_coupling_project.lattice.lattice_domain import LatticeSpec

F_SHEAR = np.array([[1.03, 0.02], [-0.01, 0.98]])


def test_full_mesh_is_unit_triangles(aligned_problem):
    mesh = aligned_problem.mesh
    region = aligned_problem.decomp.continuum
    assert all(a == Fraction(1, 2) for a in mesh.areas)
    assert mesh.total_area == region.area
    assert mesh.n_triangles == 2 * region.area
    assert all(3 <= hex_distance(p) <= 6 for p in mesh.nodes)


def test_full_mesh_edges_are_nearest_bonds(aligned_problem):
    mesh = aligned_problem.mesh
    nodes = mesh.node_array
    steps = {tuple(int(v) for v in nodes[j] - nodes[i]) for i, j in mesh.edges}
    assert steps <= {(1, 0), (0, 1), (1, 1), (-1, 0), (0, -1), (-1, -1)}


def test_nonaligned_mesh_covers_region(nonaligned_problem):
    mesh = nonaligned_problem.mesh
    assert mesh.total_area == nonaligned_problem.decomp.continuum.area
    assert all(isinstance(x, int) and isinstance(y, int) for x, y in mesh.nodes)
    assert all(a > 0 for a in mesh.areas)


class TestGradedMesh:
    @pytest.fixture(scope="class")
    def decomp(self):
        return hexagon_decomposition(20, 6, LatticeSpec.hexagonal(3.1))

    def test_coarser_with_same_area(self, decomp):
        full = build_mesh(decomp)
        graded = build_mesh(decomp, MeshGrading(kind="graded"))
        assert graded.n_triangles < full.n_triangles
        assert graded.total_area == full.total_area == decomp.continuum.area

    def test_band_is_fully_resolved(self, decomp):
        """细化带内的格点全部是网格节点"""
        grading = MeshGrading(kind="graded", band_width=4)
        graded = build_mesh(decomp, grading)
        candidates = decomp.continuum.lattice_points(closed=True)
        dist = boundary_distances(np.array(candidates), decomp.continuum, decomp.lattice)
        nodes = set(graded.nodes)
        assert all(p in nodes for p, d in zip(candidates, dist) if d <= grading.band_width)

    def test_band_narrower_than_cutoff(self, decomp):
        with pytest.raises(MeshError):
            build_mesh(decomp, MeshGrading(kind="graded", band_width=3))


class TestPiecewiseAffineField:
    def test_uniform_field_directional_derivative(self, aligned_problem):
        """y = F A ξ 时每个三角形上 ∇_r y = F A r"""
        mesh = aligned_problem.mesh
        FA = F_SHEAR @ mesh.lattice.matrix
        field = PiecewiseAffineField.from_function(mesh, lambda p: FA @ p)
        for r in aligned_problem.decomp.neighbors:
            expected = FA @ np.asarray(r, dtype=float)
            for t in range(0, mesh.n_triangles, 7):
                np.testing.assert_allclose(directional_derivative(field, t, r), expected, atol=1e-13)
        np.testing.assert_allclose(field.element_jacobian(0), FA, atol=1e-13)

    def test_evaluate_is_exact_for_affine(self, aligned_problem):
        mesh = aligned_problem.mesh
        FA = F_SHEAR @ mesh.lattice.matrix
        field = PiecewiseAffineField.from_function(mesh, lambda p: FA @ p + 0.5)
        point = (Fraction(14, 3), Fraction(1, 3))
        expected = FA @ np.array([14 / 3, 1 / 3]) + 0.5
        np.testing.assert_allclose(field.evaluate(point), expected, atol=1e-13)

    def test_triangle_out_of_range(self, aligned_problem):
        mesh = aligned_problem.mesh
        field = PiecewiseAffineField(mesh, np.zeros((len(mesh.nodes), 2)))
        with pytest.raises(MeshError):
            directional_derivative(field, mesh.n_triangles, (1, 0))

    def test_value_count_mismatch(self, aligned_problem):
        with pytest.raises(DofLayoutError):
            PiecewiseAffineField(aligned_problem.mesh, np.zeros((3, 2)))


class TestInterpolation:
    def test_node(self, aligned_problem):
        mesh = aligned_problem.mesh
        k = mesh.node_index[(4, 0)]
        assert mesh.interpolation_weights((4, 0)) == {k: 1}

    def test_edge_midpoint(self, aligned_problem):
        mesh = aligned_problem.mesh
        weights = mesh.interpolation_weights((Fraction(9, 2), 0))
        assert weights == {mesh.node_index[(4, 0)]: Fraction(1, 2), mesh.node_index[(5, 0)]: Fraction(1, 2)}

    def test_centroid(self, aligned_problem):
        mesh = aligned_problem.mesh
        weights = mesh.interpolation_weights((Fraction(14, 3), Fraction(1, 3)))
        assert set(weights) == {mesh.node_index[p] for p in ((4, 0), (5, 0), (5, 1))}
        assert all(w == Fraction(1, 3) for w in weights.values())

    def test_point_outside(self, aligned_problem):
        """原子区域中心不在网格中"""
        with pytest.raises(DofLayoutError):
            aligned_problem.mesh.locate((0, 0))


def test_lattice_jacobian():
    lattice = LatticeSpec.hexagonal(3.1)
    sites = ((0, 0), (1, 0), (1, 1))
    G = np.array([[0.9, 0.1], [0.05, 1.1]])
    values = lattice.physical(sites) @ G.T + np.array([2.0, -1.0])
    np.testing.assert_allclose(lattice_jacobian(values, sites, lattice), G, atol=1e-14)


def test_write_and_read_mesh(tmp_path, nonaligned_problem):
    mesh = nonaligned_problem.mesh
    path = write_mesh(mesh, tmp_path / "mesh" / "continuum.txt")
    loaded = read_mesh(path, mesh.lattice)
    assert loaded.nodes == mesh.nodes
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)
    assert loaded.areas == mesh.areas
