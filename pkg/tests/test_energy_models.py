"""
耦合能量模型测试：鬼力检验、ECC 装配形式一致性、梯度、逐键变分恒等式与条带交叉验证
"""
import numpy as np
import pytest

from ac_coupling_project.energy.energy_models import (
    ModelVariant,
    atomistic_contribution,
    bond_terms,
    build_energy_model,
    continuum_contribution,
    continuum_energy,
    exact_contribution,
    ghost_force_residual,
    iter_models,
)
from ac_coupling_project.errors import DofLayoutError
from ac_coupling_project.experiments.experiment_runner import random_deformations
from ac_coupling_project.experiments.hexagon_problem import strip_decomposition, strip_state
from ac_coupling_project.lattice.lattice_domain import Bond
from ac_coupling_project.oned.chain_1d import Chain1D, build_chain_model, sample_monotone
from ac_coupling_project.potentials.pair_potentials import eval_pair_vec
from ac_coupling_project.solver.minimizer import fd_gradient_check

F_STRETCH = np.array([[1.02, 0.0], [0.0, 0.99]])


@pytest.fixture(scope="module", params=["aligned", "nonaligned"])
def problem(request, aligned_problem, nonaligned_problem):
    return aligned_problem if request.param == "aligned" else nonaligned_problem


class TestPatchTest:
    @pytest.mark.parametrize("method", ["ecc", "acc"])
    def test_consistent_methods_have_no_ghost_force(self, problem, method, lj, morse, perfect_config):
        """ECC/ACC 在均匀变形下自由原子上的力 ≤ 1e-10"""
        rng = np.random.default_rng(perfect_config.seed)
        deformations = [perfect_config.F] + random_deformations(5, rng)
        model = build_energy_model(method, problem.geometry, lj)
        for potential in (lj, morse):
            for F in deformations:
                assert ghost_force_residual(model.with_potential(potential), F) <= 1e-10

    def test_qce_has_ghost_force(self, problem, lj):
        model = build_energy_model("qce", problem.geometry, lj)
        assert ghost_force_residual(model, F_STRETCH) > 1e-4
        assert 0 < ghost_force_residual(model, F_STRETCH, relative=True) < 10

    @pytest.mark.parametrize("method", ["ecc", "acc"])
    def test_forces_match_atomistic_next_to_vacancies(self, defect_problem, method, lj):
        """空位靠近界面时，y = F x 处的力与原子模型逐点相同(空洞表面的力不是鬼力)"""
        geometry = defect_problem.geometry
        assert geometry.vacancy_bonds
        atomistic = build_energy_model("atomistic", geometry, lj)
        model = build_energy_model(method, geometry, lj)
        _, g_atom = atomistic.full_gradient(atomistic.uniform_state(F_STRETCH))
        _, g_model = model.full_gradient(model.uniform_state(F_STRETCH))
        free = [p for p in geometry.decomp.free_index_map if p in model.layout.index]
        assert len(free) == len(geometry.decomp.free_index_map)
        for p in free:
            np.testing.assert_allclose(
                g_model[model.layout.index[p]], g_atom[atomistic.layout.index[p]], atol=1e-10,
            )

    def test_uniform_energy_excludes_vacancy_bonds(self, defect_problem, lj):
        energies = []
        for form in ("effective-area", "definition"):
            model = build_energy_model("ecc", defect_problem.geometry, lj, form)
            energies.append(model.full_gradient(model.uniform_state(defect_problem.F))[0])
        assert energies[0] == pytest.approx(energies[1], rel=1e-12)

    def test_atomistic_reference(self, aligned_problem, lj):
        model = build_energy_model("atomistic", aligned_problem.geometry, lj)
        assert ghost_force_residual(model, F_STRETCH) <= 1e-12


class TestEccForms:
    @pytest.mark.parametrize("name", ["aligned_problem", "nonaligned_problem", "defect_problem"])
    def test_three_forms_agree(self, name, request, lj, perturb):
        """有效面积、键拆分与定义三种装配形式给出相同的能量与梯度(含界面附近的空位)"""
        geometry = request.getfixturevalue(name).geometry
        models = {form: build_energy_model("ecc", geometry, lj, form)
                  for form in ("effective-area", "bond-split", "definition")}
        state = perturb(models["effective-area"].uniform_state(F_STRETCH))
        reference, grad_ref = models["effective-area"].energy(state)
        for form in ("bond-split", "definition"):
            energy, grad = models[form].energy(state)
            assert energy == pytest.approx(reference, rel=1e-10)
            np.testing.assert_allclose(grad, grad_ref, rtol=1e-10, atol=1e-10)

    def test_unknown_form(self, aligned_problem, lj):
        with pytest.raises(ValueError):
            build_energy_model("ecc", aligned_problem.geometry, lj, "triangle-sum")


def test_bond_continuum_contributions_sum_to_continuum_energy(aligned_problem, lj, perturb):
    """Σ_b c_b(y) = E_c(y)"""
    model = build_energy_model("ecc", aligned_problem.geometry, lj)
    state = perturb(model.uniform_state(F_STRETCH), amplitude=0.02)
    total = sum(continuum_contribution(b, state, model) for b in model.geometry.bonds)
    assert total == pytest.approx(continuum_energy(model, state), rel=1e-12)


@pytest.mark.parametrize("variant", [v.value for v in ModelVariant])
def test_gradient_matches_finite_differences(variant, defect_problem, lj, perturb, rng):
    model = build_energy_model(variant, defect_problem.geometry, lj)
    state = perturb(model.uniform_state(defect_problem.F))
    n = len(state.free_vector())
    components = rng.choice(n, size=min(n, 40), replace=False)
    assert fd_gradient_check(model, state, step=1e-5, components=components) <= 1e-6


class TestBondContributions:
    def test_exact_contribution(self, aligned_problem, lj, perturb):
        model = build_energy_model("atomistic", aligned_problem.geometry, lj)
        value, _ = exact_contribution(Bond((0, 0), (1, 0)), model.uniform_state(), lj)
        assert value == pytest.approx(-1.0, abs=1e-14)
        state = perturb(model.uniform_state(F_STRETCH))
        b = Bond((1, 1), (1, 2))
        value, (g_base, g_end) = exact_contribution(b, state, lj)
        expected, grad = eval_pair_vec(lj, state.value_at(b.end) - state.value_at(b.base))
        assert value == expected
        np.testing.assert_array_equal(g_end, grad)
        np.testing.assert_array_equal(g_base, -grad)

    def test_variation_identity_on_crossing_bonds(self, problem, lj):
        """均匀变形处每条跨界面键满足 δa_b + δc_b = δe_b"""
        model = build_energy_model("acc", problem.geometry, lj)
        state = model.uniform_state(F_STRETCH)
        for k in problem.geometry.crossing[::5]:
            b = problem.geometry.bonds[k]
            parts = [bond_terms(model, b, kind).evaluate(state.positions, lj)[1]
                     for kind in ("atomistic", "continuum", "exact")]
            np.testing.assert_allclose(parts[0] + parts[1], parts[2], atol=1e-12)

    def test_atomistic_contribution_at_uniform_deformation(self, problem, lj):
        """y = F x 时 a_b = W φ(|F A r|)，且 a_b + c_b = e_b"""
        geometry = problem.geometry
        model = build_energy_model("acc", geometry, lj)
        state = model.uniform_state(F_STRETCH)
        for k in geometry.crossing[::7]:
            b = geometry.bonds[k]
            value, grad = atomistic_contribution(b, state, model)
            exact, _ = exact_contribution(b, state, lj)
            weight = float(geometry.partitions[k].total_weight)
            assert value == pytest.approx(weight * exact, abs=1e-13)
            assert value + continuum_contribution(b, state, model) == pytest.approx(exact, abs=1e-12)
            assert grad.shape == state.positions.shape

    def test_unknown_kind(self, aligned_problem, lj):
        model = build_energy_model("acc", aligned_problem.geometry, lj)
        with pytest.raises(ValueError):
            bond_terms(model, model.geometry.bonds[0], "ghost")


class TestStripOracle:
    """条带上每个内部行复制一维链时：E_2d − E_2d(x) = (H − 1)(E_1d − E_1d(x))"""
    N, R, H = 6, 2, 3

    @pytest.mark.parametrize("variant", ["ecc", "acc"])
    def test_matches_chain(self, variant, lj, rng):
        chain = Chain1D(N=self.N, R=self.R)
        chain_model = build_chain_model(variant, chain, lj)
        strip_model = build_energy_model(variant, strip_decomposition(self.N, self.R, self.H), lj)
        sites = chain_model.layout.sites
        reference = chain_model.uniform(1.0)
        e1_ref, _ = chain_model.full_gradient(reference)
        e2_ref, _ = strip_model.full_gradient(strip_state(strip_model.layout, sites, reference, self.H))
        for _ in range(3):
            values = sample_monotone(chain_model, 1.0, 0.05, rng)
            e1, _ = chain_model.full_gradient(values)
            e2, _ = strip_model.full_gradient(strip_state(strip_model.layout, sites, values, self.H))
            assert e2 - e2_ref == pytest.approx((self.H - 1) * (e1 - e1_ref), abs=1e-10)


def test_state_from_other_layout(aligned_problem, lj):
    models = iter_models(aligned_problem.geometry, lj, ["atomistic", "ecc"])
    with pytest.raises(DofLayoutError):
        models["ecc"].energy(models["atomistic"].uniform_state())
