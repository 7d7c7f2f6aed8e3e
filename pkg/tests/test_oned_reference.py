"""
一维参考实现测试
"""
from fractions import Fraction

import numpy as np
import pytest

from ac_coupling_project.errors import DofLayoutError, PotentialDomainError, UnsupportedClosedFormError
from ac_coupling_project.oned.chain_1d import (
    Chain1D,
    Subset1D,
    bond_gradient_1d,
    build_chain_model,
    chain_bond_density,
    continuum_bond_value,
    d_omega,
    energy_1d,
    qce_ghost_closed_form,
    sample_monotone,
    w1inf_error_1d,
)
from ac_coupling_project.solver.minimizer import fd_gradient_check

VARIANTS = ["atomistic", "cauchy-born", "qce", "ecc", "acc", "acc-tilde"]


def _free_residual(model, F):
    _, grad = model.energy(model.uniform(F))
    return float(np.max(np.abs(grad)))


def _bond_force_scale(potential, F, R):
    _, d1, _ = potential.evaluate(F * np.arange(1, R + 1, dtype=float))
    return max(1.0, float(np.max(np.abs(d1))))


class TestQceGhostForce:
    @pytest.mark.parametrize("F", [0.95, 1.0, 1.1])
    def test_closed_form(self, lj, F):
        """R = 2：界面附近四个原子的梯度为 (+c, −c, −c, +c)，其余左侧自由原子无力"""
        model = build_chain_model("qce", Chain1D(N=10, R=2), lj)
        gradient = model.site_gradient(model.uniform(F))
        expected = qce_ghost_closed_form(F, lj)
        for i, value in expected.items():
            assert gradient[i] == pytest.approx(value, abs=1e-13)
        for i in range(-9, 8):
            if i not in expected:
                assert gradient[i] == pytest.approx(0.0, abs=1e-13)

    def test_value_at_identity(self, lj):
        """c = φ′(2)/2 = 0.046142578125"""
        assert qce_ghost_closed_form(1.0, lj)[2] == 0.046142578125

    def test_only_second_neighbour(self, lj):
        with pytest.raises(UnsupportedClosedFormError):
            qce_ghost_closed_form(1.0, lj, R=3)


class TestConsistency:
    @pytest.mark.parametrize("R", [2, 3, 4])
    @pytest.mark.parametrize("variant", ["ecc", "acc", "acc-tilde"])
    def test_no_ghost_force(self, variant, R, lj, rng):
        model = build_chain_model(variant, Chain1D(N=8, R=R), lj)
        for F in rng.uniform(0.8, 1.2, size=10):
            assert _free_residual(model, F) <= 1e-12 * _bond_force_scale(lj, F, R)

    def test_coarse_mesh(self, morse):
        chain = Chain1D(N=8, R=2, nodes=(0, 1, 2, 4, 8))
        for variant in ("ecc", "acc"):
            model = build_chain_model(variant, chain, morse)
            assert _free_residual(model, 1.05) <= 1e-12

    def test_shifted_interface(self, lj):
        chain = Chain1D(N=8, R=3, interface=(-2, 5))
        model = build_chain_model("ecc", chain, lj)
        assert _free_residual(model, 0.97) <= 1e-12 * _bond_force_scale(lj, 0.97, 3)

    def test_qce_is_inconsistent(self, lj):
        model = build_chain_model("qce", Chain1D(N=8, R=2), lj)
        assert _free_residual(model, 1.0) > 1e-3


class TestEnergyForms:
    @pytest.mark.parametrize("R", [2, 3])
    def test_ecc_forms_agree(self, R, lj, rng):
        chain = Chain1D(N=8, R=R)
        split = build_chain_model("ecc", chain, lj, "bond-split")
        definition = build_chain_model("ecc", chain, lj, "definition")
        values = sample_monotone(split, 1.03, 0.05, rng)
        e1, g1 = split.energy(values)
        e2, g2 = definition.energy(values)
        assert e1 == pytest.approx(e2, rel=1e-12)
        np.testing.assert_allclose(g1, g2, atol=1e-11)

    def test_acc_tilde_equals_acc_when_bonds_shorter_than_continuum(self, lj, rng):
        chain = Chain1D(N=8, R=3)
        acc = build_chain_model("acc", chain, lj)
        tilde = build_chain_model("acc-tilde", chain, lj)
        values = sample_monotone(acc, 0.98, 0.05, rng)
        e1, g1 = acc.energy(values)
        e2, g2 = tilde.energy(values)
        assert e1 == pytest.approx(e2, rel=1e-13)
        np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_bond_continuum_values_sum_to_cauchy_born(self, lj, rng):
        """Σ_b c_b(y) = Σ_r ∫_{Ω_c} φ(r y′)"""
        chain = Chain1D(N=8, R=3)
        ecc = build_chain_model("ecc", chain, lj)
        cb = build_chain_model("cauchy-born", chain, lj)
        values = sample_monotone(ecc, 1.0, 0.05, rng)
        total = sum(continuum_bond_value(ecc, values, i, r) for i, r in chain.bonds())
        nodes = np.array([values[ecc.layout.index[p]] for p in cb.layout.sites])
        energy, _ = cb.full_gradient(nodes)
        assert total == pytest.approx(energy, rel=1e-13)

    def test_energy_1d_matches_model(self, lj, rng):
        chain = Chain1D(N=6, R=2)
        model = build_chain_model("acc", chain, lj)
        values = sample_monotone(model, 1.0, 0.05, rng)
        e1, g1 = energy_1d("acc", chain, values, lj)
        e2, g2 = model.energy(values)
        assert e1 == e2
        np.testing.assert_array_equal(g1, g2)

    def test_unknown_variant(self, lj):
        with pytest.raises(ValueError):
            build_chain_model("quasi", Chain1D(N=4, R=2), lj)


@pytest.mark.parametrize("R", [2, 3])
def test_bond_variation_identity(R, lj):
    """均匀变形处跨界面键满足 δa_b + δc_b = δe_b"""
    chain = Chain1D(N=8, R=R)
    model = build_chain_model("acc", chain, lj)
    values = model.uniform(1.04)
    a, b = chain.continuum
    crossing = [(i, r) for i, r in chain.bonds()
                if not chain.bond_in_continuum(i, r) and i < b and i + r > a]
    assert crossing
    for i, r in crossing:
        atomistic = bond_gradient_1d(model, values, i, r, "atomistic")
        continuum = bond_gradient_1d(model, values, i, r, "continuum")
        exact = bond_gradient_1d(model, values, i, r, "exact")
        np.testing.assert_allclose(atomistic + continuum, exact, atol=1e-13)


@pytest.mark.parametrize("variant", VARIANTS)
def test_gradient_matches_finite_differences(variant, morse, rng):
    model = build_chain_model(variant, Chain1D(N=8, R=3), morse)
    values = sample_monotone(model, 1.02, 0.05, rng)
    objective = model.objective(values)
    x = values[model.layout.free_indices]
    assert fd_gradient_check(objective, x, step=1e-6) <= 1e-6


class TestHelpers:
    def test_d_omega(self):
        omega = Subset1D(((0, 1), (2, Fraction(7, 2))))
        assert omega.length == Fraction(5, 2)
        assert d_omega(omega, lambda t: float(t) ** 2) == pytest.approx(1.0 + 49 / 4 - 4.0)

    @pytest.mark.parametrize("intervals", [(), ((1, 1),), ((0, 2), (1, 3))])
    def test_invalid_subset(self, intervals):
        with pytest.raises(ValueError):
            Subset1D(intervals)

    @pytest.mark.parametrize("r", [1, 2, 3])
    def test_bond_density(self, r):
        assert chain_bond_density(r, Fraction(5, 2)) == 1
        assert chain_bond_density(r, 2) == Fraction(r - 1, r)

    def test_bond_density_direction(self):
        with pytest.raises(ValueError):
            chain_bond_density(0, Fraction(1, 2))

    @pytest.mark.parametrize(
        "kwargs",
        [{"N": 5, "R": 2, "interface": (3, 1)}, {"N": 5, "R": 2, "nodes": (1, 2, 5)}, {"N": 0, "R": 2}],
    )
    def test_invalid_chain(self, kwargs):
        with pytest.raises(ValueError):
            Chain1D(**kwargs)

    def test_non_monotone_state(self, lj):
        model = build_chain_model("atomistic", Chain1D(N=4, R=2), lj)
        with pytest.raises(PotentialDomainError):
            model.energy(model.uniform(-1.0))

    def test_force_on_missing_site(self, lj):
        model = build_chain_model("cauchy-born", Chain1D(N=4, R=2), lj)
        with pytest.raises(DofLayoutError):
            model.force_vector({-3: 1.0})

    def test_w1inf_error(self, lj):
        model = build_chain_model("ecc", Chain1D(N=6, R=2), lj)
        reference = build_chain_model("atomistic", Chain1D(N=6, R=2), lj)
        assert w1inf_error_1d(model, model.uniform(1.0), reference, reference.uniform(1.0)) == 0.0
        error = w1inf_error_1d(model, model.uniform(1.1), reference, reference.uniform(1.0))
        assert error == pytest.approx(0.1, abs=1e-12)
