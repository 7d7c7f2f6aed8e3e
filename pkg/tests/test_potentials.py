"""
两体势测试
"""
import numpy as np
import pytest
from pydantic import ValidationError

from ac_coupling_project.errors import PotentialDomainError
from ac_coupling_project.potentials.pair_potentials import PairPotential, eval_pair, eval_pair_vec


@pytest.mark.parametrize(
    "potential, z, value, d1",
    [
        (PairPotential.lennard_jones(), 1.0, -1.0, 0.0),
        (PairPotential.lennard_jones(), 2.0, -2.0 / 64 + 1.0 / 4096, 12.0 / 128 - 12.0 / 8192),
        (PairPotential.morse(alpha=3.0), 1.0, -1.0, 0.0),
        (PairPotential.morse(alpha=1.5), 1.0, -1.0, 0.0),
    ],
)
def test_example_values(potential, z, value, d1):
    v, g, _ = eval_pair(potential, z)
    assert v == pytest.approx(value, abs=1e-15)
    assert g == pytest.approx(d1, abs=1e-15)


def test_lennard_jones_second_shell_force():
    """φ′(2) = 12·2⁻⁷ − 12·2⁻¹³，二进制下精确"""
    _, d1, _ = eval_pair(PairPotential.lennard_jones(), 2.0)
    assert d1 == 0.09228515625


@pytest.mark.parametrize("potential", [PairPotential.lennard_jones(), PairPotential.morse(3.0)])
def test_derivatives_match_finite_differences(potential):
    z = np.linspace(0.8, 3.0, 23)
    h = 1e-6
    value, d1, d2 = potential.evaluate(z)
    vp, d1p, _ = potential.evaluate(z + h)
    vm, d1m, _ = potential.evaluate(z - h)
    np.testing.assert_allclose(d1, (vp - vm) / (2 * h), rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(d2, (d1p - d1m) / (2 * h), rtol=1e-6, atol=1e-7)


def test_vector_form_antisymmetry():
    """φ(z) := φ(|z|) 的梯度关于 z 反对称"""
    p = PairPotential.lennard_jones()
    z = np.array([0.7, 0.9])
    v1, g1 = eval_pair_vec(p, z)
    v2, g2 = eval_pair_vec(p, -z)
    assert v1 == v2
    np.testing.assert_allclose(g1, -g2)
    _, d1, _ = eval_pair(p, float(np.linalg.norm(z)))
    np.testing.assert_allclose(g1, d1 * z / np.linalg.norm(z))


@pytest.mark.parametrize("z", [0.0, -1.0, np.array([1.0, 0.0])])
def test_non_positive_distance(z):
    with pytest.raises(PotentialDomainError):
        PairPotential.lennard_jones().evaluate(z)


def test_coincident_vector():
    with pytest.raises(PotentialDomainError):
        eval_pair_vec(PairPotential.morse(), np.zeros(2))


def test_config_aliases():
    p = PairPotential.model_validate({"potential": "morse", "alpha": 2.0, "cutoff": 2.5})
    assert p.kind == "morse"
    assert p.alpha == 2.0
    with pytest.raises(ValidationError):
        PairPotential.model_validate({"potential": "morse", "alpha": -1.0})
    with pytest.raises(ValidationError):
        PairPotential.model_validate({"potential": "buckingham"})
