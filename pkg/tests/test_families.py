import numpy as np
import pytest

from hamforge.circuit import GateStep, MeasureStep, validate
from hamforge.families import FamilySpec, family_f1, family_f2, hadamard_gadget
from hamforge.hamiltonian import compile_circuit
from hamforge.simulate import check_tame, haar_random_state, kraus_operator, run

from oracles import GATES

H = GATES["H"]


def test_gadget_validates_and_acts_as_hadamard():
    g = hadamard_gadget()
    assert validate(g).ok
    traj = run(g, haar_random_state(1, np.random.default_rng(0)))
    assert traj.joint_prob == pytest.approx(0.5, abs=1e-12)
    k = kraus_operator(g, (1,))
    assert np.max(np.abs(k.matrix - H / np.sqrt(2))) <= 1e-12


def test_f1_structure():
    c = family_f1(3)
    assert c.n_qubits == 4
    assert c.register.roles == ("proof", "plus", "plus", "plus")
    assert c.n_steps == 6
    kinds = [type(s) for s in c.steps]
    assert kinds == [GateStep, MeasureStep] * 3
    assert validate(c).ok
    assert compile_circuit(c).dim_clock == 7


def test_f1_double_hop_is_identity():
    rng = np.random.default_rng(1)
    psi = haar_random_state(1, rng)
    traj = run(family_f1(2), psi)
    assert traj.joint_prob == pytest.approx(0.25, abs=1e-12)
    expected = np.kron(np.kron([1, 1] / np.sqrt(2), [1, 1] / np.sqrt(2)), psi.amplitudes)
    assert abs(np.vdot(expected, traj.final.amplitudes)) ** 2 >= 1 - 1e-12


def test_f1_applies_alternating_hadamards():
    rng = np.random.default_rng(2)
    for n in range(1, 7):
        c = family_f1(n)
        hn = np.linalg.matrix_power(H, n)
        for _ in range(10):
            psi = haar_random_state(1, rng)
            traj = run(c, psi)
            assert traj.joint_prob == pytest.approx(0.5**n, rel=1e-10)
            expected = np.array([1.0])
            for _ in range(n):
                expected = np.kron(expected, [1, 1] / np.sqrt(2))
            expected = np.kron(expected, hn @ psi.amplitudes)
            assert abs(np.vdot(expected, traj.final.amplitudes)) ** 2 >= 1 - 1e-10


def test_f2_rounds_implement_identity():
    rng = np.random.default_rng(3)
    for n in range(1, 11):
        c = family_f2(n)
        assert c.n_steps == 4 * n
        psi = haar_random_state(1, rng)
        traj = run(c, psi)
        assert traj.joint_prob == pytest.approx(0.25**n, rel=1e-10)
        expected = np.kron(psi.amplitudes, [1, 1] / np.sqrt(2))
        assert abs(np.vdot(expected, traj.final.amplitudes)) ** 2 >= 1 - 1e-10


def test_families_certify_tame_at_half():
    for c in (family_f1(3), family_f2(2)):
        report = check_tame(c, 50, 1e-10, seed=4)
        assert report.is_tame
        for p in report.step_probs:
            assert p == pytest.approx(0.5, abs=1e-10)


def test_family_spec_builder():
    assert FamilySpec("F1", 2).build() == family_f1(2)
    assert FamilySpec("F2", 3).build() == family_f2(3)
    with pytest.raises(ValueError):
        FamilySpec("F3", 1)
    with pytest.raises(ValueError):
        FamilySpec("F1", 0)
    with pytest.raises(ValueError):
        family_f1(0)
    with pytest.raises(ValueError):
        family_f2(-1)


def test_family_circuits_declare_half_probability():
    for c in (family_f1(2), family_f2(2), hadamard_gadget()):
        for _, step in c.measure_steps():
            assert float(step.declared_prob) == 0.5
