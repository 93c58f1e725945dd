import numpy as np
import pytest

from fractions import Fraction

from hamforge.circuit import (
    Circuit,
    CircuitSyntaxError,
    GateStep,
    MeasureStep,
    QubitRegister,
    parse_circuit,
    serialize_circuit,
    validate,
)
from hamforge.families import family_f1

from oracles import random_circuit

GADGET_TEXT = """\
qubits 2
roles proof:0 plus:1
step gate CZ 0 1
step measure X 0 keep +
"""


def test_parse_gadget():
    c = parse_circuit(GADGET_TEXT)
    assert c.n_qubits == 2
    assert c.register.roles == ("proof", "plus")
    assert c.n_steps == 2
    gate, meas = c.steps
    assert gate.kind == "CZ" and gate.targets == (0, 1)
    assert meas.basis == "X" and meas.target == 0 and meas.keep == "+"
    assert meas.declared_prob is None


def test_parse_empty_circuit():
    c = parse_circuit("qubits 1\nroles proof:0\n")
    assert c.n_steps == 0
    assert c.register.roles == ("proof",)


def test_parse_duplicate_targets():
    with pytest.raises(CircuitSyntaxError, match="duplicate"):
        parse_circuit("qubits 2\nstep gate CZ 0 0\n")


def test_parse_unknown_gate():
    with pytest.raises(CircuitSyntaxError, match="unknown gate"):
        parse_circuit("qubits 1\nstep gate Q 0\n")


def test_parse_out_of_range_names_line():
    text = "qubits 2\nroles proof:0\n# comment\nstep gate H 5\n"
    with pytest.raises(CircuitSyntaxError) as exc:
        parse_circuit(text)
    assert exc.value.line == 4
    assert "out of range" in str(exc.value)


def test_parse_prob_forms():
    c = parse_circuit("qubits 1\nstep measure Z 0 keep 0 prob 1/3\n")
    assert c.steps[0].declared_prob == Fraction(1, 3)
    c = parse_circuit("qubits 1\nstep measure Z 0 keep 0 prob 0.25\n")
    assert c.steps[0].declared_prob == 0.25
    with pytest.raises(CircuitSyntaxError, match="outside"):
        parse_circuit("qubits 1\nstep measure Z 0 keep 0 prob 3/2\n")
    with pytest.raises(CircuitSyntaxError, match="outside"):
        parse_circuit("qubits 1\nstep measure Z 0 keep 0 prob 0\n")


def test_parse_keep_label_must_match_basis():
    with pytest.raises(CircuitSyntaxError, match="keep label"):
        parse_circuit("qubits 1\nstep measure X 0 keep 0\n")


def test_parse_qubits_must_come_first():
    with pytest.raises(CircuitSyntaxError, match="before"):
        parse_circuit("roles proof:0\nqubits 1\n")
    with pytest.raises(CircuitSyntaxError, match="missing"):
        parse_circuit("# nothing here\n")


def test_parse_role_errors():
    with pytest.raises(CircuitSyntaxError, match="twice"):
        parse_circuit("qubits 2\nroles proof:0 plus:0\n")
    with pytest.raises(CircuitSyntaxError, match="unknown role"):
        parse_circuit("qubits 2\nroles fancy:0\n")
    with pytest.raises(CircuitSyntaxError, match="out of range"):
        parse_circuit("qubits 2\nroles proof:0..5\n")


def test_parse_matrix_gate():
    vals = " ".join(["0", "0", "1", "0", "1", "0", "0", "0"])  # X gate, re/im pairs
    c = parse_circuit(f"qubits 1\nstep gate matrix2 {vals} 0\n")
    assert np.allclose(c.steps[0].matrix, [[0, 1], [1, 0]])
    bad = " ".join(["1", "0", "0", "0", "0", "0", "2", "0"])  # diag(1, 2)
    with pytest.raises(CircuitSyntaxError, match="non-unitary"):
        parse_circuit(f"qubits 1\nstep gate matrix2 {bad} 0\n")


def test_roundtrip_spec_fields():
    text = "qubits 3\nroles proof:0..1 plus:2\noutput 2\nstep gate CNOT 0 2\n"
    c = parse_circuit(text)
    assert c.output_qubit == 2
    assert parse_circuit(serialize_circuit(c)) == c


def test_roundtrip_random_circuits():
    rng = np.random.default_rng(11)
    for _ in range(25):
        c = random_circuit(rng, int(rng.integers(1, 5)), int(rng.integers(0, 8)))
        again = parse_circuit(serialize_circuit(c))
        assert again == c


def test_name_comment_roundtrip():
    c = parse_circuit(serialize_circuit(family_f1(2)))
    assert c.name == "f1(n=2)"


def test_validate_gadget_clean():
    assert validate(parse_circuit(GADGET_TEXT)).ok


def test_validate_family_circuits():
    assert validate(family_f1(3)).ok


def test_validate_non_unitary_matrix():
    step = GateStep("matrix2", (0,), np.array([[1.0, 0.0], [0.0, 2.0]]))
    c = Circuit(QubitRegister(1, ("proof",)), (step,))
    report = validate(c)
    assert not report.ok
    assert any("non-unitary gate at step 0" in issue for issue in report.issues)


def test_validate_proof_block_contiguous():
    c = Circuit(QubitRegister(3, ("proof", "zero", "proof")))
    report = validate(c)
    assert any("contiguous" in issue for issue in report.issues)


def test_validate_bad_measure_and_output():
    c = Circuit(
        QubitRegister(2, ("proof", "zero")),
        (MeasureStep("Z", 5, "0"), MeasureStep("Z", 0, "0", 2.0)),
        output_qubit=9,
    )
    issues = validate(c).issues
    assert any("out of range" in s for s in issues)
    assert any("outside (0, 1]" in s for s in issues)
    assert any("output qubit" in s for s in issues)


def test_serialize_is_bit_stable():
    rng = np.random.default_rng(3)
    c = random_circuit(rng, 3, 6)
    assert serialize_circuit(c) == serialize_circuit(parse_circuit(serialize_circuit(c)))
