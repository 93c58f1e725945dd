"""Independent brute-force reference routines for the test suite.

Everything here is built from first principles (plain Kronecker products,
textbook Jacobi rotations) so it shares no code path with the package
implementations it checks.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from hamforge.circuit import Circuit, GateStep, MeasureStep, QubitRegister

I2 = np.eye(2, dtype=complex)
SQ2 = 1.0 / np.sqrt(2.0)
GATES = {
    "H": np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}
KEEP_VECS = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([SQ2, SQ2], dtype=complex),
    "-": np.array([SQ2, -SQ2], dtype=complex),
}


def op_on(factors: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Kron together per-qubit 2x2 factors (identity where unspecified)."""
    out = np.array([[1.0 + 0.0j]])
    for q in range(n):
        out = np.kron(out, factors.get(q, I2))
    return out


def embed_oracle(small: np.ndarray, targets, n: int) -> np.ndarray:
    """Embed a 1- or 2-qubit operator by expanding it over elementary matrices."""
    targets = tuple(targets)
    if len(targets) == 1:
        return op_on({targets[0]: np.asarray(small, dtype=complex)}, n)
    q1, q2 = targets
    out = np.zeros((2**n, 2**n), dtype=complex)
    unit = np.zeros((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            for c in range(2):
                for d in range(2):
                    coeff = small[2 * a + b, 2 * c + d]
                    if coeff == 0:
                        continue
                    e1 = unit.copy()
                    e1[a, c] = 1.0
                    e2 = unit.copy()
                    e2[b, d] = 1.0
                    out += coeff * op_on({q1: e1, q2: e2}, n)
    return out


def step_operator_oracle(step, n: int) -> np.ndarray:
    """The bare dense operator of one step (unitary, or the kept projector)."""
    if isinstance(step, GateStep):
        small = GATES[step.kind] if step.kind in GATES else np.asarray(step.matrix)
        return embed_oracle(small, step.targets, n)
    v = KEEP_VECS[step.keep]
    return embed_oracle(np.outer(v, v.conj()), (step.target,), n)


def circuit_operator_oracle(c: Circuit) -> np.ndarray:
    """Dense product of all bare step operators, later steps leftmost."""
    n = c.register.n_qubits
    k = np.eye(2**n, dtype=complex)
    for step in c.steps:
        k = step_operator_oracle(step, n) @ k
    return k


def initial_state_oracle(c: Circuit, proof: np.ndarray | None) -> np.ndarray:
    vec = np.array([1.0 + 0.0j])
    block = c.register.proof_block()
    q = 0
    while q < c.register.n_qubits:
        if block and q == block[0]:
            vec = np.kron(vec, proof)
            q = block[-1] + 1
        else:
            vec = np.kron(vec, KEEP_VECS["0" if c.register.roles[q] == "zero" else "+"])
            q += 1
    return vec


def jacobi_eigenvalues(h: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations."""
    a = np.array(h, dtype=complex)
    n = a.shape[0]
    scale = np.linalg.norm(a) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                phi = np.angle(apq)
                absb = abs(apq)
                tau = (a[q, q].real - a[p, p].real) / (2.0 * absb)
                if tau >= 0:
                    t = 1.0 / (tau + np.hypot(tau, 1.0))
                else:
                    t = -1.0 / (-tau + np.hypot(tau, 1.0))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                u = np.array([[c * np.exp(1j * phi), s * np.exp(1j * phi)], [-s, c]])
                a[:, [p, q]] = a[:, [p, q]] @ u
                a[[p, q], :] = u.conj().T @ a[[p, q], :]
    return np.sort(np.diag(a).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_circuit(
    rng: np.random.Generator,
    n_qubits: int,
    n_steps: int,
    allow_measure: bool = True,
    proof_size: int | None = None,
) -> Circuit:
    """A random valid circuit for round-trip and property tests."""
    if proof_size is None:
        proof_size = int(rng.integers(0, n_qubits + 1))
    start = int(rng.integers(0, n_qubits - proof_size + 1)) if proof_size else 0
    roles = []
    for q in range(n_qubits):
        if start <= q < start + proof_size:
            roles.append("proof")
        else:
            roles.append("zero" if rng.random() < 0.5 else "plus")
    steps = []
    names_1q = ["H", "X", "Z", "S"]
    names_2q = ["CZ", "CNOT"]
    for _ in range(n_steps):
        r = rng.random()
        if allow_measure and r < 0.25:
            basis = "X" if rng.random() < 0.5 else "Z"
            keep = ("+", "-")[rng.integers(0, 2)] if basis == "X" else ("0", "1")[rng.integers(0, 2)]
            prob = None
            if rng.random() < 0.3:
                prob = Fraction(int(rng.integers(1, 4)), 4)
            elif rng.random() < 0.3:
                prob = float(rng.uniform(0.1, 1.0))
            steps.append(MeasureStep(basis, int(rng.integers(0, n_qubits)), keep, prob))
        elif r < 0.55 and n_qubits >= 2:
            q1, q2 = rng.choice(n_qubits, size=2, replace=False)
            if rng.random() < 0.25:
                steps.append(GateStep("matrix4", (int(q1), int(q2)), random_unitary(4, rng)))
            else:
                steps.append(GateStep(str(rng.choice(names_2q)), (int(q1), int(q2))))
        else:
            q = int(rng.integers(0, n_qubits))
            if rng.random() < 0.25:
                steps.append(GateStep("matrix2", (q,), random_unitary(2, rng)))
            else:
                steps.append(GateStep(str(rng.choice(names_1q)), (q,)))
    out = int(rng.integers(0, n_qubits)) if rng.random() < 0.5 else None
    return Circuit(QubitRegister(n_qubits, tuple(roles)), tuple(steps), "random", out)
