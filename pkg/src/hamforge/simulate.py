"""Dense statevector evolution with renormalised projective measurements.

Qubit 0 is the most significant bit of the basis index.  Measurements apply
the projector onto the kept outcome and renormalise; post-selecting an
outcome of (numerically) zero probability is an error.  The module also
extracts the effective Kraus operator induced on a block of qubits and
certifies tame post-selection, i.e. outcome probabilities independent of
the proof state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, GateStep, MeasureStep, QubitRegister

ZERO_PROB_THRESHOLD = 1e-14
TAME_TOL_DEFAULT = 1e-10

_ANCILLA_VECS = {
    "zero": np.array([1.0, 0.0], dtype=complex),
    "plus": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
}
_LABEL_VECS = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
}


class ZeroProbabilityOutcome(RuntimeError):
    """Post-selected on an outcome whose probability is below threshold."""

    def __init__(self, prob: float, step_index: int | None = None):
        at = "" if step_index is None else f" at step {step_index}"
        super().__init__(f"post-selected outcome has probability {prob:.3e}{at}")
        self.prob = prob
        self.step_index = step_index


class MixedRolesError(RuntimeError):
    """The circuit does not induce a clean operator on the requested block."""


@dataclass(frozen=True)
class StateVector:
    """Normalized complex amplitudes over an n-qubit register."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (2**self.n,):
            raise ValueError(f"expected {2**self.n} amplitudes, got shape {a.shape}")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_amplitudes(cls, values) -> "StateVector":
        a = np.asarray(values, dtype=complex).ravel()
        n = int(a.size).bit_length() - 1
        if 2**n != a.size:
            raise ValueError(f"amplitude count {a.size} is not a power of two")
        norm = np.linalg.norm(a)
        if norm < ZERO_PROB_THRESHOLD:
            raise ValueError("cannot normalize a (near) zero vector")
        return cls(a / norm, n)

    @classmethod
    def from_label(cls, label: str) -> "StateVector":
        """Product state from a character per qubit, e.g. "0+1"."""
        vec = np.array([1.0], dtype=complex)
        for ch in label:
            if ch not in _LABEL_VECS:
                raise ValueError(f"unknown basis label character {ch!r}")
            vec = np.kron(vec, _LABEL_VECS[ch])
        return cls(vec, len(label))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|^2."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass
class Trajectory:
    """States after each step plus the post-selection probability record."""

    states: list[StateVector]
    step_probs: list[float]
    joint_prob: float

    @property
    def final(self) -> StateVector:
        return self.states[-1]

    def to_json_dict(self) -> dict:
        return {
            "step_probs": list(self.step_probs),
            "joint_prob": self.joint_prob,
            "final_state": [[z.real, z.imag] for z in self.final.amplitudes],
        }


@dataclass(frozen=True)
class KrausOperator:
    """Effective operator on the unmeasured block, with its outcome probability."""

    matrix: np.ndarray
    outcome_prob: float


@dataclass(frozen=True)
class TamenessReport:
    """Verdict on whether every post-selection probability is input independent.

    ``max_prob_deviation`` is the widest spread of any single measurement's
    probability over the sampled proof states; ``unitarity_residual`` is
    max |L'L - pI| for the extracted Kraus operator (the authoritative
    certificate).  ``step_probs`` holds the per-measurement mean probabilities.
    """

    is_tame: bool
    p_estimate: float
    max_prob_deviation: float
    unitarity_residual: float
    step_probs: tuple[float, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "is_tame": self.is_tame,
            "p_estimate": self.p_estimate,
            "max_prob_deviation": self.max_prob_deviation,
            "unitarity_residual": self.unitarity_residual,
            "step_probs": list(self.step_probs),
        }


def haar_random_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-distributed pure state via normalized complex Gaussians."""
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return StateVector(v / np.linalg.norm(v), n)


def _apply_1q(amp: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    psi = amp.reshape([2] * n)
    psi = np.moveaxis(psi, q, 0)
    psi = np.tensordot(u, psi, axes=([1], [0]))
    return np.moveaxis(psi, 0, q).reshape(-1)


def _apply_2q(amp: np.ndarray, u: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    psi = amp.reshape([2] * n)
    psi = np.moveaxis(psi, (q1, q2), (0, 1))
    shape = psi.shape
    psi = (u @ psi.reshape(4, -1)).reshape(shape)
    return np.moveaxis(psi, (0, 1), (q1, q2)).reshape(-1)


def _apply_raw(amp: np.ndarray, step, n: int) -> np.ndarray:
    """Apply the step's bare operator: the unitary, or the projector alone."""
    if isinstance(step, GateStep):
        op = step.operator()
        if len(step.targets) == 1:
            return _apply_1q(amp, op, step.targets[0], n)
        return _apply_2q(amp, op, step.targets[0], step.targets[1], n)
    return _apply_1q(amp, step.projector(), step.target, n)


def apply_step(s: StateVector, step: GateStep | MeasureStep) -> tuple[StateVector, float]:
    """One step of evolution; returns the new state and the step probability.

    Gates have probability 1.  A measurement projects onto the kept outcome,
    returns prob = <s|P|s> and the renormalised state, and raises
    ZeroProbabilityOutcome below the renormalisation threshold.
    """
    amp = _apply_raw(s.amplitudes, step, s.n)
    if isinstance(step, GateStep):
        return StateVector(amp, s.n), 1.0
    prob = float(np.vdot(amp, amp).real)
    if prob < ZERO_PROB_THRESHOLD:
        raise ZeroProbabilityOutcome(prob)
    return StateVector(amp / np.sqrt(prob), s.n), prob


def initial_state(register: QubitRegister, proof: StateVector | None) -> StateVector:
    """Proof block amplitudes tensored with the role-determined ancillas."""
    block = register.proof_block()
    if block:
        if proof is None or proof.n != len(block):
            need = len(block)
            have = "none" if proof is None else f"{proof.n} qubits"
            raise ValueError(f"proof state must cover {need} qubit(s), got {have}")
    elif proof is not None and proof.n != 0:
        raise ValueError("circuit has no proof block but a proof state was given")
    vec = np.array([1.0], dtype=complex)
    q = 0
    while q < register.n_qubits:
        if block and q == block[0]:
            vec = np.kron(vec, proof.amplitudes)
            q = block[-1] + 1
        else:
            vec = np.kron(vec, _ANCILLA_VECS[register.roles[q]])
            q += 1
    return StateVector(vec, register.n_qubits)


def run(c: Circuit, proof: StateVector | None = None) -> Trajectory:
    """Evolve the circuit step by step from proof (x) ancillas.

    Returns the full trajectory: T+1 states, one probability per measurement,
    and their product.  ZeroProbabilityOutcome carries the offending step.
    """
    state = initial_state(c.register, proof)
    states = [state]
    step_probs: list[float] = []
    joint = 1.0
    for idx, step in enumerate(c.steps):
        try:
            state, prob = apply_step(state, step)
        except ZeroProbabilityOutcome as exc:
            raise ZeroProbabilityOutcome(exc.prob, step_index=idx) from None
        states.append(state)
        if isinstance(step, MeasureStep):
            step_probs.append(prob)
            joint *= prob
    return Trajectory(states, step_probs, joint)


def _evolve_unnormalized(amp: np.ndarray, steps, n: int) -> np.ndarray:
    for step in steps:
        amp = _apply_raw(amp, step, n)
    return amp


def kraus_operator(c: Circuit, sys_block) -> KrausOperator:
    """Effective operator mapping the proof block onto ``sys_block``.

    Each computational basis state of the proof block is evolved (with bare,
    un-renormalised projectors) alongside the fixed ancillas; the resulting
    columns are read off ``sys_block`` after factoring out the common final
    state of the remaining qubits.  If no common factor exists the circuit
    leaves entanglement across the block boundary and MixedRolesError is
    raised.  ``outcome_prob`` is the mean squared column norm, i.e. the joint
    post-selection probability (column independent for tame circuits).
    """
    n = c.register.n_qubits
    sys_block = tuple(sorted(int(q) for q in sys_block))
    if any(not 0 <= q < n for q in sys_block) or len(set(sys_block)) != len(sys_block):
        raise ValueError(f"bad sys_block {sys_block}")
    proof = c.register.proof_block()
    if not proof:
        raise MixedRolesError("kraus extraction needs a non-empty proof block")
    if len(sys_block) != len(proof):
        raise MixedRolesError(
            f"sys_block has {len(sys_block)} qubits but the proof block has {len(proof)}"
        )
    s = len(sys_block)
    dim_s = 2**s
    comp = [q for q in range(n) if q not in sys_block]
    mats = []
    for j in range(dim_s):
        basis = np.zeros(dim_s, dtype=complex)
        basis[j] = 1.0
        amp = initial_state(c.register, StateVector(basis, s)).amplitudes
        amp = _evolve_unnormalized(amp, c.steps, n)
        psi = amp.reshape([2] * n).transpose(comp + list(sys_block))
        mats.append(psi.reshape(2 ** len(comp), dim_s))
    matrix = np.empty((dim_s, dim_s), dtype=complex)
    if not comp:
        for j, m in enumerate(mats):
            matrix[:, j] = m[0]
    else:
        stacked = np.hstack(mats)
        u_mat, sing, _ = np.linalg.svd(stacked, full_matrices=False)
        if sing[0] < ZERO_PROB_THRESHOLD:
            raise MixedRolesError("post-selection annihilates every proof input")
        if sing.size > 1 and sing[1] > 1e-10 * sing[0]:
            raise MixedRolesError(
                "final state entangles sys_block with the measured block "
                f"(secondary singular value {sing[1]:.3e})"
            )
        u = u_mat[:, 0]
        pivot = int(np.argmax(np.abs(u)))
        u = u * (abs(u[pivot]) / u[pivot])
        for j, m in enumerate(mats):
            matrix[:, j] = u.conj() @ m
    col_norms = np.sum(np.abs(matrix) ** 2, axis=0)
    return KrausOperator(matrix, float(np.mean(col_norms)))


def _auto_sys_block(c: Circuit) -> tuple[int, ...]:
    # prefer the never-measured qubits when they match the proof block size
    measured = {s.target for _, s in c.measure_steps()}
    untouched = tuple(q for q in range(c.n_qubits) if q not in measured)
    proof = c.register.proof_block()
    if len(untouched) == len(proof):
        return untouched
    return proof


def check_tame(
    c: Circuit,
    n_samples: int = 100,
    tol: float = TAME_TOL_DEFAULT,
    seed: int = 0,
) -> TamenessReport:
    """Certify that every post-selection probability is proof independent.

    Haar-random proof states (seeded, deterministic) probe the probability
    spread of each measurement; the Kraus certificate L'L = pI is computed
    where the effective-operator extraction applies.  Both must hold within
    ``tol`` for a tame verdict.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    proof = c.register.proof_block()
    if not proof:
        raise ValueError("tameness is defined relative to a non-empty proof block")
    rng = np.random.default_rng(seed)
    n_meas = len(c.measure_steps())
    probs = np.empty((n_samples, n_meas))
    joints = np.empty(n_samples)
    for i in range(n_samples):
        psi = haar_random_state(len(proof), rng)
        try:
            traj = run(c, psi)
        except ZeroProbabilityOutcome:
            return TamenessReport(False, 0.0, 1.0, 1.0)
        probs[i] = traj.step_probs
        joints[i] = traj.joint_prob
    max_dev = float(np.max(probs.max(axis=0) - probs.min(axis=0))) if n_meas else 0.0
    try:
        kraus = kraus_operator(c, _auto_sys_block(c))
        gram = kraus.matrix.conj().T @ kraus.matrix
        residual = float(
            np.max(np.abs(gram - kraus.outcome_prob * np.eye(gram.shape[0])))
        )
    except MixedRolesError:
        residual = 1.0
    return TamenessReport(
        is_tame=bool(max_dev <= tol and residual <= tol),
        p_estimate=float(np.mean(joints)),
        max_prob_deviation=max_dev,
        unitarity_residual=residual,
        step_probs=tuple(float(x) for x in probs.mean(axis=0)),
    )
