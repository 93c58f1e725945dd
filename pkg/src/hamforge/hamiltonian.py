"""Clock Hamiltonians for circuits with post-selected measurements.

A circuit of T steps is mapped onto system (x) clock space, the clock being
a qudit of dimension T+1, basis index = sys_index * dim_clock + clock_index
(clock fastest).  Unitary steps contribute the standard propagation
projector

    1/2 (I (x) (|t><t| + |t-1><t-1|) - U (x) |t><t-1| - U' (x) |t-1><t|),

post-selected measurements with kept projector P and tame probability p
contribute

    N(p)/sqrt(p) P (x) (1/sqrt(p) |t><t| - |t><t+1| - |t+1><t|
                        + sqrt(p) |t+1><t+1|)  +  (I-P) (x) |t+1><t+1|

with N(p) = p/(p+1), whose P-part is again a projector and which
annihilates v (x) |t> + (1/sqrt(p)) P v (x) |t+1|.  The ``literal`` variant
swaps the clock off-diagonal coefficient N/sqrt(p) for N*sqrt(p); it exists
only to reproduce a published variant of the construction whose history
states do NOT lie in the kernel, for side-by-side comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.io
import scipy.sparse as sp

from .circuit import Circuit, GateStep, MeasureStep, QubitRegister
from .simulate import StateVector, check_tame, run

HERMITICITY_TOL = 1e-12
IDEMPOTENCE_TOL = 1e-12


class TamenessRequired(RuntimeError):
    """A measurement lacks a certified outcome probability."""


class NonUnitaryCircuit(RuntimeError):
    """The requested transform is only defined for unitary-only circuits."""


def embed_operator(small: np.ndarray, targets, n: int) -> sp.csc_matrix:
    """Embed a 2x2 or 4x4 operator on ``targets`` into the 2^n system space."""
    targets = tuple(int(q) for q in targets)
    small = np.asarray(small, dtype=complex)
    k = len(targets)
    if small.shape != (2**k, 2**k):
        raise ValueError(f"{small.shape} operator does not fit {k} target(s)")
    rest = [q for q in range(n) if q not in targets]
    weight = [2 ** (n - 1 - q) for q in range(n)]
    r = np.arange(2 ** len(rest), dtype=np.int64)
    base = np.zeros_like(r)
    for i, q in enumerate(rest):
        base += ((r >> (len(rest) - 1 - i)) & 1) * weight[q]
    offs = []
    for x in range(2**k):
        offs.append(sum(((x >> (k - 1 - j)) & 1) * weight[q] for j, q in enumerate(targets)))
    rows, cols, data = [], [], []
    for a in range(2**k):
        for b in range(2**k):
            v = small[a, b]
            if v != 0.0:
                rows.append(base + offs[a])
                cols.append(base + offs[b])
                data.append(np.full(base.size, v))
    if not data:
        return sp.csc_matrix((2**n, 2**n), dtype=complex)
    coo = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2**n, 2**n),
    )
    return coo.tocsc()


def _clock_op(a: int, b: int, dim: int) -> sp.csc_matrix:
    return sp.coo_matrix(([1.0], ([a], [b])), shape=(dim, dim)).tocsc()


def _as_sparse(op) -> sp.csc_matrix:
    if sp.issparse(op):
        return op.tocsc().astype(complex)
    return sp.csc_matrix(np.asarray(op, dtype=complex))


def unitary_term(u, t: int, dim_clock: int) -> sp.csc_matrix:
    """Propagation projector enforcing U at the clock transition t-1 -> t."""
    if not 1 <= t <= dim_clock - 1:
        raise ValueError(f"step {t} outside 1..{dim_clock - 1}")
    u = _as_sparse(u)
    eye = sp.identity(u.shape[0], dtype=complex, format="csc")
    term = 0.5 * (
        sp.kron(eye, _clock_op(t, t, dim_clock) + _clock_op(t - 1, t - 1, dim_clock))
        - sp.kron(u, _clock_op(t, t - 1, dim_clock))
        - sp.kron(u.conj().T, _clock_op(t - 1, t, dim_clock))
    )
    return term.tocsc()


def postselection_term(
    pi, p: float, t: int, dim_clock: int, literal: bool = False
) -> sp.csc_matrix:
    """Propagation term for a tame measurement at the clock transition t -> t+1.

    ``pi`` is the kept projector embedded on the full system and ``p`` its
    certified outcome probability.  The excluded-outcome penalty
    (I-pi) (x) |t+1><t+1| removes the orthogonal-sector states from the
    kernel.
    """
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"probability {p} outside (0, 1]")
    if not 0 <= t <= dim_clock - 2:
        raise ValueError(f"transition {t} -> {t + 1} outside the clock")
    pi = _as_sparse(pi)
    idem = abs(pi @ pi - pi).max() if pi.nnz else 0.0
    if idem > IDEMPOTENCE_TOL:
        raise ValueError(f"pi is not idempotent (deviation {idem:.2e})")
    norm = p / (p + 1.0)
    sq = np.sqrt(p)
    off = norm * sq if literal else norm / sq
    eye = sp.identity(pi.shape[0], dtype=complex, format="csc")
    term = (
        (norm / p) * sp.kron(pi, _clock_op(t, t, dim_clock))
        - off * sp.kron(pi, _clock_op(t, t + 1, dim_clock))
        - off * sp.kron(pi, _clock_op(t + 1, t, dim_clock))
        + norm * sp.kron(pi, _clock_op(t + 1, t + 1, dim_clock))
        + sp.kron(eye - pi, _clock_op(t + 1, t + 1, dim_clock))
    )
    return term.tocsc()


_INIT_VECS = {
    "zero": np.array([1.0, 0.0], dtype=complex),
    "plus": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
}


def input_term(register: QubitRegister, dim_clock: int) -> sp.csc_matrix:
    """Penalty at clock 0 for any ancilla deviating from its role state."""
    ancillas = register.ancilla_qubits()
    if not ancillas:
        raise ValueError("register has no ancilla to constrain")
    n = register.n_qubits
    total = sp.csc_matrix((2**n, 2**n), dtype=complex)
    for q in ancillas:
        v = _INIT_VECS[register.roles[q]]
        total = total + embed_operator(np.eye(2) - np.outer(v, v.conj()), (q,), n)
    return sp.kron(total, _clock_op(0, 0, dim_clock)).tocsc()


def output_term(q_out: int, n_qubits: int, dim_clock: int) -> sp.csc_matrix:
    """Penalty |0><0| on the output qubit at the final clock value."""
    proj = embed_operator(np.diag([1.0, 0.0]), (q_out,), n_qubits)
    return sp.kron(proj, _clock_op(dim_clock - 1, dim_clock - 1, dim_clock)).tocsc()


@dataclass
class ClockHamiltonian:
    """Sum of labelled Hermitian PSD terms on system (x) clock space."""

    dim_sys: int
    dim_clock: int
    terms: list[tuple[str, sp.csc_matrix]]
    _total: sp.csc_matrix | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.dim_sys * self.dim_clock

    @property
    def total(self) -> sp.csc_matrix:
        if self._total is None:
            acc = sp.csc_matrix((self.dim, self.dim), dtype=complex)
            for _, term in self.terms:
                acc = acc + term
            self._total = acc.tocsc()
        return self._total

    def term_summary(self) -> list[dict]:
        out = []
        for label, term in self.terms:
            bound = float(np.abs(term).sum(axis=1).max()) if term.nnz else 0.0
            out.append({"label": label, "nnz": int(term.nnz), "norm_bound": bound})
        return out

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm (Hermitian infinity norm)."""
        m = self.total
        return float(np.abs(m).sum(axis=1).max()) if m.nnz else 0.0

    def sidecar_dict(self) -> dict:
        return {
            "dim_sys": self.dim_sys,
            "dim_clock": self.dim_clock,
            "terms": self.term_summary(),
            "index_convention": "clock-fastest",
        }


def _certified_probs(c: Circuit, samples: int, tol: float, seed: int) -> dict[int, float]:
    """Outcome probability per measure-step index, declared or measured tame."""
    measures = c.measure_steps()
    probs: dict[int, float] = {}
    missing = [i for i, s in measures if s.declared_prob is None]
    if missing:
        report = check_tame(c, n_samples=samples, tol=tol, seed=seed)
        if not report.is_tame:
            raise TamenessRequired(
                "cannot compile: post-selection probabilities depend on the proof "
                f"(spread {report.max_prob_deviation:.3e}, "
                f"certificate residual {report.unitarity_residual:.3e})"
            )
        for k, (i, _) in enumerate(measures):
            probs[i] = report.step_probs[k]
    for i, s in measures:
        if s.declared_prob is not None:
            probs[i] = float(s.declared_prob)
    return probs


def compile_circuit(
    c: Circuit,
    include_input: bool = False,
    include_output: bool = False,
    literal: bool = False,
    tame_samples: int = 20,
    tame_tol: float = 1e-10,
    tame_seed: int = 0,
) -> ClockHamiltonian:
    """Build the clock Hamiltonian of a circuit.

    By default only the propagation terms are emitted (one per step);
    ``include_input`` adds the ancilla-initialisation penalty at clock 0 and
    ``include_output`` the |0> penalty on the output qubit at clock T.
    Measurements need a tame probability: declared on the step, else measured
    and certified here (TamenessRequired when certification fails).
    """
    n = c.register.n_qubits
    dim_clock = c.n_steps + 1
    probs = _certified_probs(c, tame_samples, tame_tol, tame_seed)
    terms: list[tuple[str, sp.csc_matrix]] = []
    if include_input:
        terms.append(("input", input_term(c.register, dim_clock)))
    for idx, step in enumerate(c.steps):
        t = idx + 1
        if isinstance(step, GateStep):
            u = embed_operator(step.operator(), step.targets, n)
            terms.append((f"unitary_prop({t})", unitary_term(u, t, dim_clock)))
        else:
            pi = embed_operator(step.projector(), (step.target,), n)
            terms.append(
                (f"post_prop({t})", postselection_term(pi, probs[idx], t - 1, dim_clock, literal))
            )
    if include_output:
        if c.output_qubit is None:
            raise ValueError("circuit has no output qubit")
        terms.append(("output", output_term(c.output_qubit, n, dim_clock)))
    return ClockHamiltonian(2**n, dim_clock, terms)


@dataclass(frozen=True)
class HistoryState:
    """Superposition of the trajectory states entangled with the clock."""

    vector: np.ndarray
    normalized: bool
    dim_sys: int
    dim_clock: int


def history_state(c: Circuit, proof: StateVector | None, normalized: bool = True) -> HistoryState:
    """Sum of (renormalised) trajectory states tensored with the clock basis."""
    traj = run(c, proof)
    dim_clock = c.n_steps + 1
    dim_sys = 2**c.register.n_qubits
    vec = np.zeros(dim_sys * dim_clock, dtype=complex)
    for t, state in enumerate(traj.states):
        vec[t::dim_clock] += state.amplitudes
    if normalized:
        vec = vec / np.linalg.norm(vec)
    return HistoryState(vec, normalized, dim_sys, dim_clock)


def circuit_prefix_unitaries(c: Circuit) -> list[np.ndarray]:
    """Dense products U_t ... U_1 for t = 0..T (identity first)."""
    n = c.register.n_qubits
    acc = np.eye(2**n, dtype=complex)
    prefixes = [acc]
    for step in c.steps:
        if not isinstance(step, GateStep):
            raise NonUnitaryCircuit("prefix products need a unitary-only circuit")
        u = embed_operator(step.operator(), step.targets, n).toarray()
        acc = u @ acc
        prefixes.append(acc)
    return prefixes


def conjugate_by_w(h: ClockHamiltonian, c: Circuit) -> ClockHamiltonian:
    """Spectrum-preserving change of basis W'HW, W = sum_t U_t...U_1 (x) |t><t|."""
    if any(isinstance(s, MeasureStep) for s in c.steps):
        raise NonUnitaryCircuit("W is defined only for unitary-only circuits")
    if c.n_steps + 1 != h.dim_clock:
        raise ValueError("circuit length does not match the clock dimension")
    w = sp.csc_matrix((h.dim, h.dim), dtype=complex)
    for t, prefix in enumerate(circuit_prefix_unitaries(c)):
        w = w + sp.kron(sp.csc_matrix(prefix), _clock_op(t, t, h.dim_clock))
    w = w.tocsc()
    wh = w.conj().T
    terms = [(label, (wh @ term @ w).tocsc()) for label, term in h.terms]
    return ClockHamiltonian(h.dim_sys, h.dim_clock, terms)


# --------------------------------------------------------------------------
# export


def write_hamiltonian(h: ClockHamiltonian, path: str) -> None:
    """Matrix Market (complex hermitian, 1-based) plus a JSON sidecar."""
    scipy.io.mmwrite(path, h.total.tocoo(), symmetry="hermitian", precision=17)
    with open(str(path) + ".json", "w") as fh:
        fh.write(json.dumps(h.sidecar_dict(), indent=2, sort_keys=True) + "\n")


def load_matrix(path: str) -> sp.csc_matrix:
    """Read a Matrix Market file back as a sparse complex matrix."""
    return sp.csc_matrix(scipy.io.mmread(path)).astype(complex)
