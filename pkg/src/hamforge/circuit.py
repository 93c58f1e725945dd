"""Circuit data model and the line-oriented circuit description language.

A circuit is an ordered list of unitary gate steps and post-selected
measurement steps acting on a register whose qubits carry a role tag:
``proof`` (free input block), ``zero`` (ancilla fixed to |0>) or ``plus``
(ancilla fixed to |+>).  The text format is::

    qubits <N>
    roles proof:<i..j> zero:<i..j> plus:<i..j>   # ranges inclusive, unlisted qubits default to zero
    output <q>                                   # optional
    step gate <NAME> <q> [<q2>]
    step gate matrix2 <8 reals: re,im pairs row-major> <q>
    step gate matrix4 <32 reals> <q> <q2>
    step measure <X|Z> <q> keep <+|-|0|1> [prob <rational like 1/2>]

'#' starts a comment.  Serialization is bit-stable: rationals are printed
as fractions, floats with 17 significant digits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

ROLES = ("proof", "zero", "plus")
GATE_NAMES = ("H", "X", "Z", "S", "CZ", "CNOT")

_SQ2 = 1.0 / np.sqrt(2.0)
GATE_MATRICES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}

# keep labels allowed per measurement basis
_KEEP_BY_BASIS = {"X": ("+", "-"), "Z": ("0", "1")}

UNITARITY_TOL = 1e-12


class CircuitSyntaxError(ValueError):
    """Parse failure carrying the 1-based line and column of the offence."""

    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col
        self.message = message


@dataclass(frozen=True)
class QubitRegister:
    """Qubit count plus one role tag per qubit."""

    n_qubits: int
    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(self.roles))

    def proof_block(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if self.roles[q] == "proof")

    def ancilla_qubits(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n_qubits) if self.roles[q] != "proof")

    @property
    def proof_size(self) -> int:
        return len(self.proof_block())


@dataclass(frozen=True)
class GateStep:
    """A named gate or an explicit 2x2 / 4x4 unitary on one or two qubits."""

    kind: str
    targets: tuple[int, ...]
    matrix: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=complex)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    def operator(self) -> np.ndarray:
        """The gate's small matrix (2x2 for 1-qubit, 4x4 for 2-qubit)."""
        if self.kind in GATE_MATRICES:
            return GATE_MATRICES[self.kind]
        return self.matrix

    def __eq__(self, other):
        if not isinstance(other, GateStep):
            return NotImplemented
        if self.kind != other.kind or self.targets != other.targets:
            return False
        if (self.matrix is None) != (other.matrix is None):
            return False
        return self.matrix is None or np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class MeasureStep:
    """Projective measurement post-selected on one outcome.

    The projector is |keep><keep| on the target qubit, identity elsewhere.
    ``declared_prob`` is the claimed (tame) outcome probability; when absent
    it has to be measured and certified before Hamiltonian compilation.
    """

    basis: str
    target: int
    keep: str
    declared_prob: Fraction | float | None = None

    def projector(self) -> np.ndarray:
        """The 2x2 rank-one projector |keep><keep| on the target qubit."""
        if self.basis == "Z":
            v = np.array([1.0, 0.0]) if self.keep == "0" else np.array([0.0, 1.0])
        else:
            v = np.array([_SQ2, _SQ2]) if self.keep == "+" else np.array([_SQ2, -_SQ2])
        return np.outer(v, v).astype(complex)


@dataclass(frozen=True)
class Circuit:
    """Register, ordered steps and an optional output qubit."""

    register: QubitRegister
    steps: tuple = ()
    name: str = ""
    output_qubit: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def n_qubits(self) -> int:
        return self.register.n_qubits

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def measure_steps(self) -> list[tuple[int, MeasureStep]]:
        """(step index, step) pairs for the measurement steps, in order."""
        return [(i, s) for i, s in enumerate(self.steps) if isinstance(s, MeasureStep)]

    def __eq__(self, other):
        # structural equality; the name is a display label only
        if not isinstance(other, Circuit):
            return NotImplemented
        return (
            self.register == other.register
            and self.steps == other.steps
            and self.output_qubit == other.output_qubit
        )

    __hash__ = None


@dataclass
class ValidationReport:
    """All invariant violations found in a circuit; empty means valid."""

    issues: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues


def validate(c: Circuit) -> ValidationReport:
    """Check every circuit invariant and report all violations."""
    issues: list[str] = []
    reg = c.register
    n = reg.n_qubits
    if n < 1:
        issues.append("register must hold at least one qubit")
    if len(reg.roles) != n:
        issues.append(f"{len(reg.roles)} roles for {n} qubits")
    for q, role in enumerate(reg.roles):
        if role not in ROLES:
            issues.append(f"unknown role {role!r} on qubit {q}")
    proof = reg.proof_block()
    if proof and proof != tuple(range(proof[0], proof[-1] + 1)):
        issues.append("proof qubits must form one contiguous block")
    if c.output_qubit is not None and not 0 <= c.output_qubit < n:
        issues.append(f"output qubit {c.output_qubit} out of range")
    for i, step in enumerate(c.steps):
        if isinstance(step, GateStep):
            _check_gate(step, i, n, issues)
        elif isinstance(step, MeasureStep):
            _check_measure(step, i, n, issues)
        else:
            issues.append(f"step {i}: unknown step type {type(step).__name__}")
    return ValidationReport(issues)


def _check_gate(step: GateStep, i: int, n: int, issues: list[str]) -> None:
    arity = 2 if step.kind in ("CZ", "CNOT", "matrix4") else 1
    if step.kind not in GATE_NAMES and step.kind not in ("matrix2", "matrix4"):
        issues.append(f"step {i}: unknown gate name {step.kind!r}")
        return
    if len(step.targets) != arity:
        issues.append(f"step {i}: gate {step.kind} expects {arity} target(s)")
        return
    if len(set(step.targets)) != len(step.targets):
        issues.append(f"step {i}: duplicate targets {step.targets}")
    for q in step.targets:
        if not 0 <= q < n:
            issues.append(f"step {i}: qubit {q} out of range")
    if step.kind in ("matrix2", "matrix4"):
        dim = 2 if step.kind == "matrix2" else 4
        if step.matrix is None or step.matrix.shape != (dim, dim):
            issues.append(f"step {i}: {step.kind} needs a {dim}x{dim} matrix")
        else:
            dev = np.max(np.abs(step.matrix.conj().T @ step.matrix - np.eye(dim)))
            if dev > UNITARITY_TOL:
                issues.append(f"non-unitary gate at step {i} (deviation {dev:.2e})")


def _check_measure(step: MeasureStep, i: int, n: int, issues: list[str]) -> None:
    if step.basis not in _KEEP_BY_BASIS:
        issues.append(f"step {i}: unknown measurement basis {step.basis!r}")
        return
    if step.keep not in _KEEP_BY_BASIS[step.basis]:
        issues.append(f"step {i}: keep label {step.keep!r} invalid for basis {step.basis}")
    if not 0 <= step.target < n:
        issues.append(f"step {i}: qubit {step.target} out of range")
    if step.declared_prob is not None:
        p = float(step.declared_prob)
        if not 0.0 < p <= 1.0:
            issues.append(f"step {i}: declared prob {step.declared_prob} outside (0, 1]")


# --------------------------------------------------------------------------
# parsing


def _tokenize(line: str) -> list[tuple[str, int]]:
    """(token, 1-based column) pairs, comment stripped."""
    code = line.split("#", 1)[0]
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", code)]


def _parse_int(tok: str, line_no: int, col: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CircuitSyntaxError(line_no, col, f"expected {what}, got {tok!r}") from None


def _parse_real(tok: str, line_no: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CircuitSyntaxError(line_no, col, f"expected a real number, got {tok!r}") from None


def _parse_role_ranges(toks, line_no, n_qubits):
    roles = ["zero"] * n_qubits
    assigned = [False] * n_qubits
    for tok, col in toks:
        if ":" not in tok:
            raise CircuitSyntaxError(line_no, col, f"role spec {tok!r} must look like tag:i or tag:i..j")
        tag, span = tok.split(":", 1)
        if tag not in ROLES:
            raise CircuitSyntaxError(line_no, col, f"unknown role tag {tag!r}")
        if ".." in span:
            lo_s, hi_s = span.split("..", 1)
            lo = _parse_int(lo_s, line_no, col, "a qubit index")
            hi = _parse_int(hi_s, line_no, col, "a qubit index")
        else:
            lo = hi = _parse_int(span, line_no, col, "a qubit index")
        if lo > hi:
            raise CircuitSyntaxError(line_no, col, f"empty role range {span!r}")
        for q in range(lo, hi + 1):
            if not 0 <= q < n_qubits:
                raise CircuitSyntaxError(line_no, col, f"qubit {q} out of range (have {n_qubits})")
            if assigned[q]:
                raise CircuitSyntaxError(line_no, col, f"qubit {q} assigned a role twice")
            roles[q] = tag
            assigned[q] = True
    return tuple(roles)


def _parse_prob(tok: str, line_no: int, col: int) -> Fraction | float:
    if "/" in tok:
        try:
            p = Fraction(tok)
        except (ValueError, ZeroDivisionError):
            raise CircuitSyntaxError(line_no, col, f"bad rational {tok!r}") from None
    else:
        p = _parse_real(tok, line_no, col)
    if not 0 < p <= 1:
        raise CircuitSyntaxError(line_no, col, f"prob {tok} outside (0, 1]")
    return p


def _parse_gate(toks, line_no, n_qubits):
    name, col = toks[0]
    if name in GATE_NAMES:
        arity = 2 if name in ("CZ", "CNOT") else 1
        if len(toks) != 1 + arity:
            raise CircuitSyntaxError(line_no, col, f"gate {name} takes {arity} qubit argument(s)")
        targets = [_parse_int(t, line_no, c, "a qubit index") for t, c in toks[1:]]
        matrix = None
    elif name in ("matrix2", "matrix4"):
        dim = 2 if name == "matrix2" else 4
        n_reals, arity = 2 * dim * dim, dim.bit_length() - 1
        if len(toks) != 1 + n_reals + arity:
            raise CircuitSyntaxError(
                line_no, col, f"{name} takes {n_reals} reals followed by {arity} qubit index(es)"
            )
        reals = [_parse_real(t, line_no, c) for t, c in toks[1 : 1 + n_reals]]
        matrix = (np.array(reals[0::2]) + 1j * np.array(reals[1::2])).reshape(dim, dim)
        targets = [_parse_int(t, line_no, c, "a qubit index") for t, c in toks[1 + n_reals :]]
    else:
        raise CircuitSyntaxError(line_no, col, f"unknown gate name {name!r}")
    for tok, c in toks[-len(targets) :]:
        q = int(tok)
        if not 0 <= q < n_qubits:
            raise CircuitSyntaxError(line_no, c, f"qubit {q} out of range (have {n_qubits})")
    if len(set(targets)) != len(targets):
        raise CircuitSyntaxError(line_no, col, f"duplicate targets {targets}")
    step = GateStep(name, tuple(targets), matrix)
    if matrix is not None:
        dev = np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0])))
        if dev > UNITARITY_TOL:
            raise CircuitSyntaxError(line_no, col, f"non-unitary matrix (deviation {dev:.2e})")
    return step


def _parse_measure(toks, line_no, n_qubits):
    if len(toks) < 4 or toks[2][0] != "keep":
        raise CircuitSyntaxError(
            line_no, toks[0][1], "measure syntax: measure <X|Z> <q> keep <+|-|0|1> [prob <p>]"
        )
    basis, bcol = toks[0]
    if basis not in _KEEP_BY_BASIS:
        raise CircuitSyntaxError(line_no, bcol, f"measurement basis must be X or Z, got {basis!r}")
    target = _parse_int(toks[1][0], line_no, toks[1][1], "a qubit index")
    if not 0 <= target < n_qubits:
        raise CircuitSyntaxError(line_no, toks[1][1], f"qubit {target} out of range (have {n_qubits})")
    keep, kcol = toks[3]
    if keep not in _KEEP_BY_BASIS[basis]:
        raise CircuitSyntaxError(line_no, kcol, f"keep label {keep!r} invalid for basis {basis}")
    prob = None
    rest = toks[4:]
    if rest:
        if rest[0][0] != "prob" or len(rest) != 2:
            raise CircuitSyntaxError(line_no, rest[0][1], "trailing tokens; expected 'prob <p>'")
        prob = _parse_prob(rest[1][0], line_no, rest[1][1])
    return MeasureStep(basis, target, keep, prob)


def parse_circuit(text: str, name: str = "") -> Circuit:
    """Parse the textual circuit description into a validated Circuit."""
    n_qubits = None
    roles = None
    output_qubit = None
    steps = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("# name:") and not name:
            name = raw.split("# name:", 1)[1].strip()
        toks = _tokenize(raw)
        if not toks:
            continue
        head, col = toks[0]
        if head == "qubits":
            if n_qubits is not None:
                raise CircuitSyntaxError(line_no, col, "qubits declared twice")
            if len(toks) != 2:
                raise CircuitSyntaxError(line_no, col, "qubits takes exactly one count")
            n_qubits = _parse_int(toks[1][0], line_no, toks[1][1], "a qubit count")
            if n_qubits < 1:
                raise CircuitSyntaxError(line_no, toks[1][1], "qubit count must be >= 1")
            continue
        if n_qubits is None:
            raise CircuitSyntaxError(line_no, col, "qubits must be declared before anything else")
        if head == "roles":
            if roles is not None:
                raise CircuitSyntaxError(line_no, col, "roles declared twice")
            roles = _parse_role_ranges(toks[1:], line_no, n_qubits)
        elif head == "output":
            if len(toks) != 2:
                raise CircuitSyntaxError(line_no, col, "output takes exactly one qubit index")
            output_qubit = _parse_int(toks[1][0], line_no, toks[1][1], "a qubit index")
            if not 0 <= output_qubit < n_qubits:
                raise CircuitSyntaxError(line_no, toks[1][1], f"qubit {output_qubit} out of range")
        elif head == "step":
            if len(toks) < 2:
                raise CircuitSyntaxError(line_no, col, "step needs 'gate' or 'measure'")
            kind, kcol = toks[1]
            if kind == "gate":
                if len(toks) < 3:
                    raise CircuitSyntaxError(line_no, kcol, "gate needs a name")
                steps.append(_parse_gate(toks[2:], line_no, n_qubits))
            elif kind == "measure":
                steps.append(_parse_measure(toks[2:], line_no, n_qubits))
            else:
                raise CircuitSyntaxError(line_no, kcol, f"unknown step kind {kind!r}")
        else:
            raise CircuitSyntaxError(line_no, col, f"unknown directive {head!r}")
    if n_qubits is None:
        raise CircuitSyntaxError(1, 1, "missing 'qubits' declaration")
    if roles is None:
        roles = tuple(["zero"] * n_qubits)
    circuit = Circuit(QubitRegister(n_qubits, roles), tuple(steps), name, output_qubit)
    report = validate(circuit)
    if not report.ok:
        raise CircuitSyntaxError(1, 1, "; ".join(report.issues))
    return circuit


# --------------------------------------------------------------------------
# serialization


def _fmt_real(x: float) -> str:
    return "%.17g" % x


def _fmt_prob(p: Fraction | float) -> str:
    if isinstance(p, Fraction):
        return f"{p.numerator}/{p.denominator}"
    return _fmt_real(p)


def _role_tokens(roles: tuple[str, ...]) -> list[str]:
    toks = []
    q = 0
    while q < len(roles):
        tag = roles[q]
        hi = q
        while hi + 1 < len(roles) and roles[hi + 1] == tag:
            hi += 1
        if tag != "zero":
            toks.append(f"{tag}:{q}" if q == hi else f"{tag}:{q}..{hi}")
        q = hi + 1
    return toks


def serialize_circuit(c: Circuit) -> str:
    """Render a Circuit back into the text format; parse round-trips exactly."""
    lines = []
    if c.name:
        lines.append(f"# name: {c.name}")
    lines.append(f"qubits {c.register.n_qubits}")
    role_toks = _role_tokens(c.register.roles)
    if role_toks:
        lines.append("roles " + " ".join(role_toks))
    if c.output_qubit is not None:
        lines.append(f"output {c.output_qubit}")
    for step in c.steps:
        if isinstance(step, GateStep):
            if step.matrix is None:
                lines.append("step gate %s %s" % (step.kind, " ".join(map(str, step.targets))))
            else:
                flat = []
                for z in step.matrix.ravel():
                    flat.append(_fmt_real(z.real))
                    flat.append(_fmt_real(z.imag))
                lines.append(
                    "step gate %s %s %s"
                    % (step.kind, " ".join(flat), " ".join(map(str, step.targets)))
                )
        else:
            tail = "" if step.declared_prob is None else f" prob {_fmt_prob(step.declared_prob)}"
            lines.append(f"step measure {step.basis} {step.target} keep {step.keep}{tail}")
    return "\n".join(lines) + "\n"
