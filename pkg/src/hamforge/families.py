"""Benchmark circuit generators built from the Hadamard gadget.

F1 cascades n gadgets down a line of n+1 qubits (the proof teleports along,
picking up a Hadamard each hop).  F2 bounces the proof between two qubits,
each round applying two gadgets whose Hadamards cancel, recycling the
measured qubit without reset.  All measurements are tame with p = 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .circuit import Circuit, GateStep, MeasureStep, QubitRegister

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class FamilySpec:
    """Family selector: F1 (n gadgets) or F2 (n identity rounds)."""

    family: str
    n: int

    def __post_init__(self):
        if self.family not in ("F1", "F2"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def build(self) -> Circuit:
        return family_f1(self.n) if self.family == "F1" else family_f2(self.n)


def hadamard_gadget() -> Circuit:
    """CZ then X-measurement kept on +: a Hadamard on the unmeasured qubit."""
    reg = QubitRegister(2, ("proof", "plus"))
    steps = (
        GateStep("CZ", (0, 1)),
        MeasureStep("X", 0, "+", HALF),
    )
    return Circuit(reg, steps, name="hadamard_gadget")


def family_f1(n: int) -> Circuit:
    """Chain of n Hadamard gadgets; T = 2n steps on n+1 qubits."""
    if n < 1:
        raise ValueError("n must be >= 1")
    roles = ("proof",) + ("plus",) * n
    steps = []
    for j in range(n):
        steps.append(GateStep("CZ", (j, j + 1)))
        steps.append(MeasureStep("X", j, "+", HALF))
    return Circuit(QubitRegister(n + 1, roles), tuple(steps), name=f"f1(n={n})")


def family_f2(n: int) -> Circuit:
    """n identity rounds on 2 qubits; each round is two gadgets, T = 4n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    steps = []
    for _ in range(n):
        steps.append(GateStep("CZ", (0, 1)))
        steps.append(MeasureStep("X", 0, "+", HALF))
        steps.append(GateStep("CZ", (0, 1)))
        steps.append(MeasureStep("X", 1, "+", HALF))
    return Circuit(QubitRegister(2, ("proof", "plus")), tuple(steps), name=f"f2(n={n})")
