"""Clock Hamiltonians for post-selected quantum circuits.

Compile circuits with renormalised projective measurements into
Feynman-Kitaev style clock Hamiltonians, verify history-state kernel
membership and tame post-selection, and reproduce the gap-scaling
experiments for the two Hadamard-gadget circuit families.
"""

from .circuit import (
    Circuit,
    CircuitSyntaxError,
    GateStep,
    MeasureStep,
    QubitRegister,
    ValidationReport,
    parse_circuit,
    serialize_circuit,
    validate,
)
from .families import FamilySpec, family_f1, family_f2, hadamard_gadget
from .fitting import (
    FitResult,
    ModelChoice,
    ScalingSeries,
    compare_models,
    fit_exponential,
    fit_quadratic,
)
from .hamiltonian import (
    ClockHamiltonian,
    HistoryState,
    NonUnitaryCircuit,
    TamenessRequired,
    compile_circuit,
    conjugate_by_w,
    embed_operator,
    history_state,
    input_term,
    load_matrix,
    output_term,
    postselection_term,
    unitary_term,
    write_hamiltonian,
)
from .simulate import (
    KrausOperator,
    MixedRolesError,
    StateVector,
    TamenessReport,
    Trajectory,
    ZeroProbabilityOutcome,
    apply_step,
    check_tame,
    haar_random_state,
    kraus_operator,
    run,
)
from .spectral import (
    AmbiguousKernelEdge,
    DimensionTooLarge,
    NoConvergence,
    SpectralReport,
    dense_eigenvalues,
    eigen_spectrum,
    lanczos_lowest,
    smallest_nonzero,
    verify_kernel,
)

__version__ = "0.1.0"
