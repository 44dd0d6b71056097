"""Monotone Bellman-form solver and verifier for degenerate complex
Monge-Ampere equations on flat tori and boxes in C^n (n <= 3)."""

from .errors import (
    BoundaryError,
    CmaError,
    DomainTooSmallError,
    InvalidInputError,
    IterationLimitError,
    NoSubsolutionError,
    NonCauchyError,
    ParseError,
    ValidationError,
)
from .grid import Domain, GridFunction, grid_quadratic
from .hermitian import (
    DirectionSet,
    HermitianForm,
    bellman_min_trace,
    det_plus,
    eigen_decompose,
    generate_direction_set,
    hermitian_part,
)
from .operator import (
    DensityField,
    EquationData,
    hamiltonian_F,
    hamiltonian_F_plus,
    ma_root,
    residual_field,
)
from .envelopes import (
    EnvelopeParams,
    balayage,
    contact_set_identity_check,
    inf_convolution,
    psh_projection,
    sup_convolution,
)
from .solvers import (
    Continuation,
    SolverConfig,
    SolverReport,
    continuation_to_zero,
    perron_envelope,
    solve_compact,
    solve_dirichlet,
)
from .verify import (
    Certificate,
    check_subsolution,
    check_supersolution,
    comparison_harness,
    domination_check,
    generate_certified_pair,
    stability_diagnostic,
)

__version__ = "0.1.0"
