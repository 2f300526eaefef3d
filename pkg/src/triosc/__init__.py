"""Quantum excitation exchange between two oscillators via a three-level system.

Numerical toolkit for a spin-1 coupled to two truncated harmonic
oscillators: Hamiltonian construction and engineering of exchange
resonances, time evolution under piecewise-constant controls,
degenerate-perturbation-theory blocks, period-averaged sinusoidal-drive
effective Hamiltonians, GRAPE pulse optimization, and Lie-algebra
controllability tests.  Frequencies are in units of the first oscillator's
frequency; times in its inverse.
"""

from .hilbert import (
    BasisIndex,
    SystemParams,
    TruncationSpec,
    basis_labels,
    basis_state,
    build_coupling_h,
    build_coupling_ops,
    build_h0,
    build_total_h,
    flat_index,
    ladder_operators,
    resonance_params,
    resonant_system,
    spin1_operators,
    superposition_state,
)
from .dynamics import (
    ControlField,
    EigenSystem,
    EnvelopeGrid,
    Trajectory,
    expm_skew,
    fidelity,
    fidelity_eig,
    ipr,
    no_control_envelope,
    propagate,
    spectrum_scan,
)
from .perturbation import (
    DegenerateSubspace,
    EffectiveBlock,
    closed_form_r1,
    closed_form_r2,
    degenerate_subspace,
    generic_pt,
    optimize_r2_angles,
    r1_analytic_angles,
    r1_subspace,
    r2_subspace,
)
from .drive import (
    SinusoidalDrive,
    bessel_j,
    bessel_product_maxima,
    control_propagator,
    effective_couplings_closed,
    fidelity_map_drive,
    magnus_error_estimate,
    numeric_average,
    sample_drive,
    solve_drive_ratio,
    validate_drive_full_model,
)
from .rabi import (
    RabiParams,
    overlap_scan,
    rabi_eigenvalue,
    rabi_eigenvector,
    weak_expansion,
)
from .optimize import (
    GrapeProblem,
    GrapeResult,
    global_minimize,
    grape_fidelity_and_gradient,
    grape_optimize,
    robustness_scan,
    spectral_analysis,
)
from .controllability import is_controllable, lie_closure, lie_rank

__version__ = "0.1.0"
