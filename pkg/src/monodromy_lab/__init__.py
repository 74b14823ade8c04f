"""Numerical laboratory for symplectic normal forms, escape-function
positivity, model monodromy contraction and spectral gaps, Hermite
quasimode ladders, and a warped-product geodesic example."""

from .symplectic import (
    ClassificationAmbiguousError,
    DeformationSchedule,
    QuadraticHamiltonian,
    SmoothRamp,
    SpectralClassification,
    SymplecticError,
    SymplecticMatrix,
    UnsupportedSpectrumError,
    build_quadratic_hamiltonian,
    classify_spectrum,
    composite_deformation,
    nonresonance_check,
    polar_decompose,
    random_symplectic,
    reparametrize_flow,
    standard_form,
    symplectic_defect,
    symplectic_log,
)
from .escape import (
    EscapeFunction,
    EscapeNormalForm,
    PositivityReport,
    diagonal_normal_form,
    eval_escape,
    hamiltonian_action,
    verify_positivity,
)
from .weyl import (
    GridError,
    PhaseGrid,
    WeylOperator,
    microlocal_cutoff,
    min_eigenvalue,
    op_exponential,
    quantize,
)
from .monodromy import (
    ModelParams,
    MonodromyResult,
    build_elliptic_monodromy,
    build_hyperbolic_monodromy,
    conjugated_contraction,
    contraction_sweep,
    elliptic_propagator,
    rescale_state,
)
from .quasimode import (
    HermiteMode,
    QuasimodeLadder,
    borel_resum,
    exact_model_ladder,
    hermite_mode,
    perturbed_ladder,
    residual_certify,
)
from .geodesic import (
    PoincareReport,
    WarpedMetric,
    christoffel,
    effective_potential,
    geodesic_rhs,
    hessian_signature,
    integrate,
    poincare_linearization,
)

__version__ = "0.1.0"
