"""spinforge: spin-Hamiltonian toolkit for NV-coupled defect spins.

Builds spin models for an NV center coupled to electron-nuclear defects,
determines the magnetic field from echo-modulation spectra, estimates
hyperfine tensors and dipolar geometry from orientation sweeps, and
simulates the entangling control protocol on density matrices.
"""

from .constants import (
    DIPOLAR_CONSTANT_KHZ_NM3,
    GAMMA_E_MHZ_PER_G,
    GAMMA_N15_MHZ_PER_G,
    NV_AXIS_THETA_DEG,
    ZFS_NV_MHZ,
)
from .dipolar import (
    DipolarObservation,
    ProbabilityMap,
    TimeSeries,
    dipolar_analytic,
    dipolar_hamiltonian,
    extract_coupling,
    fit_geometry,
    probability_map,
    secular_dipolar_numeric,
)
from .errors import (
    AmbiguityError,
    ConvergenceError,
    DegeneracyError,
    SpinforgeError,
)
from .fields import (
    EseemFrequencies,
    FieldCandidate,
    FieldSolution,
    Spectrum,
    admissible_field_curve,
    amplitude_spectrum,
    eseem_envelope,
    eseem_frequencies,
    nv_resonance_frequency,
    simulate_eseem,
    solve_field,
)
from .fitting import FitResult, weighted_least_squares
from .hyperfine import (
    HyperfineObservation,
    ModelComparison,
    compare_models,
    fit_hyperfine,
    hyperfine_axial,
    hyperfine_full,
    secular_strength_numeric,
)
from .model import (
    DipolarGeometry,
    FieldVector,
    HermitianOperator,
    HyperfineTensor,
    NvSpec,
    SpinSpecies,
    SpinSystemSpec,
    XDefectSpec,
    eigensystem,
    nv_hamiltonian,
    x_defect_hamiltonian,
)
from .pulses import (
    CoherenceReport,
    Delay,
    DensityState,
    ErrorModel,
    LorentzianLine,
    PhaseCycleResult,
    Polarize,
    Pulse,
    PulseSequence,
    SinusoidComponents,
    SwapHH,
    apply_gate,
    cnot_elements,
    coherence_and_fidelity,
    entangling_elements,
    fit_lorentzians,
    fit_sinusoids,
    ghz_state,
    hartmann_hahn_swap,
    inverted_elements,
    polarization_elements,
    polarize_nv,
    qubit_couplings,
    run_phase_cycle,
    sedor_spectrum,
    storage_elements,
)

__version__ = "0.1.0"

__all__ = [
    "AmbiguityError",
    "CoherenceReport",
    "ConvergenceError",
    "DIPOLAR_CONSTANT_KHZ_NM3",
    "DegeneracyError",
    "Delay",
    "DensityState",
    "DipolarGeometry",
    "DipolarObservation",
    "ErrorModel",
    "EseemFrequencies",
    "FieldCandidate",
    "FieldSolution",
    "FieldVector",
    "FitResult",
    "GAMMA_E_MHZ_PER_G",
    "GAMMA_N15_MHZ_PER_G",
    "HermitianOperator",
    "HyperfineObservation",
    "HyperfineTensor",
    "LorentzianLine",
    "ModelComparison",
    "NV_AXIS_THETA_DEG",
    "NvSpec",
    "PhaseCycleResult",
    "Polarize",
    "ProbabilityMap",
    "Pulse",
    "PulseSequence",
    "SinusoidComponents",
    "Spectrum",
    "SpinSpecies",
    "SpinSystemSpec",
    "SpinforgeError",
    "SwapHH",
    "TimeSeries",
    "XDefectSpec",
    "ZFS_NV_MHZ",
    "admissible_field_curve",
    "amplitude_spectrum",
    "apply_gate",
    "cnot_elements",
    "coherence_and_fidelity",
    "compare_models",
    "dipolar_analytic",
    "dipolar_hamiltonian",
    "eigensystem",
    "entangling_elements",
    "eseem_envelope",
    "eseem_frequencies",
    "extract_coupling",
    "fit_geometry",
    "fit_hyperfine",
    "fit_lorentzians",
    "fit_sinusoids",
    "ghz_state",
    "hartmann_hahn_swap",
    "hyperfine_axial",
    "hyperfine_full",
    "inverted_elements",
    "nv_hamiltonian",
    "nv_resonance_frequency",
    "polarization_elements",
    "polarize_nv",
    "probability_map",
    "qubit_couplings",
    "run_phase_cycle",
    "secular_dipolar_numeric",
    "secular_strength_numeric",
    "sedor_spectrum",
    "simulate_eseem",
    "solve_field",
    "storage_elements",
    "weighted_least_squares",
    "x_defect_hamiltonian",
]
