"""flab: a numerical lab for B-scheme discretizations of the 1D Fokker-Planck
equation, viewed as birth-death continuous-time Markov chains.

The package turns functional inequalities for the window chain (curvature
bounds, Lyapunov drift, local and global Poincare inequalities) into
machine-checked certificates, cross-checked against sharp spectral gaps,
deterministic time evolution, and exact jump simulation.
"""

from .bfun import BFunction, make_b_function, validate_b
from .certificates import (
    CurvatureCertificate,
    LyapunovCertificate,
    PoincareCertificate,
    assemble_global,
    best_certificate,
    curvature_estimate,
    curvature_poincare,
    local_poincare_constant,
    lyapunov_certificate,
    lyapunov_poincare,
    perturbation_transfer,
)
from .config import ConfigError, ExperimentConfig, auto_radius, parse_config, parse_config_text
from .dynamics import (
    EvolutionResult,
    default_dt,
    dissipation_check,
    evolve_backward,
    evolve_forward,
    fit_decay_rate,
    h1_decay_check,
    write_timeseries_csv,
)
from .gamma import (
    OperatorStencil,
    apply_forward,
    apply_generator,
    dirichlet_identity_check,
    gamma,
    gamma2_closed,
    gamma2_definitional,
    interior_slice,
    quotient_defect,
    quotient_defect_quadrature,
)
from .lattice import (
    Lattice,
    Potential,
    RateField,
    StationaryMeasure,
    build_rates,
    check_detailed_balance,
    make_potential,
    mean_var,
    measure_from_rates,
    potential_report,
    stationary_measure,
    summability_report,
)
from .spectral import (
    GapResult,
    SymmetricTridiagonal,
    rayleigh_quotient,
    spectral_gap,
    symmetrization_report,
    symmetrize,
)
from .stochastic import TrajectoryEnsemble, empirical_law, ensemble_summary, simulate, tv_distance

__version__ = "0.1.0"

__all__ = [
    "BFunction",
    "ConfigError",
    "CurvatureCertificate",
    "EvolutionResult",
    "ExperimentConfig",
    "GapResult",
    "Lattice",
    "LyapunovCertificate",
    "OperatorStencil",
    "PoincareCertificate",
    "Potential",
    "RateField",
    "StationaryMeasure",
    "SymmetricTridiagonal",
    "TrajectoryEnsemble",
    "apply_forward",
    "apply_generator",
    "assemble_global",
    "auto_radius",
    "best_certificate",
    "build_rates",
    "check_detailed_balance",
    "curvature_estimate",
    "curvature_poincare",
    "default_dt",
    "dirichlet_identity_check",
    "dissipation_check",
    "empirical_law",
    "ensemble_summary",
    "evolve_backward",
    "evolve_forward",
    "fit_decay_rate",
    "gamma",
    "gamma2_closed",
    "gamma2_definitional",
    "h1_decay_check",
    "interior_slice",
    "local_poincare_constant",
    "lyapunov_certificate",
    "lyapunov_poincare",
    "make_b_function",
    "make_potential",
    "mean_var",
    "measure_from_rates",
    "parse_config",
    "parse_config_text",
    "perturbation_transfer",
    "potential_report",
    "quotient_defect",
    "quotient_defect_quadrature",
    "rayleigh_quotient",
    "simulate",
    "spectral_gap",
    "stationary_measure",
    "summability_report",
    "symmetrization_report",
    "symmetrize",
    "tv_distance",
    "validate_b",
    "write_timeseries_csv",
]
