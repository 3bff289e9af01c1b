"""couplex: coupling constructions and local-mixing estimation for diffusions.

The package simulates Ito diffusions with reproducible counter-based random
streams, builds maximal couplings of binned transition laws, estimates
Markov-Dobrushin overlap coefficients, reweights drifts by stochastic
exponentials, and verifies boundary-ratio (Harnack-type) bounds against exact
oracles.  See the README for the command-line interface.
"""

__version__ = "0.1.0"

from .coupling import (
    CouplingEnsemble,
    CouplingResult,
    DiscreteDistribution,
    MaximalCouplingSampler,
    build_maximal_coupling,
    estimate_meeting_probability,
    intersection_couple_1d,
)
from .errors import (
    ConfigError,
    CouplexError,
    ExitBudgetExceeded,
    IncompatibleSupport,
    InvalidKernel,
    NumericalBlowup,
    UnknownModel,
)
from .girsanov import DriftSplitModel, estimate_md_girsanov, make_extra_drift, reweighted_kernel
from .harnack import (
    CylinderCells,
    SphereCells,
    elliptic_harnack_check,
    md_via_elliptic,
    md_via_parabolic_corollary,
    parabolic_harnack_check,
)
from .mixing import BinGrid, MdQuery, MdReport, check_minorization, estimate_md, exact_md_finite_chain
from .oracles import FiniteChain, bm_pair_meeting_probability, gaussian_overlap, poisson_cell_masses
from .rng import path_generator
from .sde import (
    IntegratorConfig,
    Path,
    SdeModel,
    make_model,
    register_model,
    sample_exit_ensemble,
    sample_transition,
    simulate_exit,
    simulate_path,
)
from .tvdist import TvCurve, check_tv_monotonicity, tv_curve_to_stationary, tv_exact

__all__ = [
    "__version__",
    "BinGrid",
    "ConfigError",
    "CouplexError",
    "CouplingEnsemble",
    "CouplingResult",
    "CylinderCells",
    "DiscreteDistribution",
    "DriftSplitModel",
    "ExitBudgetExceeded",
    "FiniteChain",
    "IncompatibleSupport",
    "IntegratorConfig",
    "InvalidKernel",
    "MaximalCouplingSampler",
    "MdQuery",
    "MdReport",
    "NumericalBlowup",
    "Path",
    "SdeModel",
    "SphereCells",
    "TvCurve",
    "UnknownModel",
    "bm_pair_meeting_probability",
    "build_maximal_coupling",
    "check_minorization",
    "check_tv_monotonicity",
    "elliptic_harnack_check",
    "estimate_md",
    "estimate_md_girsanov",
    "estimate_meeting_probability",
    "exact_md_finite_chain",
    "gaussian_overlap",
    "intersection_couple_1d",
    "make_extra_drift",
    "make_model",
    "md_via_elliptic",
    "md_via_parabolic_corollary",
    "parabolic_harnack_check",
    "path_generator",
    "poisson_cell_masses",
    "register_model",
    "reweighted_kernel",
    "sample_exit_ensemble",
    "sample_transition",
    "simulate_exit",
    "simulate_path",
    "tv_curve_to_stationary",
    "tv_exact",
]
