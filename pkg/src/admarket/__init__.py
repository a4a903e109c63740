"""Numerical toolkit for optimal data-sharing and targeted-ad mechanisms.

Core objects: regular type distributions and their weighted virtual
transforms, ironed scoring rules, a finite-dataset mechanism engine,
closed-form solvers for the exclusive/inclusive setting, the continuum
ironing-level system, the large-market three-market design, and numerical
incentive/feasibility verification oracles.
"""

from .distributions import (
    BUYER,
    SELLER,
    IrregularDistributionError,
    OutOfRangeError,
    TypeDistribution,
    WelfareWeight,
    inverse_weighted,
    inverse_weighted_clamped,
    weighted_virtual,
)
from .scoring import ScoringRule, band_probabilities, ironing_bracket
from .finite import (
    FiniteDataset,
    FiniteMechanism,
    MechanismOutcome,
    TieBreakRule,
    rn_baseline,
)
from .stylized import (
    BundlingExample,
    ClassicBenchmarks,
    EPSolution,
    ExclusiveInclusiveData,
    bundling_example,
    classic_benchmarks,
    solve_ep,
    to_finite_mechanism,
)
from .continuum import (
    CTRLaw,
    ContinuumDataset,
    IroningSolution,
    SolverError,
    optz_residual,
    rn_continuum_baseline,
    solve_optz,
    solve_symmetric,
)
from .largemarket import (
    LargeMarketConfig,
    ThreeMarketDesign,
    are,
    design,
    finite_n_diagnostics,
    profits,
)
from .verify import (
    VerificationReport,
    brute_force_value,
    check_envelope,
    check_ic,
    check_ir,
    check_monotonicity,
    check_saddle,
    full_report,
)

__version__ = "0.1.0"
