"""Pure dephasing of a two-level system under nonstationary classical noise.

Closed-form decoherence function, rate and shift for Ornstein-Uhlenbeck and
random telegraph noise coupled linearly or quadratically, plus three
independent numerical routes (marginal-average PDE/ODE, Monte Carlo,
alternative dynamical equations) that cross-check them.
"""
from .analytic import ClosedFormResult, closed_form, steady_values
from .errors import DomainError, NumericalError
from .montecarlo import EnsembleSpec, McTrace, estimate_F, estimate_marginals_rtn
from .noise import Coupling, NoisePath, OuParams, RtnParams
from .reduced import (
    RateTrace,
    TwoLevelState,
    evolve_coherence,
    extract_rates,
    propagate_master_equation,
    tcl2_solve_ou_linear,
    volterra_solve_rtn_linear,
)
from .runner import DecoherenceTrace, RunConfig, compare, run_solver
from .sle import GridSpec, solve_ou_marginal, solve_rtn_marginal

__version__ = "0.1.0"

__all__ = [
    "ClosedFormResult",
    "Coupling",
    "DecoherenceTrace",
    "DomainError",
    "EnsembleSpec",
    "GridSpec",
    "McTrace",
    "NoisePath",
    "NumericalError",
    "OuParams",
    "RateTrace",
    "RtnParams",
    "RunConfig",
    "TwoLevelState",
    "closed_form",
    "compare",
    "estimate_F",
    "estimate_marginals_rtn",
    "evolve_coherence",
    "extract_rates",
    "propagate_master_equation",
    "run_solver",
    "solve_ou_marginal",
    "solve_rtn_marginal",
    "steady_values",
    "tcl2_solve_ou_linear",
    "volterra_solve_rtn_linear",
]
