"""Quarter-plane solver for the sixth-order Boussinesq equation

    u_tt - a^2 u_xx + a b u_xxxx - u_xxxxxx + (u^2)_xx = 0,   x > 0, t > 0,

with u, u_xx, u_xxxx prescribed at x = 0, plus numerical probes of the
norm estimates behind its contraction argument.
"""

from .boundary import BoundaryConfig, BoundaryTriple, wbdr_total
from .errors import SobeError
from .grids import CutoffSpec, NormSpec, SpaceTimeGrid, SpectralField
from .propagator import InitialPair, duhamel, free_evolution, traces_at_zero
from .solver import PicardConfig, ProblemData, ScalingParams, SolverConfig, picard_solve, solve_full
from .symbols import PhaseSymbol, characteristic_roots, phase

__all__ = [
    "BoundaryConfig", "BoundaryTriple", "CutoffSpec", "InitialPair", "NormSpec", "PhaseSymbol", "PicardConfig",
    "ProblemData", "ScalingParams", "SobeError", "SolverConfig", "SpaceTimeGrid", "SpectralField",
    "characteristic_roots", "duhamel", "free_evolution", "phase", "picard_solve", "solve_full", "traces_at_zero",
    "wbdr_total",
]
