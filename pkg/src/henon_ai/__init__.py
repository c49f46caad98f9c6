"""Hénon orbits continued from anti-integrable symbolic anchors."""

from .continuation import (AnchorSequence, ContinuationResult, SolverOptions, SymbolWord,
                           assemble_jacobian, assemble_residual, build_anchor_fullshift,
                           build_anchor_markov, contraction_continue, neumann_solve,
                           newton_continue, orbit_to_planar)
from .core import (Params, PlanarPoint, RegionFlags, dn_bound, henon_inverse_step,
                   henon_jacobian, henon_step, region_flags)

__version__ = "0.1.0"
