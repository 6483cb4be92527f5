"""Oscillatory integrals with Hessian-determinant cutoffs.

Submodules:

* :mod:`hessosc.polyphase` -- exact rational polynomial phases
* :mod:`hessosc.newton` -- Newton polygons, edge polynomials, fold checks
* :mod:`hessosc.geomschrod` -- weighted Hessians, the Schroedinger operator and
  stationary-phase coefficients
* :mod:`hessosc.foldcut` -- fold curves of the cutoff and reduced 1-D phases
* :mod:`hessosc.oscquad` -- panelised oscillatory quadrature
* :mod:`hessosc.vdc` -- explicit 1-D oscillatory bounds
* :mod:`hessosc.decayscan` -- decay scans, fits and dyadic box diagnostics
* :mod:`hessosc.cli` -- the ``hessosc`` command
"""

from .bumps import BumpSpec, CutoffSpec
from .oscquad import IntegralValue, QuadratureBudgetError, osc1d, osc2d
from .polyphase import PhaseFormatError, PolyPhase, dump_phase, load_phase

__version__ = "0.1.0"

__all__ = [
    "BumpSpec",
    "CutoffSpec",
    "IntegralValue",
    "PhaseFormatError",
    "PolyPhase",
    "QuadratureBudgetError",
    "dump_phase",
    "load_phase",
    "osc1d",
    "osc2d",
]
