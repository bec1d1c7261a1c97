"""Galerkin reduction and bifurcation analysis for scalar delay models of ENSO.

The package approximates scalar delay differential equations by finite ODE
systems built on a Koornwinder polynomial basis, reduces those systems onto
the plane spanned by the two least-stable eigenmodes, and uses the reduced
vector field for bifurcation analysis and for interpreting stochastic
simulations with a slowly drifting delay.
"""

__version__ = "0.1.0"

from .errors import (
    GkensoError,
    NumericError,
    BlowupError,
    BracketError,
    ResonanceError,
    ConditioningError,
    NoOrbitError,
    NoPeriodicityError,
    ConfigError,
)
