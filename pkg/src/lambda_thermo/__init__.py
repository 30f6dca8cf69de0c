"""Thermodynamic formalism for the countably branched interval maps F_lambda.

Pressure, conformal and invariant measures, recurrence of the induced
state chain, and Hausdorff dimensions, all in closed form with numerical
oracles alongside.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402,F401
    DomainError,
    InadmissibleWordError,
    NoConformalMeasureError,
    NoInvariantMeasureError,
    NonConvergenceError,
)
from .coremap import *  # noqa: E402,F401,F403
from .spectra import *  # noqa: E402,F401,F403
from .measures import *  # noqa: E402,F401,F403
from .stochastic import *  # noqa: E402,F401,F403
from .dimension import *  # noqa: E402,F401,F403
