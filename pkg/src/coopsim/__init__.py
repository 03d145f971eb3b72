"""coopsim: cooperator/defector lattice dynamics toolkit.

Submodules
----------
mean_field   well-mixed ODE analysis (fixed points, regimes, transition curve)
lattice      continuous-time simulation on finite tori (exact event-driven)
graphical    Poisson mark construction, couplings, duals, sterile marks
percolation  oriented-percolation comparison objects and block estimators
experiments  phase-diagram sweeps, monotonicity checks, critical bracketing
cli          command-line entry point (``coopsim``)
"""

__version__ = "0.1.0"

from .params import Params, equal_rate_benefit

__all__ = ["Params", "equal_rate_benefit", "__version__"]
