"""2D mixed finite element solver for Stokes-Brinkman eigenvalue problems.

Computes natural flow frequencies on domains that mix free-flow and porous
regions, with uniform convergence studies and residual-driven adaptive
mesh refinement.
"""

__version__ = "0.1.0"
