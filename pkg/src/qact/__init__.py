"""Workbench for compact quantum group actions on finite-dimensional
C*-algebras: finite quantum groups, coactions, freeness and Galois checks,
module projectivity witnesses, and inclusion index computations."""

__version__ = "0.1.0"

from .fdlin import FdCStarAlgebra

__all__ = ["FdCStarAlgebra", "__version__"]
