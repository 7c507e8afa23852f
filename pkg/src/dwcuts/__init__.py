"""Branch-and-cut-and-price for block-structured binary programs with linking variables."""

from .bnp import CUTS, NO_CUTS, solve
from .colgen import ColGenParams
from .model import Constraint, Decomposition, MipProblem, Variable, derive_block_membership, load_decomposed

__all__ = ["CUTS", "NO_CUTS", "ColGenParams", "Constraint", "Decomposition", "MipProblem", "Variable",
           "derive_block_membership", "load_decomposed", "solve"]
__version__ = "0.1.0"
