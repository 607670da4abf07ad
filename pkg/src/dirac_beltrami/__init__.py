"""Spectral solver for the Dirac-Beltrami equation D- F = M D+ F on periodic grids."""
from .divform import DivFormCoefficient, cayley, inverse_cayley, lift, reference_solve
from .exterior import Multivector, PolyMultivector, contract, make_monogenic, wedge
from .grid import GridSpec, MultivectorField, SubdomainSpec, read_mvf, write_mvf
from .montel import SolutionFamily, extract_subsequence, generate_family
from .solver import CoefficientField, SolveReport, caccioppoli_check, residual, solve

__version__ = "0.1.0"

__all__ = [
    "CoefficientField", "DivFormCoefficient", "GridSpec", "Multivector", "MultivectorField",
    "PolyMultivector", "SolutionFamily", "SolveReport", "SubdomainSpec", "caccioppoli_check",
    "cayley", "contract", "extract_subsequence", "generate_family", "inverse_cayley", "lift",
    "make_monogenic", "read_mvf", "reference_solve", "residual", "solve", "wedge", "write_mvf",
]
