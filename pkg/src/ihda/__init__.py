"""Interpreted Petri nets to interpreted higher-dimensional automata.

Build the IHDA of a net, find concurrency-induced output conflicts with
witness runs, and drive a concurrent-step controller in closed loop.
"""

from .cube import Clause, Cube, PropSet, Valuation, parse_clause, parse_cube
from .hda import HDA, Cell, Computation, pn_to_hda
from .ipn import IPN, Budget, BudgetExceeded, IPNError, load_ipn, parse_ipn
from .translate import IHDA, AnalysisReport, build_ihda, check_invariants, find_inconsistent

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "Budget",
    "BudgetExceeded",
    "Cell",
    "Clause",
    "Computation",
    "Cube",
    "HDA",
    "IHDA",
    "IPN",
    "IPNError",
    "PropSet",
    "Valuation",
    "build_ihda",
    "check_invariants",
    "find_inconsistent",
    "load_ipn",
    "parse_clause",
    "parse_cube",
    "parse_ipn",
    "pn_to_hda",
]
