"""CDCL SAT solving with online prediction of the solver's own search cost."""

__version__ = "0.1.0"
