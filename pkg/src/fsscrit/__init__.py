"""Finite-size scaling toolkit for critical couplings of Schrödinger Hamiltonians."""

__version__ = "0.1.0"
