"""Finite-size laboratory for twisted spin Hamiltonians and quasi-adiabatic flows."""
__version__ = "0.1.0"
