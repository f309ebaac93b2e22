"""Hybrid oscillator-qubit compiler and truncated-Fock simulator for lattice gauge theories."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
