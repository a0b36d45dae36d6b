"""Approximate compiling of n-qubit unitaries onto CNOT-unit circuits."""

from .circuit import Circuit, Structure, assemble, emit_circuit
from .matrixcore import haar_random, metrics, special_unitarize

__all__ = [
    "Circuit",
    "Structure",
    "assemble",
    "emit_circuit",
    "haar_random",
    "metrics",
    "special_unitarize",
]
__version__ = "0.1.0"
