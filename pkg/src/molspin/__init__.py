"""Pulse-level simulator of molecular spin qubits and qudits."""

__version__ = "0.1.0"
