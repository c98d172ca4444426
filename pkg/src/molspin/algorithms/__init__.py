"""Algorithm demonstrations: Trotter simulation, qudit Grover search, boson and fermion maps, tunnelling."""

from .grover import GroverSpec, grover_qudit, grover_unitary
from .mappings import RabiModel, jordan_wigner, spin_boson_map
from .trotter import TfimSpec, TrotterPlan, heisenberg_from_uxy, pauli_conjugate, tfim_step_circuit, trotterize
from .tunneling import TunnelingSpec, tunneling_simulation

__all__ = [
    "GroverSpec", "grover_qudit", "grover_unitary", "RabiModel", "jordan_wigner", "spin_boson_map",
    "TfimSpec", "TrotterPlan", "heisenberg_from_uxy", "pauli_conjugate", "tfim_step_circuit", "trotterize",
    "TunnelingSpec", "tunneling_simulation",
]
