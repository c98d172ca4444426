"""Boson-to-qudit and fermion-to-spin mappings, with the Rabi-model check of the boson map."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import PAULI_Z, kron, matexp_unitary, spin_operators
from ..hamiltonians import boson_operators


@dataclass(frozen=True)
class BosonMap:
    """Images of ``a^dag``, ``a`` and ``n`` on the ``2S+1`` levels (vacuum at ``m = -S``).

    Qudit index ``k`` (descending ``m``) holds occupation ``n = 2S - k``; the
    returned matrices are expressed in occupation order ``n = 0..2S`` so they
    compare directly with truncated boson operators.
    """

    S: float
    a_dag: np.ndarray
    a: np.ndarray
    n: np.ndarray
    exact: bool


def spin_boson_map(S: float, exact: bool = True) -> BosonMap:
    """``a^dag -> S_+``; ``exact`` rescales by ``(2S - n)^(-1/2)`` so matrix elements equal ``sqrt(n + 1)``."""
    if S < 0.5:
        raise ValueError("S must be at least 1/2")
    ops = spin_operators(S)
    d = ops["Sz"].shape[0]
    flip = np.eye(d)[::-1]
    sp = flip @ ops["Splus"] @ flip
    n = np.diag(np.arange(d)).astype(complex)
    if exact:
        scale = np.diag([1 / math.sqrt(2 * S - k) if k < d - 1 else 0.0 for k in range(d)])
        sp = sp @ scale
    return BosonMap(S, sp, sp.conj().T, n, exact)


def raw_ladder_element(S: float, n: int) -> float:
    """``<n+1|S_+|n>`` with ``n = m + S``: ``sqrt(S(S+1) - m(m+1))``."""
    m = n - S
    return math.sqrt(S * (S + 1) - m * (m + 1))


@dataclass(frozen=True)
class RabiModel:
    """``omega a^dag a + (delta/2) sigma_z + g sigma_x (a + a^dag)`` in GHz."""

    omega: float = 1.0
    delta: float = 1.0
    g: float = 0.1

    def hamiltonian(self, a: np.ndarray) -> np.ndarray:
        d = a.shape[0]
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        return (self.omega * kron(np.eye(2), a.conj().T @ a) + self.delta / 2 * kron(PAULI_Z, np.eye(d))
                + self.g * kron(x, a + a.conj().T))


def _sigma_z_trace(h: np.ndarray, d: int, occupation: int, times: Sequence[float]) -> np.ndarray:
    psi0 = np.zeros(2 * d, dtype=complex)
    psi0[occupation] = 1  # spin up, n = occupation
    w, v = np.linalg.eigh(h)
    c = v.conj().T @ psi0
    sz = kron(PAULI_Z, np.eye(d))
    out = []
    for t in times:
        psi = v @ (np.exp(-2j * math.pi * w * t) * c)
        out.append(float(np.real(np.vdot(psi, sz @ psi))))
    return np.array(out)


def rabi_boson_trace(model: RabiModel, n_max: int, times: Sequence[float], occupation: int = 0) -> np.ndarray:
    """``<sigma_z>(t)`` with the boson truncated at ``n_max`` (the oracle)."""
    a, _ = boson_operators(n_max)
    return _sigma_z_trace(model.hamiltonian(a), n_max + 1, occupation, times)


def rabi_qudit_trace(model: RabiModel, S: float, times: Sequence[float], occupation: int = 0,
                     exact: bool = True, trotter_steps: int | None = None) -> np.ndarray:
    """``<sigma_z>(t)`` with the mode encoded in a spin-``S`` qudit.

    ``trotter_steps`` splits the free and coupling parts into symmetric
    slices per time point; ``None`` exponentiates the mapped Hamiltonian.
    """
    bmap = spin_boson_map(S, exact)
    d = bmap.a.shape[0]
    if not 0 <= occupation < d:
        raise ValueError("occupation must lie below 2S + 1")
    h = model.hamiltonian(bmap.a)
    if trotter_steps is None:
        return _sigma_z_trace(h, d, occupation, times)
    h_c = model.g * kron(np.array([[0, 1], [1, 0]], dtype=complex), bmap.a + bmap.a_dag)
    h_f = h - h_c
    psi0 = np.zeros(2 * d, dtype=complex)
    psi0[occupation] = 1
    sz = kron(PAULI_Z, np.eye(d))
    out = []
    for t in times:
        dt = t / trotter_steps
        step = matexp_unitary(h_f, dt / 2) @ matexp_unitary(h_c, dt) @ matexp_unitary(h_f, dt / 2)
        psi = np.linalg.matrix_power(step, trotter_steps) @ psi0
        out.append(float(np.real(np.vdot(psi, sz @ psi))))
    return np.array(out)


def jordan_wigner(j: int, n_modes: int) -> tuple[np.ndarray, np.ndarray]:
    """``(c_j, c_j^dag)`` with ``c_j^dag = prod_{k<j} (-sigma_z^k) sigma_+^j``."""
    if not 0 <= j < n_modes:
        raise ValueError(f"mode index {j} out of range for {n_modes} modes")
    sp = np.array([[0, 1], [0, 0]], dtype=complex)
    ops = [-PAULI_Z] * j + [sp] + [np.eye(2, dtype=complex)] * (n_modes - j - 1)
    c_dag = kron(*ops)
    return c_dag.conj().T, c_dag


__all__ = ["BosonMap", "spin_boson_map", "raw_ladder_element", "RabiModel", "rabi_boson_trace",
           "rabi_qudit_trace", "jordan_wigner"]
