"""Suzuki-Trotter digital simulation, two-spin gate decompositions and the transverse-field Ising model.

Time evolution follows the package convention ``U = exp(-2 pi i H t)`` with
``H`` in GHz and ``t`` in ns; the rotation angle produced by a term ``c s`` in
time ``t`` is ``2 pi c t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..core import SpinRegister, kron, matexp_unitary, rotation, site_spin_ops
from ..givens import givens_decompose, givens_unitary
from ..pulses import cphi_matrix, uxy_gate


@dataclass
class TrotterPlan:
    terms: list
    t: float
    n: int = 1
    order: int = 1

    def __post_init__(self):
        self.terms = [np.asarray(h, dtype=complex) for h in self.terms]
        if self.n < 1:
            raise ValueError("the step count n must be at least 1")
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not self.terms:
            raise ValueError("at least one term is required")
        shapes = {h.shape for h in self.terms}
        if len(shapes) != 1:
            raise ValueError(f"terms have mismatched shapes {sorted(shapes)}")

    @property
    def hamiltonian(self) -> np.ndarray:
        return sum(self.terms)


def trotter_step(terms: Sequence[np.ndarray], dt: float, order: int = 1) -> np.ndarray:
    """One slice: ``prod_i exp(-2 pi i H_i dt)`` (first term acts first), or its symmetric version."""
    d = terms[0].shape[0]
    u = np.eye(d, dtype=complex)
    if order == 1:
        for h in terms:
            u = matexp_unitary(h, dt) @ u
        return u
    for h in terms[:-1]:
        u = matexp_unitary(h, dt / 2) @ u
    u = matexp_unitary(terms[-1], dt) @ u
    for h in reversed(terms[:-1]):
        u = matexp_unitary(h, dt / 2) @ u
    return u


def trotterize(plan: TrotterPlan) -> np.ndarray:
    return np.linalg.matrix_power(trotter_step(plan.terms, plan.t / plan.n, plan.order), plan.n)


def exact_propagator(plan: TrotterPlan) -> np.ndarray:
    return matexp_unitary(plan.hamiltonian, plan.t)


def trotter_error(plan: TrotterPlan) -> float:
    """Spectral-norm distance between the product formula and the exact propagator."""
    return float(np.linalg.norm(trotterize(plan) - exact_propagator(plan), 2))


def slice_error(terms: Sequence[np.ndarray], dt: float, order: int = 1) -> float:
    """Spectral-norm error of a single slice of length ``dt``."""
    exact = matexp_unitary(sum(terms), dt)
    return float(np.linalg.norm(trotter_step(terms, dt, order) - exact, 2))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------- gate lists


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple
    params: tuple = ()
    matrix: np.ndarray = field(default=None, compare=False, repr=False)


def circuit_unitary(gates: Sequence[Gate], n_qubits: int = 2) -> np.ndarray:
    """Product of the gate list in time order (first gate acts first)."""
    u = np.eye(2**n_qubits, dtype=complex)
    for g in gates:
        if len(g.qubits) == n_qubits:
            full = g.matrix
        elif len(g.qubits) == 1:
            full = kron(*[g.matrix if k == g.qubits[0] else np.eye(2) for k in range(n_qubits)])
        else:
            raise ValueError("two-qubit gates must act on the whole two-qubit register")
        u = full @ u
    return u


def rx(q: int, theta: float) -> Gate:
    return Gate("Rx", (q,), (theta,), rotation("x", theta))


def ry(q: int, theta: float) -> Gate:
    return Gate("Ry", (q,), (theta,), rotation("y", theta))


def rz(q: int, theta: float) -> Gate:
    return Gate("Rz", (q,), (theta,), rotation("z", theta))


def cphase(phi: float) -> Gate:
    return Gate("cphi", (0, 1), (phi,), cphi_matrix(phi))


def two_spin_ops() -> tuple:
    reg = SpinRegister([0.5, 0.5])
    return site_spin_ops(reg, 0), site_spin_ops(reg, 1)


@dataclass(frozen=True)
class TfimSpec:
    b: float = 1.0
    J: float = 1.0
    n_spins: int = 2

    def __post_init__(self):
        if self.n_spins < 2:
            raise ValueError("n_spins must be at least 2")

    def terms(self) -> tuple[np.ndarray, np.ndarray]:
        """``H1 = b sum s_x``, ``H2 = J sum s_z s_z`` (open chain beyond two spins)."""
        reg = SpinRegister([0.5] * self.n_spins)
        ops = [site_spin_ops(reg, k) for k in range(self.n_spins)]
        h1 = self.b * sum(o[0] for o in ops)
        h2 = self.J * sum(ops[k][2] @ ops[k + 1][2] for k in range(self.n_spins - 1))
        return h1, h2


def zz_gates(theta: float) -> list[Gate]:
    """``exp(-i theta s_z1 s_z2)`` as two z-rotations and a controlled phase (up to ``exp(i theta/4)``)."""
    return [rz(0, theta / 2), rz(1, theta / 2), cphase(theta)]


def tfim_step_circuit(spec: TfimSpec, tau: float) -> list[Gate]:
    """``U2(tau) U1(tau)`` for the two-spin model; ``U1`` acts first."""
    if spec.n_spins != 2:
        raise ValueError("the gate decomposition covers the two-spin model")
    a = 2 * math.pi * spec.b * tau
    return [rx(0, a), rx(1, a)] + zz_gates(2 * math.pi * spec.J * tau)


def tfim_step_phase(spec: TfimSpec, tau: float) -> complex:
    """Global phase relating the gate list to ``exp(-2 pi i H2 tau) exp(-2 pi i H1 tau)``."""
    return np.exp(1j * 2 * math.pi * spec.J * tau / 4)


def tfim_trace(spec: TfimSpec, times: Sequence[float], n: int | None = 10, order: int = 1,
               observable: str = "sz1") -> np.ndarray:
    """``<sigma_z>`` of the first spin from ``|up...up>``; ``n=None`` gives the exact propagator."""
    h1, h2 = spec.terms()
    d = h1.shape[0]
    reg = SpinRegister([0.5] * spec.n_spins)
    if observable == "sz1":
        obs = 2 * site_spin_ops(reg, 0)[2]
    elif observable == "mz":
        obs = 2 * sum(site_spin_ops(reg, k)[2] for k in range(spec.n_spins)) / spec.n_spins
    else:
        raise ValueError(f"unknown observable {observable!r}")
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1
    out = []
    for t in times:
        if t == 0:
            u = np.eye(d)
        elif n is None:
            u = matexp_unitary(h1 + h2, t)
        else:
            u = trotterize(TrotterPlan([h1, h2], t, n, order))
        psi = u @ psi0
        out.append(float(np.real(np.vdot(psi, obs @ psi))))
    return np.array(out)


def tfim_qudit_step(spec: TfimSpec, tau: float):
    """One first-order slice mapped onto four adjacent qudit levels as ``Delta m = +-1`` rotations."""
    h1, h2 = spec.terms()
    u = trotter_step([h1, h2], tau)
    rots, phases = givens_decompose(u)
    return rots, phases, givens_unitary(rots, phases, 4)


# ---------------------------------------------------------------- Pauli conjugation and Heisenberg


def pauli_conjugate(axes: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    """``(W, W^dag)`` with ``exp(-i s_a1 s_b2 phi) = W^dag exp(-i s_z1 s_z2 phi) W``."""
    wraps = {"x": rotation("y", -math.pi / 2), "y": rotation("x", math.pi / 2), "z": np.eye(2, dtype=complex)}
    try:
        w = np.kron(wraps[axes[0]], wraps[axes[1]])
    except KeyError as exc:
        raise ValueError(f"axes must be in x, y, z; got {axes!r}") from exc
    return w, w.conj().T


def coupling_exponential(axes: tuple[str, str], phi: float) -> np.ndarray:
    """Direct ``exp(-i s_a1 s_b2 phi)`` (angle convention, no 2 pi)."""
    a, b = two_spin_ops()
    idx = {"x": 0, "y": 1, "z": 2}
    h = a[idx[axes[0]]] @ b[idx[axes[1]]]
    return matexp_unitary(h, phi / (2 * math.pi))


def heisenberg_from_uxy(Gamma: float, theta: float) -> list[Gate]:
    """``exp(-i theta s1.s2)`` from one ``U_XY`` gate plus single-qubit z-rotations and a controlled phase.

    ``U_XY`` mixes with ``+i sin``; conjugating with ``R_z(pi)`` on one qubit flips the
    sign so the ``xx + yy`` part needs mixing angle ``theta/2``, i.e. ``tau = theta / (2 pi Gamma)``
    (taken modulo the ``U_XY`` period ``2/Gamma``). The ``zz`` part commutes and is appended.
    Result equals the target up to the global phase ``exp(i theta/4)``.
    """
    if Gamma <= 0:
        raise ValueError("Gamma must be positive")
    tau = ((theta / 2) % (2 * math.pi)) / (math.pi * Gamma)
    gates = [rz(0, math.pi), Gate("UXY", (0, 1), (Gamma, tau), uxy_gate(Gamma, tau)), rz(0, -math.pi)]
    return gates + zz_gates(theta)


def heisenberg_exact(theta: float) -> np.ndarray:
    a, b = two_spin_ops()
    h = sum(a[k] @ b[k] for k in range(3))
    return matexp_unitary(h, theta / (2 * math.pi))


__all__ = [
    "TrotterPlan", "trotter_step", "trotterize", "exact_propagator", "trotter_error", "slice_error",
    "loglog_slope", "Gate", "circuit_unitary", "TfimSpec", "tfim_step_circuit", "tfim_step_phase",
    "tfim_trace", "tfim_qudit_step", "pauli_conjugate", "coupling_exponential", "heisenberg_from_uxy",
    "heisenberg_exact", "zz_gates",
]
