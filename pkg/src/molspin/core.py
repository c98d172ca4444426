"""Operator algebra on finite spin registers.

Operators are plain complex ``numpy`` arrays. Every spin is represented in
the ``S_z`` eigenbasis ordered by *descending* projection ``m = s, s-1, ..., -s``,
so for a spin 1/2 index 0 is ``|up> = |0>`` and index 1 is ``|down> = |1>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

HERMITIAN_RTOL = 1e-12


class DimensionError(ValueError):
    """Raised when operator and register dimensions disagree."""


def spin_dim(s: float) -> int:
    """Return ``2s+1`` after checking that ``s`` is a positive half-integer."""
    twice = 2 * float(s)
    if twice < 1 or abs(twice - round(twice)) > 1e-9:
        raise ValueError(f"spin quantum number must be a positive half-integer, got {s!r}")
    return int(round(twice)) + 1


@dataclass(frozen=True)
class SpinSite:
    s: float
    kind: str = "electronic"
    label: str = ""

    def __post_init__(self):
        spin_dim(self.s)
        if self.kind not in ("electronic", "nuclear"):
            raise ValueError(f"site kind must be 'electronic' or 'nuclear', got {self.kind!r}")

    @property
    def dim(self) -> int:
        return spin_dim(self.s)

    @property
    def m_values(self) -> np.ndarray:
        return self.s - np.arange(self.dim)


@dataclass(frozen=True)
class SpinRegister:
    """Ordered tensor product of spin sites; site 0 is the leftmost factor."""

    sites: tuple[SpinSite, ...]

    def __init__(self, sites: Iterable[SpinSite | float]):
        built = []
        for k, site in enumerate(sites):
            if not isinstance(site, SpinSite):
                site = SpinSite(float(site), label=f"s{k}")
            elif not site.label:
                site = SpinSite(site.s, site.kind, f"s{k}")
            built.append(site)
        if not built:
            raise ValueError("a register needs at least one site")
        labels = [site.label for site in built]
        if len(set(labels)) != len(labels):
            raise ValueError(f"site labels must be unique, got {labels}")
        object.__setattr__(self, "sites", tuple(built))

    @classmethod
    def of_spins(cls, *spins: float) -> "SpinRegister":
        return cls([SpinSite(float(s), label=f"s{k}") for k, s in enumerate(spins)])

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(site.dim for site in self.sites)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, site: int | str) -> int:
        if isinstance(site, str):
            for k, s in enumerate(self.sites):
                if s.label == site:
                    return k
            raise IndexError(f"no site labelled {site!r}")
        if not 0 <= site < len(self.sites):
            raise IndexError(f"site index {site} out of range for {len(self.sites)} sites")
        return site

    def basis_index(self, m_values: Sequence[float]) -> int:
        """Flat index of the product state ``|m_0, m_1, ...>``."""
        if len(m_values) != len(self.sites):
            raise DimensionError("one projection per site is required")
        idx = 0
        for site, m in zip(self.sites, m_values):
            k = int(round(site.s - m))
            if not 0 <= k < site.dim:
                raise ValueError(f"projection {m} not allowed for spin {site.s}")
            idx = idx * site.dim + k
        return idx

    def product_state(self, m_values: Sequence[float]) -> np.ndarray:
        psi = np.zeros(self.total_dim, dtype=complex)
        psi[self.basis_index(m_values)] = 1.0
        return psi


@lru_cache(maxsize=64)
def _spin_matrices(twice_s: int):
    s = twice_s / 2
    m = s - np.arange(twice_s + 1)
    # <m+1|S+|m> on the superdiagonal in descending-m ordering
    plus = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    minus = plus.conj().T
    sx = (plus + minus) / 2
    sy = (plus - minus) / 2j
    sz = np.diag(m).astype(complex)
    for a in (sx, sy, sz, plus, minus):
        a.setflags(write=False)
    return sx, sy, sz, plus, minus


def spin_operators(s: float) -> dict[str, np.ndarray]:
    """Spin matrices ``Sx, Sy, Sz, Splus, Sminus`` for spin ``s``."""
    dim = spin_dim(s)
    sx, sy, sz, plus, minus = _spin_matrices(dim - 1)
    return {"Sx": sx, "Sy": sy, "Sz": sz, "Splus": plus, "Sminus": minus}


def spin_xyz(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ops = spin_operators(s)
    return ops["Sx"], ops["Sy"], ops["Sz"]


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}
for _p in PAULI.values():
    _p.setflags(write=False)


def kron(*ops: np.ndarray) -> np.ndarray:
    return reduce(np.kron, ops)


def embed(op: np.ndarray, site: int | str, reg: SpinRegister) -> np.ndarray:
    """Place a single-site operator on ``site`` with identities elsewhere."""
    k = reg.index(site)
    op = np.asarray(op)
    if op.shape != (reg.dims[k], reg.dims[k]):
        raise DimensionError(
            f"operator of shape {op.shape} does not act on site {k} of dimension {reg.dims[k]}"
        )
    left = int(np.prod(reg.dims[:k]))
    right = int(np.prod(reg.dims[k + 1:]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def site_spin_ops(reg: SpinRegister, site: int | str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Embedded ``(Sx, Sy, Sz)`` of one register site."""
    k = reg.index(site)
    return tuple(embed(a, k, reg) for a in spin_xyz(reg.sites[k].s))


def dag(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= rtol * scale)


def _require_hermitian(h: np.ndarray, what: str = "generator") -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h):
        raise ValueError(f"{what} must be hermitian")
    return h


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b + b @ a


def expm(a: np.ndarray) -> np.ndarray:
    """General matrix exponential (Pade scaling and squaring)."""
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


def eigendecompose(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns) of a hermitian matrix."""
    h = _require_hermitian(h, "operator")
    return np.linalg.eigh((h + h.conj().T) / 2)


def matexp_unitary(h: np.ndarray, t: float, method: str = "eigh") -> np.ndarray:
    """Propagator ``exp(-2j*pi*h*t)`` for a hermitian ``h`` in GHz and ``t`` in ns.

    ``method='eigh'`` uses the spectral decomposition, ``method='pade'`` the
    general scaling-and-squaring exponential.
    """
    h = _require_hermitian(h, "generator")
    if method == "pade":
        return expm(-2j * math.pi * t * h)
    if method != "eigh":
        raise ValueError(f"unknown method {method!r}")
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-2j * math.pi * t * w)) @ v.conj().T


def rotation(axis: str | Sequence[float], theta: float) -> np.ndarray:
    """Spin-1/2 rotation ``cos(theta/2) I - i sin(theta/2) n.sigma``."""
    if isinstance(axis, str):
        n = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}[axis]
    else:
        n = np.asarray(axis, dtype=float)
        n = n / np.linalg.norm(n)
    ns = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * ns


def ket(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def unitary_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive process fidelity ``|Tr(u^dag v)|^2 / d^2``."""
    d = u.shape[0]
    return float(abs(np.trace(u.conj().T @ v)) ** 2 / d**2)


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Fidelity between two states; each may be a ket or a density matrix (one must be pure)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1 and b.ndim == 1:
        return float(abs(np.vdot(a, b)) ** 2)
    if a.ndim == 1:
        a, b = b, a
    if b.ndim == 1:
        return float(np.real(np.vdot(b, a @ b)))
    raise ValueError("at least one argument must be a pure state vector")
