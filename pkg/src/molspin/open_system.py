"""Density-matrix dynamics: Lindblad integration, Kraus channels, partial trace,
measurement, bath-induced pure-dephasing rates and the Hahn echo.

Relaxation follows the qubit convention of this package: ``|1> = |down>`` is
the ground state, so T -> 0 relaxation drives population into index 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .core import (
    PAULI,
    SpinRegister,
    eigendecompose,
    embed,
    is_hermitian,
    rotation,
    site_spin_ops,
    spin_xyz,
)
from .units import DIPOLAR_GHZ_A3

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------- density matrices


def validate_density(rho: np.ndarray, tol: float = 1e-10, pos_tol: float = 1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix must be hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise ValueError(f"density matrix must have unit trace, got {np.trace(rho).real:.3g}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -pos_tol:
        raise ValueError("density matrix must be positive semidefinite")
    return rho


def pure_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


# ---------------------------------------------------------------- Lindblad


@dataclass(frozen=True)
class LindbladTerm:
    x: np.ndarray
    rate: float

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"Lindblad rates must be non-negative, got {self.rate}")


def lindblad_rhs(H: np.ndarray, terms: Sequence[LindbladTerm], rho: np.ndarray) -> np.ndarray:
    """``-2 pi i [H, rho] + sum gamma (2 x rho x^dag - x^dag x rho - rho x^dag x)``."""
    out = -1j * TWO_PI * (H @ rho - rho @ H)
    for term in terms:
        x = term.x
        xd = x.conj().T
        xdx = xd @ x
        out = out + term.rate * (2 * x @ rho @ xd - xdx @ rho - rho @ xdx)
    return out


def liouvillian(H: np.ndarray, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """Superoperator acting on row-major ``rho.reshape(-1)``."""
    d = H.shape[0]
    eye = np.eye(d)
    L = -1j * TWO_PI * (np.kron(H, eye) - np.kron(eye, H.T))
    for term in terms:
        x = term.x
        xdx = x.conj().T @ x
        L = L + term.rate * (2 * np.kron(x, x.conj()) - np.kron(xdx, eye) - np.kron(eye, xdx.T))
    return L


def lindblad_exact(H: np.ndarray, terms: Sequence[LindbladTerm], rho0: np.ndarray, t: float) -> np.ndarray:
    """Reference solution through the exponential of the Liouvillian."""
    d = rho0.shape[0]
    vec = scipy.linalg.expm(liouvillian(np.asarray(H, dtype=complex), terms) * t) @ np.asarray(rho0, complex).reshape(-1)
    return vec.reshape(d, d)


def _rk4(H, terms, rho, h):
    k1 = lindblad_rhs(H, terms, rho)
    k2 = lindblad_rhs(H, terms, rho + h / 2 * k1)
    k3 = lindblad_rhs(H, terms, rho + h / 2 * k2)
    k4 = lindblad_rhs(H, terms, rho + h * k3)
    return rho + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lindblad_evolve(H: np.ndarray, terms: Sequence[LindbladTerm], rho0: np.ndarray, t: float,
                    dt: float | None = None, *, rtol: float = 1e-8, times: Sequence[float] | None = None):
    """Fixed-step RK4 integration of the master equation.

    The step is halved until one step and two half steps agree to ``rtol``
    (relative to ``|rho|``). If ``times`` is given, states at those times are
    returned as a stacked array instead of only the final state.
    """
    H = np.asarray(H, dtype=complex)
    if not is_hermitian(H):
        raise ValueError("Hamiltonian must be hermitian")
    rho = validate_density(rho0, tol=1e-8, pos_tol=1e-7)
    for term in terms:
        if term.x.shape != H.shape:
            raise ValueError("jump operator dimension does not match the Hamiltonian")
    scale = float(np.linalg.norm(H, 2)) * TWO_PI + sum(2 * term.rate * float(np.linalg.norm(term.x, 2)) ** 2 for term in terms)
    if dt is None:
        dt = 0.1 / max(scale, 1e-12)
    dt = min(dt, t) if t > 0 else dt
    while dt > 0 and t > 0:
        one = _rk4(H, terms, rho, dt)
        two = _rk4(H, terms, _rk4(H, terms, rho, dt / 2), dt / 2)
        if np.max(np.abs(one - two)) <= rtol * max(np.max(np.abs(rho)), 1e-300):
            break
        dt /= 2
    checkpoints = sorted(times) if times is not None else [t]
    out = []
    t_now = 0.0
    for t_target in checkpoints:
        span = t_target - t_now
        if span < -1e-12:
            raise ValueError("times must be non-negative and increasing")
        if span > 0:
            n = max(1, int(math.ceil(span / dt - 1e-9)))
            h = span / n
            for _ in range(n):
                rho = _rk4(H, terms, rho, h)
            rho = (rho + rho.conj().T) / 2
            t_now = t_target
        out.append(rho.copy())
    return np.array(out) if times is not None else out[-1]


# ---------------------------------------------------------------- Kraus channels


@dataclass(frozen=True)
class KrausChannel:
    ops: tuple

    def __init__(self, ops: Iterable[np.ndarray], tol: float = 1e-10):
        ops = tuple(np.asarray(e, dtype=complex) for e in ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        total = sum(e.conj().T @ e for e in ops)
        if np.max(np.abs(total - np.eye(total.shape[0]))) > tol:
            raise ValueError("Kraus operators are not complete: sum E^dag E != I")
        object.__setattr__(self, "ops", ops)

    def compose(self, other: "KrausChannel") -> "KrausChannel":
        """Channel applying ``self`` then ``other``."""
        return KrausChannel([b @ a for a in self.ops for b in other.ops])


def kraus_apply(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return sum(e @ rho @ e.conj().T for e in ch.ops)


def dephasing_channel(t: float, T2: float) -> KrausChannel:
    p = math.exp(-t / T2)
    return KrausChannel([math.sqrt((1 + p) / 2) * np.eye(2), math.sqrt((1 - p) / 2) * PAULI["z"]])


def relaxation_channel(t: float, T1: float) -> KrausChannel:
    """T -> 0 amplitude damping into the ground state ``|1>``."""
    q = math.exp(-t / T1)
    e0 = np.array([[math.sqrt(q), 0], [0, 1]], dtype=complex)
    e1 = np.array([[0, 0], [math.sqrt(1 - q), 0]], dtype=complex)
    return KrausChannel([e0, e1])


@dataclass(frozen=True)
class NoiseModel:
    """T1 relaxation and pure dephasing (time T2) on each listed site, plus custom terms."""

    T1: float | None = None
    T2: float | None = None
    custom: tuple = ()

    def __post_init__(self):
        if self.T1 is not None and self.T1 <= 0 or self.T2 is not None and self.T2 <= 0:
            raise ValueError("T1 and T2 must be positive")
        if self.T1 is not None and self.T2 is not None and self.T2 > 2 * self.T1:
            warnings.warn("T2 exceeds 2 T1", stacklevel=2)

    def terms(self, reg: SpinRegister, sites: Sequence[int | str] | None = None) -> list[LindbladTerm]:
        sites = range(len(reg)) if sites is None else sites
        out = list(self.custom)
        for site in sites:
            sx, sy, sz = site_spin_ops(reg, site)
            if self.T2 is not None:
                out.append(LindbladTerm(sz, 1 / self.T2))
            if self.T1 is not None:
                out.append(LindbladTerm((sx - 1j * sy), 1 / (2 * self.T1)))
        return out


# ---------------------------------------------------------------- partial trace and toy model


def _dims(reg_or_dims) -> tuple[int, ...]:
    if isinstance(reg_or_dims, SpinRegister):
        return reg_or_dims.dims
    return tuple(int(d) for d in reg_or_dims)


def partial_trace(rho: np.ndarray, reg, keep: Iterable[int]) -> np.ndarray:
    dims = _dims(reg)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("at least one subsystem must be kept")
    if any(not 0 <= k < len(dims) for k in keep):
        raise IndexError("kept subsystem out of range")
    n = len(dims)
    t = np.asarray(rho, dtype=complex).reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    for offset, k in enumerate(traced):
        axis = k - offset
        t = np.trace(t, axis1=axis, axis2=axis + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep]))
    return t.reshape(d, d)


def toy_model_state(alpha: complex, beta: complex, p: float) -> np.ndarray:
    """Qubit entangled with an environment qubit by a rotation conditioned on ``|1>``."""
    _check_toy(alpha, beta, p)
    env0 = np.array([1, 0], dtype=complex)
    env1 = np.array([math.sqrt(1 - p), math.sqrt(p)], dtype=complex)
    return alpha * np.kron([1, 0], env0) + beta * np.kron([0, 1], env1)


def _check_toy(alpha, beta, p):
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-10:
        raise ValueError("|alpha|^2 + |beta|^2 must equal 1")
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")


def dephasing_toy_model(alpha: complex, beta: complex, p: float) -> np.ndarray:
    _check_toy(alpha, beta, p)
    c = alpha * np.conj(beta) * math.sqrt(1 - p)
    return np.array([[abs(alpha) ** 2, c], [np.conj(c), abs(beta) ** 2]], dtype=complex)


# ---------------------------------------------------------------- measurement


def _site_projectors(reg: SpinRegister, site) -> list[np.ndarray]:
    k = reg.index(site)
    d = reg.dims[k]
    return [embed(np.diag(np.eye(d)[j]).astype(complex), k, reg) for j in range(d)]


def measure_z(rho: np.ndarray, reg: SpinRegister, site, outcome: int | None = None, tol: float = 1e-14):
    """Projective measurement of ``S_z`` of one site (outcome ``j`` is projection ``s - j``).

    Without ``outcome`` returns ``(probabilities, post_states)``, post states
    being ``None`` for zero-probability branches. With ``outcome`` returns
    ``(probability, post_state)`` and rejects impossible outcomes.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    projs = _site_projectors(reg, site)
    probs = np.array([max(float(np.real(np.trace(P @ rho))), 0.0) for P in projs])
    if outcome is not None:
        if not 0 <= outcome < len(projs):
            raise IndexError("outcome out of range")
        if probs[outcome] <= tol:
            raise ValueError(f"outcome {outcome} has zero probability")
        P = projs[outcome]
        return probs[outcome], P @ rho @ P / probs[outcome]
    posts = [P @ rho @ P / pr if pr > tol else None for P, pr in zip(projs, probs)]
    return probs, posts


def measurement_channel(rho: np.ndarray, reg: SpinRegister, site) -> np.ndarray:
    """Non-selective measurement: the probability-weighted mixture of branches."""
    return sum(P @ rho @ P for P in _site_projectors(reg, site))


_PRE_ROTATION = {"x": ("y", -math.pi / 2), "y": ("x", math.pi / 2)}


def expectation_pauli(rho: np.ndarray, reg: SpinRegister, site, axis: str) -> float:
    """``<sigma_axis>`` of a spin-1/2 site from z-probabilities after a pre-rotation."""
    k = reg.index(site)
    if reg.dims[k] != 2:
        raise ValueError("Pauli expectations need a spin-1/2 site")
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if axis in _PRE_ROTATION:
        ax, ang = _PRE_ROTATION[axis]
        u = embed(rotation(ax, ang), k, reg)
        rho = u @ rho @ u.conj().T
    elif axis != "z":
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    probs, _ = measure_z(rho, reg, k)
    return float(probs[0] - probs[1])


# ---------------------------------------------------------------- bath-induced dephasing


def dipolar_tensor(r: Sequence[float], g_k: float, g_N: float) -> np.ndarray:
    """Point-dipole coupling tensor (GHz) between an electronic and a nuclear spin ``r`` (Angstrom) apart."""
    r = np.asarray(r, dtype=float)
    dist = float(np.linalg.norm(r))
    if dist == 0:
        raise ValueError("zero distance between dipoles")
    return g_k * g_N * DIPOLAR_GHZ_A3 * (3 * np.outer(r, r) / dist**2 - np.eye(3)) / dist**3


@dataclass(frozen=True)
class BathCoupling:
    """Bath correlation coefficients ``C_jj'`` (1/ns) for the central spins."""

    C: np.ndarray
    nuclear_positions: tuple = ()
    g_central: tuple = ()
    gN: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.C, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("C must be a square matrix")
        if np.max(np.abs(c - c.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(c), initial=0.0)):
            raise ValueError("C must be symmetric")
        object.__setattr__(self, "C", c)

    @classmethod
    def from_geometry(cls, spin_positions, nuclear_positions, g_central, gN: float, c0: float) -> "BathCoupling":
        """``C_jj' = c0 sum_n D_jn^zz D_j'n^zz`` from point dipoles."""
        spins = np.asarray(spin_positions, dtype=float)
        nuclei = np.asarray(nuclear_positions, dtype=float)
        g = np.broadcast_to(np.asarray(g_central, dtype=float), (len(spins),))
        dzz = np.array([[dipolar_tensor(n - s, gk, gN)[2, 2] for n in nuclei] for s, gk in zip(spins, g)])
        return cls(c0 * dzz @ dzz.T, tuple(map(tuple, nuclei)), tuple(g), gN)


def _sz_expectations(eigvecs: np.ndarray, reg: SpinRegister) -> np.ndarray:
    """``Z[k, j] = <k|s_zj|k>`` for every eigenvector column ``k``."""
    cols = []
    for j in range(len(reg)):
        sz = np.real(np.diag(site_spin_ops(reg, j)[2]))
        cols.append(np.einsum("ik,i->k", np.abs(eigvecs) ** 2, sz))
    return np.array(cols).T


def bath_rate(eigvecs: np.ndarray, mu: int, nu: int, bath: BathCoupling, reg: SpinRegister) -> float:
    if bath.C.shape[0] != len(reg):
        raise ValueError("C must have one row per register site")
    z = _sz_expectations(eigvecs[:, [mu, nu]], reg)
    diff = z[0] - z[1]
    return float(diff @ bath.C @ diff)


def bath_rate_matrix(eigvecs: np.ndarray, bath: BathCoupling, reg: SpinRegister, levels: int | None = None) -> np.ndarray:
    """``gamma_mu,nu`` for the lowest ``levels`` eigenvectors."""
    n = eigvecs.shape[1] if levels is None else levels
    z = _sz_expectations(eigvecs[:, :n], reg)
    cz = z @ bath.C
    diag = np.einsum("kj,kj->k", cz, z)
    g = diag[:, None] + diag[None, :] - 2 * cz @ z.T
    np.fill_diagonal(g, 0.0)
    return g


@dataclass
class ClusterRates:
    kind: str
    energies: np.ndarray
    rates: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.rates.max())


CLUSTER_BONDS = [(0, k) for k in range(1, 7)] + [(1, 2), (2, 3), (1, 3), (4, 5), (5, 6), (4, 6)]


def double_tetrahedron_geometry(a: float = 3.0) -> np.ndarray:
    """Seven sites (Angstrom): a centre shared by two corner-linked tetrahedra."""
    ang = 2 * np.pi / 3 * np.arange(3)
    top = np.stack([a * np.cos(ang), a * np.sin(ang), np.full(3, 0.8 * a)], axis=1)
    bot = np.stack([a * np.cos(ang + np.pi / 3), a * np.sin(ang + np.pi / 3), np.full(3, -0.8 * a)], axis=1)
    return np.vstack([[0.0, 0.0, 0.0], top, bot])


def random_nuclear_bath(n: int = 40, r_min: float = 5.0, r_max: float = 8.0, seed: int = 1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    return u / np.linalg.norm(u, axis=1)[:, None] * rng.uniform(r_min, r_max, (n, 1))


def cluster_bath_rates(kind: str, bath: BathCoupling, *, B: float = 0.001, levels: int = 8,
                       s: float = 0.5, distortion: float = 0.03) -> ClusterRates:
    """``gamma_mu,nu`` among the lowest levels of a seven-spin double tetrahedron.

    ``ferro``: all exchange ``-1 GHz``. ``competing``: antiferromagnetic centre
    bonds ``1 GHz`` and triangle bonds ``0.8 GHz``. A small bond-dependent
    distortion lifts accidental degeneracies so eigenvectors are well defined.
    """
    from .hamiltonians import ExchangeTerm, HamiltonianSpec, ZeemanTerm

    couplings = {"ferro": (-1.0, -1.0), "competing": (1.0, 0.8)}
    if kind not in couplings:
        raise ValueError(f"kind must be one of {sorted(couplings)}")
    jc, jt = couplings[kind]
    reg = SpinRegister([s] * 7)
    terms = [ExchangeTerm(b, J_iso=(jc if b[0] == 0 else jt) * (1 + distortion * i)) for i, b in enumerate(CLUSTER_BONDS)]
    terms += [ZeemanTerm(k, 2.0, B) for k in range(7)]
    w, v = eigendecompose(HamiltonianSpec(reg, terms).build())
    return ClusterRates(kind, w[:levels] - w[0], bath_rate_matrix(v, bath, reg, levels))


# ---------------------------------------------------------------- Hahn echo


def hahn_echo_schedule(transition, tau: float, hw=None):
    """pi/2 about x, wait ``tau``, pi about x, wait ``tau`` (free times between pulse edges)."""
    from .pulses import HardwareCalibration, PulseSchedule, rotation_pulse

    if not tau > 0:
        raise ValueError("tau must be positive")
    hw = hw or HardwareCalibration()
    p1 = rotation_pulse(0.0, math.pi / 2, transition, hw)
    p2 = rotation_pulse(0.0, math.pi, transition, hw, p1.end + tau)
    return PulseSchedule([p1, p2], total_time=p2.end + tau, metadata={"sequence": "hahn_echo", "tau": tau})


def _gaussian_nodes(sigma: float, n: int):
    x, w = np.polynomial.hermite_e.hermegauss(n)
    return sigma * x, w / w.sum()


def _transverse(rho: np.ndarray) -> complex:
    return 2 * rho[1, 0]


def ensemble_echo(tau: float, sigma_f: float = 0.0, T2: float | None = None, *, n_quad: int = 201,
                  echo: bool = True) -> float:
    """Ensemble-averaged transverse signal at ``2 tau`` (echo) or ``tau`` (free decay).

    Spins carry static Gaussian detunings of width ``sigma_f`` (GHz); pulses are
    ideal and instantaneous; optional pure dephasing with time ``T2``.
    """
    nodes, weights = _gaussian_nodes(sigma_f, n_quad) if sigma_f > 0 else (np.zeros(1), np.ones(1))
    sx, sy, sz = spin_xyz(0.5)
    terms = [LindbladTerm(sz, 1 / T2)] if T2 else []
    half = rotation("x", math.pi / 2)
    flip = rotation("x", math.pi)
    rho0 = half @ np.diag([1, 0]).astype(complex) @ half.conj().T
    total = 0j
    for delta, w in zip(nodes, weights):
        H = delta * sz
        rho = lindblad_exact(H, terms, rho0, tau)
        if echo:
            rho = flip @ rho @ flip.conj().T
            rho = lindblad_exact(H, terms, rho, tau)
        total += w * _transverse(rho)
    return float(abs(total))
