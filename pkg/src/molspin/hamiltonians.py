"""Builders that lower physical spin-Hamiltonian terms to dense operators.

All energies are linear frequencies in GHz; magnetic fields are in tesla.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .core import (
    SpinRegister,
    SpinSite,
    eigendecompose,
    embed,
    kron,
    site_spin_ops,
    spin_operators,
    spin_xyz,
)
from .units import MU_B_GHZ_PER_T, cm1_to_ghz


def _vector3(x, name: str) -> np.ndarray:
    if np.isscalar(x):
        return np.array([0.0, 0.0, float(x)])
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a scalar (along z) or a 3-vector, got shape {v.shape}")
    return v


def g_tensor(g, euler: Sequence[float] | None = None) -> np.ndarray:
    """3x3 g tensor from a scalar, a principal triple or a full matrix.

    ``euler`` holds intrinsic ZYZ angles (radians) rotating the principal frame
    into the laboratory frame.
    """
    g_arr = np.asarray(g, dtype=float)
    if g_arr.ndim == 0:
        tensor = float(g_arr) * np.eye(3)
    elif g_arr.shape == (3,):
        tensor = np.diag(g_arr)
    elif g_arr.shape == (3, 3):
        tensor = g_arr.copy()
    else:
        raise ValueError(f"g must be a scalar, a principal triple or a 3x3 matrix, got shape {g_arr.shape}")
    if euler is not None:
        r = Rotation.from_euler("ZYZ", euler).as_matrix()
        tensor = r @ tensor @ r.T
    return tensor


@dataclass(frozen=True)
class ZeemanTerm:
    site: int | str
    g: object = 2.0
    B: object = 0.0
    euler: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class ExchangeTerm:
    pair: tuple[int, int]
    J_iso: float = 0.0
    J_diag: tuple[float, float, float] | None = None
    D_aniso: object = None
    G_dm: tuple[float, float, float] | None = None


@dataclass(frozen=True)
class ZfsTerm:
    site: int | str
    d: float = 0.0
    e: float = 0.0
    stevens: tuple[tuple[int, int, float], ...] = ()


def build_zeeman(term: ZeemanTerm, reg: SpinRegister) -> np.ndarray:
    k = reg.index(term.site)
    b = _vector3(term.B, "B")
    field_vec = MU_B_GHZ_PER_T * g_tensor(term.g, term.euler) @ b
    s_ops = spin_xyz(reg.sites[k].s)
    local = sum(c * op for c, op in zip(field_vec, s_ops))
    return embed(np.asarray(local, dtype=complex), k, reg)


def build_exchange(term: ExchangeTerm, reg: SpinRegister) -> np.ndarray:
    i, j = (reg.index(p) for p in term.pair)
    if i == j:
        raise ValueError("exchange requires two distinct sites")
    si = site_spin_ops(reg, i)
    sj = site_spin_ops(reg, j)
    h = np.zeros((reg.total_dim,) * 2, dtype=complex)
    if term.J_iso:
        h += term.J_iso * sum(a @ b for a, b in zip(si, sj))
    if term.J_diag is not None:
        for c, a, b in zip(term.J_diag, si, sj):
            if c:
                h += c * (a @ b)
    if term.D_aniso is not None:
        d = np.asarray(term.D_aniso, dtype=float)
        if d.shape != (3, 3):
            raise ValueError("D_aniso must be 3x3")
        for alpha in range(3):
            for beta in range(3):
                if d[alpha, beta]:
                    h += d[alpha, beta] * (si[alpha] @ sj[beta])
    if term.G_dm is not None:
        g = np.asarray(term.G_dm, dtype=float)
        cross = (
            si[1] @ sj[2] - si[2] @ sj[1],
            si[2] @ sj[0] - si[0] @ sj[2],
            si[0] @ sj[1] - si[1] @ sj[0],
        )
        h += sum(c * op for c, op in zip(g, cross))
    return h


def _stevens_k2(s: float, q: int) -> np.ndarray:
    ops = spin_operators(s)
    sz, sp, sm = ops["Sz"], ops["Splus"], ops["Sminus"]
    eye = np.eye(sz.shape[0])
    if q == 0:
        return 3 * sz @ sz - s * (s + 1) * eye
    if q == 1:
        return (sz @ (sp + sm) + (sp + sm) @ sz) / 4
    if q == -1:
        return (sz @ (sp - sm) + (sp - sm) @ sz) / 4j
    if q == 2:
        return (sp @ sp + sm @ sm) / 2
    if q == -2:
        return (sp @ sp - sm @ sm) / 2j
    raise ValueError(f"|q| must not exceed k, got q={q}")


def _stevens_k4(s: float, q: int) -> np.ndarray:
    ops = spin_operators(s)
    sz, sp, sm = ops["Sz"], ops["Splus"], ops["Sminus"]
    x = s * (s + 1)
    eye = np.eye(sz.shape[0])
    if q == 0:
        sz2 = sz @ sz
        return 35 * sz2 @ sz2 - (30 * x - 25) * sz2 + (3 * x * x - 6 * x) * eye
    if q == 4:
        return (np.linalg.matrix_power(sp, 4) + np.linalg.matrix_power(sm, 4)) / 2
    if q == -4:
        return (np.linalg.matrix_power(sp, 4) - np.linalg.matrix_power(sm, 4)) / 2j
    raise NotImplementedError(f"Stevens operator O_4^{q} is not implemented")


# Extension point: register further ranks as ``STEVENS[k] = builder(s, q)``.
STEVENS: dict[int, Callable[[float, int], np.ndarray]] = {2: _stevens_k2, 4: _stevens_k4}


def stevens_operator(k: int, q: int, s: float) -> np.ndarray:
    if k % 2:
        raise ValueError(f"only even-rank Stevens operators are allowed, got k={k}")
    if k > 2 * s:
        raise ValueError(f"rank k={k} exceeds 2s={2 * s}")
    if abs(q) > k:
        raise ValueError(f"|q| must not exceed k, got k={k}, q={q}")
    if k not in STEVENS:
        raise NotImplementedError(f"Stevens operators of rank {k} are not implemented")
    return STEVENS[k](s, q)


def build_zfs(term: ZfsTerm, reg: SpinRegister) -> np.ndarray:
    k = reg.index(term.site)
    s = reg.sites[k].s
    sx, sy, sz = spin_xyz(s)
    local = term.d * (sz @ sz) + term.e * (sx @ sx - sy @ sy)
    for rank, q, b in term.stevens:
        local = local + b * stevens_operator(rank, q, s)
    return embed(np.asarray(local, dtype=complex), k, reg)


_BUILDERS = {ZeemanTerm: build_zeeman, ExchangeTerm: build_exchange, ZfsTerm: build_zfs}


@dataclass
class HamiltonianSpec:
    """Declarative sum of physical terms on a register."""

    register: SpinRegister
    terms: list = field(default_factory=list)

    def build(self) -> np.ndarray:
        if not self.terms:
            raise ValueError("a Hamiltonian needs at least one term")
        h = np.zeros((self.register.total_dim,) * 2, dtype=complex)
        for term in self.terms:
            try:
                builder = _BUILDERS[type(term)]
            except KeyError:
                raise TypeError(f"unsupported term type {type(term).__name__}") from None
            h += builder(term, self.register)
        return h


# ---------------------------------------------------------------- trimer


@dataclass(frozen=True)
class TrimerSpec:
    """Three spins 1/2 in a chain; sites 0 and 2 are qubits, site 1 is the switch.

    ``J1`` couples sites 0-1 and ``J2`` couples sites 1-2, each as (J^x, J^y, J^z) in GHz.
    """

    g1: tuple[float, float, float]
    g2: tuple[float, float, float]
    g3: tuple[float, float, float]
    J1: tuple[float, float, float]
    J2: tuple[float, float, float]
    B: object = 5.0
    eulers: tuple = (None, None, None)

    @classmethod
    def reference(cls, B: float = 5.0) -> "TrimerSpec":
        """Strongly anisotropic switch between two nearly isotropic qubits (couplings from cm^-1)."""
        return cls(
            g1=(1.74, 1.78, 1.78),
            g2=(2.0, 4.25, 6.5),
            g3=(1.74, 1.78, 1.78),
            J1=tuple(cm1_to_ghz(x) for x in (-0.14, 0.34, 0.17)),
            J2=tuple(cm1_to_ghz(x) for x in (-0.07, 0.17, 0.34)),
            B=B,
        )

    def register(self) -> SpinRegister:
        return SpinRegister(
            [SpinSite(0.5, label="q1"), SpinSite(0.5, label="switch"), SpinSite(0.5, label="q2")]
        )

    def field(self) -> np.ndarray:
        return _vector3(self.B, "B")

    def effective_g(self, site: int) -> float:
        """Scalar g along the field direction for one site."""
        b = self.field()
        norm = np.linalg.norm(b)
        if norm == 0:
            return 0.0
        g = g_tensor((self.g1, self.g2, self.g3)[site], self.eulers[site])
        return float(np.linalg.norm(g @ (b / norm)))


def build_trimer(spec: TrimerSpec) -> np.ndarray:
    reg = spec.register()
    terms: list = [
        ZeemanTerm(k, g, spec.B, spec.eulers[k]) for k, g in enumerate((spec.g1, spec.g2, spec.g3))
    ]
    terms += [ExchangeTerm((0, 1), J_diag=tuple(spec.J1)), ExchangeTerm((1, 2), J_diag=tuple(spec.J2))]
    return HamiltonianSpec(reg, terms).build()


def switch_resonance(spec: TrimerSpec, m1: float, m3: float) -> float:
    """Switch excitation frequency (GHz) conditioned on the qubit projections."""
    for m in (m1, m3):
        if m not in (0.5, -0.5):
            raise ValueError("qubit projections must be +1/2 or -1/2")
    gap = spec.effective_g(1) * MU_B_GHZ_PER_T * float(np.linalg.norm(spec.field()))
    return gap + spec.J1[2] * m1 + spec.J2[2] * m3


# ---------------------------------------------------------------- hyperfine qudit


@dataclass(frozen=True)
class HyperfineQuditSpec:
    """Nuclear spin ``I`` coupled to electronic spin ``s``; nuclear Zeeman omitted."""

    A: object
    p: float
    I: float
    s: float = 0.5
    g: object = 2.0
    B: object = 0.0

    def register(self) -> SpinRegister:
        return SpinRegister([SpinSite(self.I, "nuclear", "I"), SpinSite(self.s, "electronic", "s")])


def build_hyperfine_qudit(spec: HyperfineQuditSpec, reg: SpinRegister | None = None) -> np.ndarray:
    reg = spec.register() if reg is None else reg
    kinds = [site.kind for site in reg.sites]
    if sorted(kinds) != ["electronic", "nuclear"]:
        raise ValueError("register must hold exactly one nuclear and one electronic site")
    n = kinds.index("nuclear")
    e = kinds.index("electronic")
    if reg.sites[n].s != spec.I or reg.sites[e].s != spec.s:
        raise ValueError(
            f"register spins ({reg.sites[n].s}, {reg.sites[e].s}) do not match spec ({spec.I}, {spec.s})"
        )
    a = np.asarray(spec.A, dtype=float)
    if a.ndim == 0:
        a = float(a) * np.eye(3)
    elif a.shape == (3,):
        a = np.diag(a)
    elif a.shape != (3, 3):
        raise ValueError("A must be a scalar, a principal triple or 3x3")
    i_ops = site_spin_ops(reg, n)
    s_ops = site_spin_ops(reg, e)
    h = np.zeros((reg.total_dim,) * 2, dtype=complex)
    for alpha in range(3):
        for beta in range(3):
            if a[alpha, beta]:
                h += a[alpha, beta] * (i_ops[alpha] @ s_ops[beta])
    h += spec.p * (i_ops[2] @ i_ops[2])
    h += build_zeeman(ZeemanTerm(e, spec.g, spec.B), reg)
    return h


# ---------------------------------------------------------------- spin-photon


@dataclass(frozen=True)
class PhotonSpin:
    s: float
    g: float = 2.0
    D: float = 0.0


@dataclass(frozen=True)
class SpinPhotonSpec:
    """Spins in a single-mode resonator; the photon mode is the last tensor factor."""

    omega0: float
    spins: tuple[PhotonSpin, ...]
    G: tuple[float, ...]
    n_max: int = 5
    B: float = 0.0

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if len(self.G) != len(self.spins):
            raise ValueError("one coupling G per spin is required")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(round(2 * sp.s)) + 1 for sp in self.spins) + (self.n_max + 1,)


def boson_operators(n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated annihilation operator and number operator on ``n_max+1`` Fock states."""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), k=1).astype(complex)
    return a, np.diag(np.arange(n_max + 1)).astype(complex)


def spin_photon_operators(spec: SpinPhotonSpec) -> dict[str, object]:
    """Embedded operators: ``a``, ``n``, and per-spin ``(Sx, Sy, Sz)``."""
    dims = spec.dims
    a, n = boson_operators(spec.n_max)

    def lift(op, k):
        return kron(*[op if j == k else np.eye(d) for j, d in enumerate(dims)])

    spins = [tuple(lift(o, k) for o in spin_xyz(sp.s)) for k, sp in enumerate(spec.spins)]
    return {"a": lift(a, len(dims) - 1), "n": lift(n, len(dims) - 1), "spins": spins, "dims": dims}


def build_spin_photon(spec: SpinPhotonSpec, omega0: float | None = None) -> np.ndarray:
    """Resonator, Zeeman, axial anisotropy and ``2 G S_x (a + a^dag)`` coupling."""
    ops = spin_photon_operators(spec)
    w = spec.omega0 if omega0 is None else omega0
    h = w * ops["n"]
    a = ops["a"]
    quad = a + a.conj().T
    for sp, g_c, (sx, _, sz) in zip(spec.spins, spec.G, ops["spins"]):
        h = h + MU_B_GHZ_PER_T * sp.g * spec.B * sz + sp.D * (sz @ sz) + 2 * g_c * (sx @ quad)
    return h


# ---------------------------------------------------------------- effective XY coupling


def effective_xy_coupling(J: float, g1: float, g2: float, B: float) -> float:
    """Second-order coupling ``J^2 / (2 |g1-g2| mu_B B)`` in GHz."""
    gap = abs(g1 - g2) * MU_B_GHZ_PER_T * B
    if gap == 0:
        raise ValueError("g1 == g2 (or B == 0): the switch is degenerate and the perturbative coupling diverges")
    if gap < 10 * abs(J):
        warnings.warn(
            f"|g1-g2| mu_B B = {gap:.4g} GHz is not much larger than J = {J:.4g} GHz; "
            "the perturbative coupling is unreliable",
            stacklevel=2,
        )
    return J * J / (2 * gap)


def xy_coupling_exact(J: float, g1: float, g2: float, B: float) -> float:
    """Splitting of the dressed ``|01>, |10>`` pair from exact diagonalization.

    Uses a symmetric trimer (equal outer g, isotropic J on both bonds) restricted
    to the sector with total projection -1/2.
    """
    spec = TrimerSpec((g1,) * 3, (g2,) * 3, (g1,) * 3, (J,) * 3, (J,) * 3, B)
    h = build_trimer(spec)
    reg = spec.register()
    idx = [reg.basis_index(m) for m in ((0.5, -0.5, -0.5), (-0.5, 0.5, -0.5), (-0.5, -0.5, 0.5))]
    block = h[np.ix_(idx, idx)]
    w, v = eigendecompose(block)
    qubit_weight = np.abs(v[0, :]) ** 2 + np.abs(v[2, :]) ** 2
    pair = np.argsort(qubit_weight)[-2:]
    return float(abs(w[pair[0]] - w[pair[1]]))
