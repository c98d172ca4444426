"""Quantum error correction: three-qubit bit-flip code, nuclear-qudit amplitude-shift
code with an electronic ancilla, spin-3/2 dephasing code, Knill-Laflamme checks
and a dephasing memory experiment.

Qudit codes live on a nuclear spin ``I`` hyperfine-coupled to an electronic
spin 1/2 (the ancilla). States are written in *label coordinates*: the
eigenbasis of the static Hamiltonian, ordered like the product basis
``|m_I, m_s>`` whose state dominates each eigenvector. Error operators and
dephasing act on these labels; readout of the ancilla projects onto labelled
eigenstates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import nnls

from .core import PAULI_X, SpinRegister, eigendecompose, kron, matexp_unitary, spin_xyz
from .givens import GivensRotation, givens_decompose
from .hamiltonians import HyperfineQuditSpec, build_hyperfine_qudit
from .open_system import LindbladTerm, liouvillian
from .pulses import (
    CompilationError,
    PulseSchedule,
    PulseSegment,
    _pair_operators,
    check_selectivity,
    simulate_schedule,
)
from .units import MU_B_GHZ_PER_T

RNG_DEFAULT_SEED = 0


@dataclass
class SyndromeRecord:
    outcomes: tuple
    inferred_error: str
    recovery: str
    probability: float = 1.0


# ---------------------------------------------------------------- code specification


@dataclass
class CodeSpec:
    name: str
    code_words: tuple
    error_ops: dict
    recovery: dict = field(default_factory=dict)

    def __post_init__(self):
        c0, c1 = (np.asarray(c, dtype=complex) for c in self.code_words)
        if abs(np.vdot(c0, c1)) > 1e-10:
            raise ValueError("code words must be orthogonal")
        self.code_words = (c0 / np.linalg.norm(c0), c1 / np.linalg.norm(c1))

    @property
    def dim(self) -> int:
        return self.code_words[0].size

    @cached_property
    def P_L(self) -> np.ndarray:
        return sum(np.outer(c, c.conj()) for c in self.code_words)

    @cached_property
    def error_words(self) -> np.ndarray:
        """Orthonormal basis (columns) of the error images orthogonal to the code space."""
        vecs = []
        for name, e in self.error_ops.items():
            for c in self.code_words:
                v = e @ c
                v = v - self.P_L @ v
                if np.linalg.norm(v) > 1e-10:
                    vecs.append(v)
        if not vecs:
            return np.zeros((self.dim, 0), dtype=complex)
        u, s, _ = np.linalg.svd(np.array(vecs).T, full_matrices=False)
        return u[:, s > 1e-10]

    @cached_property
    def P_e(self) -> np.ndarray:
        w = self.error_words
        return w @ w.conj().T

    def logical(self, alpha: complex, beta: complex) -> np.ndarray:
        _check_amplitudes(alpha, beta)
        return alpha * self.code_words[0] + beta * self.code_words[1]


@dataclass
class KLReport:
    passed: bool
    max_residual: float
    entries: list


def knill_laflamme_check(code: CodeSpec, tol: float = 1e-10) -> KLReport:
    """``<0_L|E_k^dag E_j|0_L> = <1_L|E_k^dag E_j|1_L>`` and ``<0_L|E_k^dag E_j|1_L> = 0`` for all pairs."""
    c0, c1 = code.code_words
    entries = []
    worst = 0.0
    names = list(code.error_ops)
    for a in names:
        for b in names:
            m = code.error_ops[a].conj().T @ code.error_ops[b]
            diag = abs(np.vdot(c0, m @ c0) - np.vdot(c1, m @ c1))
            off = max(abs(np.vdot(c0, m @ c1)), abs(np.vdot(c1, m @ c0)))
            entries.append((a, b, float(diag), float(off)))
            worst = max(worst, diag, off)
    return KLReport(worst < tol, float(worst), entries)


def _check_amplitudes(alpha, beta):
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-10:
        raise ValueError("|alpha|^2 + |beta|^2 must equal 1")


def logical_weights(state: np.ndarray, code: CodeSpec) -> np.ndarray:
    """Normalized ``(|<0_L|psi>|^2, |<1_L|psi>|^2)``, tracing out any other factor."""
    state = np.asarray(state, dtype=complex)
    w = np.array([abs(np.vdot(c, state)) ** 2 for c in code.code_words])
    return w / w.sum()


# ---------------------------------------------------------------- three-qubit bit-flip code


def _cnot(control: int, target: int, n: int) -> np.ndarray:
    dim = 2**n
    u = np.zeros((dim, dim))
    for k in range(dim):
        bits = [(k >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        u[int("".join(map(str, bits)), 2), k] = 1
    return u.astype(complex)


def _on_qubit(op: np.ndarray, q: int, n: int) -> np.ndarray:
    return kron(*[op if k == q else np.eye(2) for k in range(n)])


def three_qubit_encode(alpha: complex, beta: complex) -> np.ndarray:
    """``alpha|000> + beta|111>`` via two controlled-NOTs from the first qubit."""
    _check_amplitudes(alpha, beta)
    psi = np.kron([alpha, beta], np.kron([1, 0], [1, 0])).astype(complex)
    return _cnot(0, 2, 3) @ _cnot(0, 1, 3) @ psi


def three_qubit_code() -> CodeSpec:
    e = np.eye(8, dtype=complex)
    errors = {"I": np.eye(8, dtype=complex)}
    errors.update({f"X{q + 1}": _on_qubit(PAULI_X, q, 3) for q in range(3)})
    return CodeSpec("three-qubit", (e[0], e[7]), errors,
                    {(1, 1): "I", (-1, -1): "X1", (-1, 1): "X2", (1, -1): "X3"})


SYNDROME_TABLE = {(1, 1): None, (-1, -1): 0, (-1, 1): 1, (1, -1): 2}


def three_qubit_correct(state: np.ndarray, rng: np.random.Generator | None = None):
    """Measure ``Z1Z2`` and ``Z1Z3`` through two ancillas, then flip the flagged qubit."""
    rng = rng if rng is not None else np.random.default_rng(RNG_DEFAULT_SEED)
    state = np.asarray(state, dtype=complex)
    n = 5
    psi = np.kron(state, np.array([1, 0, 0, 0], dtype=complex))
    for c, t in ((0, 3), (1, 3), (0, 4), (2, 4)):
        psi = _cnot(c, t, n) @ psi
    t = psi.reshape(8, 2, 2)
    probs = np.sum(np.abs(t) ** 2, axis=0).reshape(-1)
    k = int(rng.choice(4, p=probs / probs.sum())) if np.max(probs) < 1 - 1e-12 else int(np.argmax(probs))
    a1, a2 = divmod(k, 2)
    data = t[:, a1, a2]
    prob = float(probs[k])
    data = data / np.linalg.norm(data)
    syndrome = ((-1) ** a1, (-1) ** a2)
    flip = SYNDROME_TABLE[syndrome]
    if flip is not None:
        data = _on_qubit(PAULI_X, flip, 3) @ data
    name = "none" if flip is None else f"X{flip + 1}"
    return SyndromeRecord(syndrome, name, "I" if flip is None else name, prob), data


# ---------------------------------------------------------------- labelled qudit hardware


@dataclass(frozen=True)
class QuditHardware:
    """Nuclear qudit with electronic ancilla and drive calibrations (Rabi frequencies in GHz)."""

    spec: HyperfineQuditSpec
    nuclear_rabi: float = 0.005
    ancilla_rabi: float = 0.02

    @classmethod
    def default(cls, I: float) -> "QuditHardware":
        return cls(HyperfineQuditSpec(A=(0.1, 0.1, 0.9), p=0.05, I=I, s=0.5, g=2.0, B=0.3))


class LabelledLevels:
    """Eigenstates of a hyperfine qudit labelled by dominant ``(m_I, m_s)``."""

    def __init__(self, hw: QuditHardware):
        self.hw = hw
        spec = hw.spec
        if spec.s != 0.5:
            raise ValueError("the ancilla must be a spin 1/2")
        self.reg: SpinRegister = spec.register()
        self.nI = self.reg.dims[0]
        self.dim = self.reg.total_dim
        h = build_hyperfine_qudit(spec, self.reg)
        w, v = eigendecompose(h)
        order = np.argmax(np.abs(v) ** 2, axis=0)
        if len(set(order.tolist())) != self.dim:
            raise CompilationError("hyperfine eigenstates cannot be labelled by product states")
        self.energies = np.empty(self.dim)
        self.vectors = np.empty_like(v)
        self.energies[order] = w
        self.vectors[:, order] = v
        self.mI = spec.I - np.arange(self.nI)

    def idx(self, mI: float, up: bool) -> int:
        k = int(round(self.hw.spec.I - mI))
        if not 0 <= k < self.nI:
            raise ValueError(f"m_I = {mI} out of range")
        return 2 * k + (0 if up else 1)

    def state(self, amps: dict, up: bool = False) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        for m, a in amps.items():
            psi[self.idx(m, up)] += a
        return psi

    def lift(self, nuclear_vec: np.ndarray, up: bool = False) -> np.ndarray:
        return np.kron(np.asarray(nuclear_vec, dtype=complex), [1, 0] if up else [0, 1])

    def nuclear_op(self, op: np.ndarray) -> np.ndarray:
        return np.kron(op, np.eye(2))

    def shift(self, delta: int) -> np.ndarray:
        """``sum_m |m + delta><m|`` on the nuclear label (identity on the ancilla)."""
        return self.nuclear_op(np.eye(self.nI, k=delta))

    def Iz(self) -> np.ndarray:
        return self.nuclear_op(np.diag(self.mI).astype(complex))

    def ancilla_projector(self, up: bool) -> np.ndarray:
        return np.kron(np.eye(self.nI), np.diag([1.0, 0.0] if up else [0.0, 1.0])).astype(complex)

    # transitions; signed by the change of the driven projection (circular drives select a sense)
    def nuclear_transition(self, m_low: float, up: bool) -> tuple[int, int, float]:
        a, b = self.idx(m_low + 1, up), self.idx(m_low, up)
        return a, b, float(self.energies[a] - self.energies[b])

    def ancilla_transition(self, mI: float) -> tuple[int, int, float]:
        a, b = self.idx(mI, True), self.idx(mI, False)
        return a, b, float(self.energies[a] - self.energies[b])

    def all_transitions(self) -> dict:
        out = {}
        for m in self.mI:
            out[f"ancilla|mI={m:+g}"] = self.ancilla_transition(m)[2]
        for up in (True, False):
            for m in self.mI[1:]:
                out[f"nuclear {m:+g}->{m + 1:+g}|{'up' if up else 'down'}"] = self.nuclear_transition(m, up)[2]
        return out

    def pulse(self, pair_upper_m: int, pair_lower_m: int, signed_freq: float, theta: float, phi: float,
              rabi: float, t_start: float, name: str) -> PulseSegment:
        """Resonant rotation ``theta`` on the labelled pair, oriented ``(larger m, smaller m)``."""
        others = {k: f for k, f in self.all_transitions().items() if k != name}
        seps = [abs(f - signed_freq) for f in others.values()]
        tau_min = 1.01 / (0.2 * min(seps)) if seps else 0.0
        tau = theta / (2 * math.pi * rabi)
        if tau < tau_min:
            # slow the pulse down until the bandwidth rule holds
            tau = tau_min
            rabi = theta / (2 * math.pi * tau)
        bad = check_selectivity(tau, signed_freq, others)
        if bad:
            raise CompilationError(f"{name} is not resolved from: " + "; ".join(bad))
        a, b = pair_upper_m, pair_lower_m
        if self.energies[a] >= self.energies[b]:
            hi, lo, phase = a, b, phi
        else:
            hi, lo, phase = b, a, -phi
        amp = rabi / (2.0 * MU_B_GHZ_PER_T)
        return PulseSegment((lo, hi), abs(signed_freq), amp, phase, t_start + tau / 2, tau, multi_tone=True)

    def nuclear_pulse(self, m_low: float, up: bool, theta: float, phi: float, t_start: float) -> PulseSegment:
        a, b, f = self.nuclear_transition(m_low, up)
        name = f"nuclear {m_low:+g}->{m_low + 1:+g}|{'up' if up else 'down'}"
        return self.pulse(a, b, f, theta, phi, self.hw.nuclear_rabi, t_start, name)

    def ancilla_pulse(self, mI: float, theta: float, phi: float, t_start: float) -> PulseSegment:
        a, b, f = self.ancilla_transition(mI)
        return self.pulse(a, b, f, theta, phi, self.hw.ancilla_rabi, t_start, f"ancilla|mI={mI:+g}")


# ---------------------------------------------------------------- stages: pulses plus software phases


@dataclass
class Stage:
    """A pulse schedule followed by software (virtual) z-phases in label coordinates."""

    schedule: PulseSchedule
    post_phases: np.ndarray | None = None

    @property
    def duration(self) -> float:
        return self.schedule.total_time


def _parallel(levels: LabelledLevels, makers) -> PulseSchedule:
    segs = [make(0.0) for make in makers]
    tau = max(s.tau for s in segs)
    # equalize durations so simultaneous tones start and stop together
    out = []
    for s in segs:
        scale = s.tau / tau
        out.append(PulseSegment(s.target, s.freq, s.amp * scale, s.phase, tau / 2, tau, multi_tone=True))
    return PulseSchedule(out, total_time=tau)


def _sequence(scheds: Sequence[PulseSchedule]) -> PulseSchedule:
    total = PulseSchedule([], total_time=0.0)
    for s in scheds:
        total = total.then(s)
    return total


def _static_generator(levels: LabelledLevels, segs: Sequence[PulseSegment]) -> np.ndarray:
    h = np.zeros((levels.dim, levels.dim), dtype=complex)
    for p in segs:
        lo, hi = p.target
        gap = levels.energies[hi] - levels.energies[lo]
        if abs(gap - p.freq) > 1e-9:
            raise ValueError("only resonant segments have a static interaction-picture generator")
        x, y = _pair_operators((lo, hi), levels.dim, None)
        h += p.rabi * (math.cos(p.phase) * x + math.sin(p.phase) * y)
    return h


def _intervals(schedule: PulseSchedule):
    pts = sorted({0.0, schedule.total_time} | {s.start for s in schedule.segments} | {s.end for s in schedule.segments})
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo > 1e-12:
            mid = (lo + hi) / 2
            yield hi - lo, [s for s in schedule.segments if s.start <= mid <= s.end]


def stage_unitary(stage: Stage, levels: LabelledLevels, method: str = "ideal") -> np.ndarray:
    """Interaction-picture propagator of a stage.

    ``ideal`` exponentiates the exact rotating-wave generators; ``pulse``
    integrates the lab-frame drive with the pulse engine and transforms back.
    """
    T = stage.duration
    if method == "pulse":
        h0 = np.diag(levels.energies).astype(complex)
        u = simulate_schedule(stage.schedule, h0, None, steps_per_period=64,
                              dt=1 / (40 * max(levels.energies.max() - levels.energies.min(), 1e-9)))
        u = np.exp(2j * math.pi * levels.energies * T)[:, None] * u
    elif method == "ideal":
        u = np.eye(levels.dim, dtype=complex)
        for dt, segs in _intervals(stage.schedule):
            if segs:
                u = matexp_unitary(_static_generator(levels, segs), dt) @ u
    else:
        raise ValueError(f"unknown method {method!r}")
    if stage.post_phases is not None:
        u = np.exp(1j * stage.post_phases)[:, None] * u
    return u


def stage_channel(stage: Stage, levels: LabelledLevels, rho: np.ndarray, terms: Sequence[LindbladTerm]) -> np.ndarray:
    """Evolve a density matrix through a stage under dephasing (interaction picture)."""
    d = levels.dim
    vec = np.asarray(rho, dtype=complex).reshape(-1)
    for dt, segs in _intervals(stage.schedule):
        h = _static_generator(levels, segs) if segs else np.zeros((d, d), dtype=complex)
        vec = scipy.linalg.expm(liouvillian(h, terms) * dt) @ vec
    rho = vec.reshape(d, d)
    if stage.post_phases is not None:
        ph = np.exp(1j * stage.post_phases)
        rho = ph[:, None] * rho * ph.conj()[None, :]
    return rho


def idle_channel(levels: LabelledLevels, rho: np.ndarray, terms, T: float) -> np.ndarray:
    if T <= 0:
        return rho
    d = levels.dim
    return (scipy.linalg.expm(liouvillian(np.zeros((d, d), dtype=complex), terms) * T) @ rho.reshape(-1)).reshape(d, d)


def _measure(psi: np.ndarray, levels: LabelledLevels, rng: np.random.Generator):
    p_up = float(np.real(np.vdot(psi, levels.ancilla_projector(True) @ psi)))
    if 1e-12 < p_up < 1 - 1e-12:
        up = bool(rng.random() < p_up)
    else:
        up = p_up >= 0.5
    proj = levels.ancilla_projector(up)
    post = proj @ psi
    prob = p_up if up else 1 - p_up
    return up, post / np.linalg.norm(post), prob


def _residual_outside(psi: np.ndarray, code: CodeSpec) -> float:
    p = code.P_L + code.P_e
    return float(np.linalg.norm(psi - p @ psi))


# ---------------------------------------------------------------- amplitude-shift code (I = 5/2)


class AmplitudeCode:
    """Code words ``|-3/2, down>`` and ``|3/2, down>`` protecting against ``Delta m_I = +-1`` shifts."""

    def __init__(self, hw: QuditHardware | None = None):
        self.hw = hw or QuditHardware.default(2.5)
        if self.hw.spec.I != 2.5:
            raise ValueError("the amplitude-shift code needs I = 5/2")
        self.levels = L = LabelledLevels(self.hw)
        self.code = CodeSpec(
            "amplitude-shift",
            (L.state({-1.5: 1}), L.state({1.5: 1})),
            {"I": np.eye(L.dim, dtype=complex), "E+": L.shift(+1), "E-": L.shift(-1)},
            {"round1": "shift-", "round2": "shift+"},
        )

    def _ancilla_round(self, ms):
        L = self.levels
        return Stage(_parallel(L, [lambda t, m=m: L.ancilla_pulse(m, math.pi, 0.0, t) for m in ms]))

    def _fix(self, pairs):
        L = self.levels
        return Stage(_parallel(L, [lambda t, lo=lo: L.nuclear_pulse(lo, True, math.pi, 0.0, t) for lo in pairs]))

    @cached_property
    def stages(self) -> dict:
        return {
            "round1": self._ancilla_round((-2.5, 0.5)),
            "round2": self._ancilla_round((-0.5, 2.5)),
            "fix-": self._fix((-2.5, 0.5)),
            "fix+": self._fix((-1.5, 1.5)),
            "reset": self._ancilla_round((-1.5, 1.5)),
        }

    def unitaries(self, method: str = "ideal") -> dict:
        return {k: stage_unitary(s, self.levels, method) for k, s in self.stages.items()}

    def encode(self, alpha: complex, beta: complex) -> np.ndarray:
        return self.code.logical(alpha, beta)

    def apply_error(self, psi: np.ndarray, error: str) -> np.ndarray:
        ops = {"none": self.code.error_ops["I"], "shift-": self.code.error_ops["E-"], "shift+": self.code.error_ops["E+"]}
        if error not in ops:
            raise ValueError(f"unknown error {error!r}")
        out = ops[error] @ psi
        return out / np.linalg.norm(out)

    def cycle(self, psi: np.ndarray, rng: np.random.Generator | None = None, method: str = "ideal",
              unitaries: dict | None = None):
        rng = rng if rng is not None else np.random.default_rng(RNG_DEFAULT_SEED)
        if _residual_outside(psi, self.code) > 1e-8:
            return SyndromeRecord((), "unrecoverable", "none", 1.0), psi
        u = unitaries or self.unitaries(method)
        up1, psi1, p1 = _measure(u["round1"] @ psi, self.levels, rng)
        if up1:
            out = u["reset"] @ u["fix-"] @ psi1
            return SyndromeRecord(("up",), "shift-", "nuclear pi pulses -5/2->-3/2, 1/2->3/2", p1), out
        up2, psi2, p2 = _measure(u["round2"] @ psi1, self.levels, rng)
        if up2:
            out = u["reset"] @ u["fix+"] @ psi2
            return SyndromeRecord(("down", "up"), "shift+", "nuclear pi pulses -1/2->-3/2, 5/2->3/2", p1 * p2), out
        return SyndromeRecord(("down", "down"), "none", "none", p1 * p2), psi2


def amplitude_code_cycle(state: np.ndarray, error: str = "none", *, code: AmplitudeCode | None = None,
                         rng: np.random.Generator | None = None, method: str = "ideal"):
    """Apply ``error`` to an encoded state, then run the two-round detect-correct protocol."""
    code = code or AmplitudeCode()
    return code.cycle(code.apply_error(state, error), rng, method)


# ---------------------------------------------------------------- spin-3/2 dephasing code

S3 = math.sqrt(3) / 2
# nuclear index k <-> m = 3/2 - k
ZERO_L = np.array([0.5, 0, S3, 0], dtype=complex)
ONE_L = np.array([0, S3, 0, 0.5], dtype=complex)
ERR_0 = np.array([S3, 0, -0.5, 0], dtype=complex)
ERR_1 = np.array([0, 0.5, 0, -S3], dtype=complex)


def _givens_stage(levels: LabelledLevels, rotations: Sequence[GivensRotation], phases: np.ndarray | None,
                  up: bool = False) -> Stage:
    scheds = []
    for g in rotations:
        m_low = levels.mI[g.lower]
        scheds.append(PulseSchedule([levels.nuclear_pulse(m_low, up, g.theta, g.phi, 0.0)]))
    sched = _sequence(scheds)
    post = None if phases is None else np.repeat(np.asarray(phases, dtype=float), 2)
    return Stage(sched, post)


class Spin32Code:
    """Code words ``(sqrt3/2)|-1/2> + (1/2)|3/2>`` and ``(1/2)|-3/2> + (sqrt3/2)|1/2>`` against ``S_z``."""

    def __init__(self, hw: QuditHardware | None = None):
        self.hw = hw or QuditHardware.default(1.5)
        if self.hw.spec.I != 1.5:
            raise ValueError("the spin-3/2 code needs I = 3/2")
        self.levels = L = LabelledLevels(self.hw)
        self.code = CodeSpec(
            "spin-3/2",
            (L.lift(ZERO_L), L.lift(ONE_L)),
            {"I": np.eye(L.dim, dtype=complex), "Sz": L.Iz()},
            {"down": "none", "up": "Sz"},
        )
        self.error_words = (L.lift(ERR_0), L.lift(ERR_1))

    @cached_property
    def encoding(self) -> tuple[list, np.ndarray]:
        """Rotations mapping ``|-3/2> -> |0_L>`` and ``|-1/2> -> |1_L>``."""
        return givens_decompose(np.stack([ZERO_L, ONE_L], axis=1), targets=[3, 2])

    @cached_property
    def mapping(self) -> tuple[list, np.ndarray]:
        """Rotations of ``W`` with ``W|3/2> = |0_L>, W|1/2> = |e0>, W|-1/2> = |1_L>, W|-3/2> = |e1>``."""
        return givens_decompose(np.stack([ZERO_L, ERR_0, ONE_L, ERR_1], axis=1))

    @cached_property
    def stages(self) -> dict:
        L = self.levels
        enc_rot, enc_ph = self.encoding
        map_rot, map_ph = self.mapping
        # forward map is W^dag: undo the phases first, then inverse rotations in reverse order
        inv_rot = [g.inverse() for g in reversed(map_rot)]
        pre = Stage(PulseSchedule([], total_time=0.0), np.repeat(-np.asarray(map_ph), 2))
        fwd = _givens_stage(L, inv_rot, None)
        return {
            "encode": _givens_stage(L, enc_rot, enc_ph),
            "map_phases": pre,
            "map": fwd,
            "detect": Stage(_parallel(L, [lambda t, m=m: L.ancilla_pulse(m, math.pi, 0.0, t) for m in (0.5, -1.5)])),
            "fix": Stage(_parallel(L, [lambda t, lo=lo: L.nuclear_pulse(lo, True, math.pi, 0.0, t) for lo in (0.5, -1.5)])),
            "reset": Stage(_parallel(L, [lambda t, m=m: L.ancilla_pulse(m, math.pi, 0.0, t) for m in (1.5, -0.5)])),
            "unmap": _givens_stage(L, map_rot, map_ph),
        }

    def rotation_counts(self) -> dict:
        return {"encode": len(self.encoding[0]), "map": len(self.mapping[0])}

    def unitaries(self, method: str = "ideal") -> dict:
        u = {k: stage_unitary(s, self.levels, method) for k, s in self.stages.items()}
        u["forward"] = u["map"] @ u["map_phases"]
        return u

    def initial(self, alpha: complex, beta: complex) -> np.ndarray:
        _check_amplitudes(alpha, beta)
        return self.levels.state({-1.5: alpha, -0.5: beta})

    def encode(self, alpha: complex, beta: complex, method: str = "ideal") -> tuple[np.ndarray, PulseSchedule]:
        stage = self.stages["encode"]
        psi = stage_unitary(stage, self.levels, method) @ self.initial(alpha, beta)
        sched = PulseSchedule(stage.schedule.segments, total_time=stage.duration,
                              metadata={"gate": "spin32_encode", "virtual_phases": stage.post_phases.tolist(),
                                        "rotations": len(self.encoding[0])})
        return psi, sched

    def detect_correct(self, psi: np.ndarray, rng: np.random.Generator | None = None, method: str = "ideal",
                       unitaries: dict | None = None):
        rng = rng if rng is not None else np.random.default_rng(RNG_DEFAULT_SEED)
        if _residual_outside(psi, self.code) > 1e-8:
            return SyndromeRecord((), "unrecoverable", "none", 1.0), psi
        u = unitaries or self.unitaries(method)
        mapped = u["detect"] @ u["forward"] @ psi
        up, post, p = _measure(mapped, self.levels, rng)
        if up:
            out = u["unmap"] @ u["reset"] @ u["fix"] @ post
            return SyndromeRecord(("up",), "Sz", "nuclear pi pulses 1/2->3/2, -3/2->-1/2", p), out
        return SyndromeRecord(("down",), "none", "none", p), u["unmap"] @ post


def spin32_encode(alpha: complex, beta: complex, hw: QuditHardware | None = None, method: str = "ideal"):
    return Spin32Code(hw).encode(alpha, beta, method)


def spin32_detect_correct(state: np.ndarray, code: Spin32Code | None = None, rng=None, method: str = "ideal"):
    return (code or Spin32Code()).detect_correct(state, rng, method)


# ---------------------------------------------------------------- memory experiment


@dataclass
class MemoryCurve:
    T_mem: np.ndarray
    T2: float
    corrected: np.ndarray
    reference: np.ndarray

    @property
    def t_over_T2(self) -> np.ndarray:
        return self.T_mem / self.T2

    def crossing(self) -> float | None:
        """First ``T_mem/T2`` where the corrected error drops below the reference."""
        diff = self.corrected - self.reference
        for k in range(1, len(diff)):
            if diff[k - 1] > 0 > diff[k]:
                x0, x1 = self.t_over_T2[k - 1], self.t_over_T2[k]
                return float(x0 + (x1 - x0) * diff[k - 1] / (diff[k - 1] - diff[k]))
        return None


def qec_memory_experiment(T_mem: Sequence[float], T2: float, hw: QuditHardware | None = None, *,
                          ancilla_T2: float | None = None, pulse_noise: bool = True,
                          alpha: complex = 1 / math.sqrt(2), beta: complex = 1 / math.sqrt(2)) -> MemoryCurve:
    """Error ``1 - <psi_L|rho|psi_L>`` after encode, idle ``T_mem`` (ns), detect and correct under pure dephasing.

    Dephasing acts on the qudit (``I_z`` at ``1/T2``) and on the ancilla
    (``s_z`` at ``1/ancilla_T2``, default ``T2``) during idle times and pulses.
    The ancilla readout enters as the sum over both outcome branches, each
    followed by its conditional operations. The reference is an idle spin 1/2.
    """
    code = Spin32Code(hw)
    L = code.levels
    d = L.dim
    anc = np.kron(np.eye(L.nI), np.diag([0.5, -0.5])).astype(complex)
    noise = [LindbladTerm(L.Iz(), 1 / T2), LindbladTerm(anc, 1 / (ancilla_T2 or T2))]
    quiet: list[LindbladTerm] = []
    st = code.stages
    target = code.code.logical(alpha, beta)
    rho0 = np.outer(code.initial(alpha, beta), code.initial(alpha, beta).conj())

    def run(stage, rho, noisy):
        if noisy:
            return stage_channel(stage, L, rho, noise)
        u = stage_unitary(stage, L)
        return u @ rho @ u.conj().T

    pn = pulse_noise
    rho_enc = run(st["encode"], rho0, pn)
    out_c, out_r = [], []
    T_mem = np.asarray(T_mem, dtype=float)
    if np.any(T_mem < 0) or T2 <= 0:
        raise ValueError("memory times must be non-negative and T2 positive")
    for t_mem in T_mem:
        x = t_mem / T2
        rho = idle_channel(L, rho_enc, noise, t_mem)
        for key in ("map_phases", "map", "detect"):
            rho = run(st[key], rho, pn)
        p_up = L.ancilla_projector(True)
        p_dn = L.ancilla_projector(False)
        err = p_up @ rho @ p_up
        ok = p_dn @ rho @ p_dn
        for key in ("fix", "reset"):
            err = run(st[key], err, pn)
        wait = st["fix"].duration + st["reset"].duration
        ok = idle_channel(L, ok, noise, wait) if pn else ok
        rho = run(st["unmap"], err + ok, pn)
        out_c.append(1 - float(np.real(np.vdot(target, rho @ target))))
        out_r.append((1 - math.exp(-x)) / 2)
    return MemoryCurve(T_mem, float(T2), np.array(out_c), np.array(out_r))


# ---------------------------------------------------------------- higher-spin S_z codes


def generate_sz_code(S: float, order: int = 1) -> CodeSpec:
    """Code words on alternating ``m`` sublattices correcting ``{I, S_z, ..., S_z^order}``.

    Populations solve the moment-matching Knill-Laflamme equations by
    non-negative least squares.
    """
    if S > 3.5:
        raise ValueError("the generator is limited to S <= 7/2")
    dim = int(round(2 * S)) + 1
    m = S - np.arange(dim)
    A = np.arange(0, dim, 2)
    B = np.arange(1, dim, 2)
    rows = []
    rhs = []
    for k in range(0, 2 * order + 1):
        row = np.zeros(dim)
        row[A] = m[A] ** k
        row[B] = -(m[B] ** k)
        rows.append(row)
        rhs.append(0.0)
    norm_a = np.zeros(dim)
    norm_a[A] = 1
    rows.append(norm_a)
    rhs.append(1.0)
    p, resid = nnls(np.array(rows), np.array(rhs))
    if resid > 1e-10 or p[A].sum() == 0 or p[B].sum() == 0:
        raise ValueError(f"no S_z^{order} code on alternating sublattices exists for S = {S}")
    c0 = np.zeros(dim, dtype=complex)
    c1 = np.zeros(dim, dtype=complex)
    c0[A] = np.sqrt(p[A])
    c1[B] = np.sqrt(p[B])
    sz = spin_xyz(S)[2]
    errors = {"I": np.eye(dim, dtype=complex)}
    for k in range(1, order + 1):
        errors[f"Sz^{k}"] = np.linalg.matrix_power(sz, k)
    return CodeSpec(f"sz-code S={S} order={order}", (c0, c1), errors)


def naive_spin32_code() -> CodeSpec:
    """``|-3/2>, |3/2>`` with ``{I, S_z}``: violates the Knill-Laflamme conditions."""
    e = np.eye(4, dtype=complex)
    return CodeSpec("naive", (e[3], e[0]), {"I": np.eye(4, dtype=complex), "Sz": spin_xyz(1.5)[2]})
