"""Qudit Grover search: exact iterates and a two-stage multi-tone pulse implementation.

Pulse mode drives the adjacent nuclear transitions of a hyperfine qudit
(ancilla frozen in ``|down>``) with one detuned tone per transition. For a
chain of levels the multi-tone rotating frame is exactly static, so each stage
is a single matrix exponential; :func:`lab_frame_check` confirms the result
with the lab-frame pulse engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..core import matexp_unitary
from ..pulses import CompilationError, PulseSchedule, PulseSegment, simulate_schedule
from ..units import MU_B_GHZ_PER_T


# ---------------------------------------------------------------- unitary mode


def grover_iterate(d: int, marked: int) -> np.ndarray:
    """Oracle phase flip followed by inversion about the uniform state."""
    s = np.full(d, 1 / math.sqrt(d), dtype=complex)
    oracle = np.eye(d, dtype=complex)
    oracle[marked, marked] = -1
    return (2 * np.outer(s, s.conj()) - np.eye(d)) @ oracle


def grover_brute_force(d: int, marked: int, iterations: int) -> np.ndarray:
    """Amplitudes after explicit element-wise oracle and mean-inversion loops."""
    amps = [1 / math.sqrt(d)] * d
    for _ in range(iterations):
        amps[marked] = -amps[marked]
        mean = sum(amps) / d
        amps = [2 * mean - a for a in amps]
    return np.abs(np.array(amps)) ** 2


def optimal_iterations(d: int) -> int:
    """Iterate count maximizing the marked population (brute force over a short range)."""
    best = max(range(0, 2 * int(math.ceil(math.sqrt(d))) + 2), key=lambda k: grover_brute_force(d, 0, k)[0])
    return best


def grover_unitary(d: int, marked: int, iterations: int | None = None) -> np.ndarray:
    if d < 3:
        raise ValueError("the qudit search needs d >= 3")
    if not 0 <= marked < d:
        raise ValueError("marked index out of range")
    k = optimal_iterations(d) if iterations is None else iterations
    psi = np.full(d, 1 / math.sqrt(d), dtype=complex)
    psi = np.linalg.matrix_power(grover_iterate(d, marked), k) @ psi
    return np.abs(psi) ** 2


# ---------------------------------------------------------------- pulse mode


@dataclass
class GroverSpec:
    """Search over the first ``d`` levels of a ladder with ``len(gaps)`` adjacent transitions."""

    d: int = 3
    marked: int = 0
    gaps: tuple = ()
    max_rabi: float = 0.004
    max_detuning: float = 0.004
    max_tau: float = 400.0
    drive: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("d must be at least 3")
        if not 0 <= self.marked < self.d:
            raise ValueError("marked must be below d")
        if len(self.gaps) < self.d - 1:
            raise ValueError("one gap per adjacent transition is required")
        g = np.abs(np.asarray(self.gaps, dtype=float))
        if np.min(np.abs(np.subtract.outer(g, g))[~np.eye(len(g), dtype=bool)], initial=np.inf) < 1e-6:
            raise CompilationError("degenerate transition gaps: tones cannot address a single transition")

    @property
    def levels(self) -> int:
        return len(self.gaps) + 1

    @classmethod
    def from_qudit(cls, d: int = 3, marked: int = 0, hw=None, **kw) -> "GroverSpec":
        """Gaps of the nuclear ladder in the ``|down>`` manifold of an ``I = 3/2`` qudit."""
        from ..qec import LabelledLevels, QuditHardware

        lv = LabelledLevels(hw or QuditHardware.default(1.5))
        e = np.array([lv.energies[lv.idx(m, False)] for m in lv.mI])
        return cls(d, marked, tuple(np.diff(e)), **kw)


def _frame_offsets(spec: GroverSpec, detuning) -> np.ndarray:
    """Level frequencies of the multi-tone frame relative to the bare levels."""
    signs = np.sign(np.asarray(spec.gaps, dtype=float))
    return np.concatenate([[0.0], np.cumsum(signs * np.asarray(detuning))])


def _stage_generator(spec: GroverSpec, rabi, detuning, phase) -> np.ndarray:
    """Static multi-tone rotating-frame Hamiltonian of the ladder."""
    n = spec.levels
    h = np.diag(-_frame_offsets(spec, detuning)).astype(complex)
    for k in range(n - 1):
        sign = 1.0 if spec.gaps[k] > 0 else -1.0
        # level pair (k, k+1): drive couples upper-energy to lower-energy level
        c = rabi[k] / 2 * np.exp(-1j * sign * phase[k])
        h[k + 1, k] = c
        h[k, k + 1] = np.conj(c)
    return h


def _unpack(x: np.ndarray, spec: GroverSpec):
    m = spec.levels - 1
    rabi = spec.max_rabi * (np.sin(x[:m]) ** 2)
    detuning = spec.max_detuning * np.tanh(x[m:2 * m])
    phase = x[2 * m:3 * m]
    tau = spec.max_tau * (np.sin(x[3 * m]) ** 2)
    return rabi, detuning, phase, tau


def _stage_unitary(spec: GroverSpec, x: np.ndarray) -> np.ndarray:
    rabi, det, ph, tau = _unpack(x, spec)
    return matexp_unitary(_stage_generator(spec, rabi, det, ph), tau)


@dataclass
class GroverResult:
    populations: np.ndarray
    stage1_populations: np.ndarray
    schedule: PulseSchedule | None
    parameters: dict


def _optimize(cost, x0s):
    best = None
    for x0 in x0s:
        res = minimize(cost, x0, method="Powell", options={"xtol": 1e-8, "ftol": 1e-12, "maxfev": 20000})
        if best is None or res.fun < best.fun:
            best = res
    return best


def _to_segments(spec: GroverSpec, x: np.ndarray, t_start: float) -> list[PulseSegment]:
    rabi, det, ph, tau = _unpack(x, spec)
    segs = []
    for k in range(spec.levels - 1):
        if rabi[k] < 1e-12:
            continue
        sign = 1.0 if spec.gaps[k] > 0 else -1.0
        pair = (k, k + 1) if sign > 0 else (k + 1, k)
        segs.append(PulseSegment(pair, abs(spec.gaps[k]) + det[k],
                                 rabi[k] / (2 * MU_B_GHZ_PER_T), ph[k], t_start + tau / 2, tau, multi_tone=True))
    return segs


def grover_qudit(spec: GroverSpec, mode: str = "unitary", seed: int = 0, restarts: int = 4) -> GroverResult:
    """Unitary mode: exact iterates. Pulse mode: optimized two-stage multi-tone drive."""
    if mode == "unitary":
        pops = grover_unitary(spec.d, spec.marked)
        uniform = np.full(spec.d, 1 / spec.d)
        return GroverResult(pops, uniform, None, {"iterations": optimal_iterations(spec.d)})
    if mode != "pulse":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    n = spec.levels
    m = n - 1
    psi0 = np.zeros(n, dtype=complex)
    psi0[0] = 1
    target1 = np.zeros(n)
    target1[:spec.d] = 1 / spec.d

    def starts():
        base = np.concatenate([np.full(m, 0.8), np.zeros(m), np.zeros(m), [0.6]])
        yield base
        for _ in range(restarts - 1):
            yield base + rng.normal(0, 0.5, base.size)

    def cost1(x):
        p = np.abs(_stage_unitary(spec, x) @ psi0) ** 2
        return float(np.sum((p - target1) ** 2))

    r1 = _optimize(cost1, list(starts()))
    psi1 = _stage_unitary(spec, r1.x) @ psi0

    tau1 = _unpack(r1.x, spec)[3]
    off1 = _frame_offsets(spec, _unpack(r1.x, spec)[1])

    def stage2(x):
        # re-express the state in the frame of the stage-2 tones
        shift = np.exp(2j * math.pi * (_frame_offsets(spec, _unpack(x, spec)[1]) - off1) * tau1)
        return _stage_unitary(spec, x) @ (shift * psi1)

    def cost2(x):
        p = np.abs(stage2(x)) ** 2
        return float(-p[spec.marked] + np.sum(p[spec.d:]))

    r2 = _optimize(cost2, list(starts()))
    psi2 = stage2(r2.x)
    tau2 = _unpack(r2.x, spec)[3]
    segs = _to_segments(spec, r1.x, 0.0) + _to_segments(spec, r2.x, tau1)
    params = {}
    for name, x in (("stage1", r1.x), ("stage2", r2.x)):
        rabi, det, ph, tau = _unpack(x, spec)
        params[name] = {"rabi": rabi.tolist(), "detuning": det.tolist(), "phase": ph.tolist(), "tau": float(tau)}
    sched = PulseSchedule(segs, total_time=tau1 + tau2, metadata={"algorithm": "grover", "marked": spec.marked})
    return GroverResult(np.abs(psi2) ** 2, np.abs(psi1) ** 2, sched, params)


def lab_frame_check(spec: GroverSpec, schedule: PulseSchedule, t_end: float | None = None) -> np.ndarray:
    """Populations from the lab-frame simulation of ``schedule`` up to ``t_end``, starting in level 0."""
    e = np.concatenate([[0.0], np.cumsum(spec.gaps)])
    h0 = np.diag(e).astype(complex)
    f = float(np.max(np.abs(spec.gaps)))
    span = (0.0, schedule.total_time if t_end is None else t_end)
    u = simulate_schedule(schedule, h0, None, t_span=span, steps_per_period=64, dt=1 / (64 * f))
    psi = u[:, 0]
    return np.abs(psi) ** 2


__all__ = ["grover_iterate", "grover_brute_force", "optimal_iterations", "grover_unitary", "GroverSpec",
           "GroverResult", "grover_qudit", "lab_frame_check"]
