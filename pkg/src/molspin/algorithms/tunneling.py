"""Quantum tunnelling of the magnetization, exactly and as a qudit pulse sequence."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from ..core import matexp_unitary, spin_xyz
from ..givens import givens_decompose, givens_unitary


@dataclass(frozen=True)
class TunnelingSpec:
    """``D S_z^2 + E (S_x^2 - S_y^2)`` with ``D < 0`` (GHz)."""

    S: float = 1.0
    D: float = -1.0
    E: float = 0.05

    def __post_init__(self):
        if self.S < 1:
            raise ValueError("tunnelling needs S >= 1")
        if abs(self.E) > 0.2 * abs(self.D):
            warnings.warn("E is not small compared with D; the two-level picture does not apply", stacklevel=2)

    def hamiltonian(self) -> np.ndarray:
        sx, sy, sz = spin_xyz(self.S)
        return self.D * sz @ sz + self.E * (sx @ sx - sy @ sy)


@dataclass
class TunnelingTrace:
    times: np.ndarray
    sz: np.ndarray
    norm_error: float
    rotations_per_step: int = 0


def tunneling_simulation(spec: TunnelingSpec, times: Sequence[float], mode: str = "exact") -> TunnelingTrace:
    """``<S_z>(t)`` from ``|M = S>``.

    ``qudit`` mode decomposes the step propagator for a uniform time grid into
    adjacent-level rotations and applies the reconstructed sequence repeatedly.
    """
    times = np.asarray(times, dtype=float)
    h = spec.hamiltonian()
    d = h.shape[0]
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1
    sz = spin_xyz(spec.S)[2]
    n_rot = 0
    if mode == "exact":
        states = [matexp_unitary(h, t) @ psi0 for t in times]
    elif mode == "qudit":
        steps = np.diff(times)
        if len(times) < 2 or np.ptp(steps) > 1e-9 * max(abs(steps[0]), 1e-30) or abs(times[0]) > 1e-15:
            raise ValueError("qudit mode needs a uniform grid starting at t = 0")
        rots, phases = givens_decompose(matexp_unitary(h, steps[0]))
        n_rot = len(rots)
        step = givens_unitary(rots, phases, d)
        states = [psi0]
        for _ in steps:
            states.append(step @ states[-1])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    vals = np.array([float(np.real(np.vdot(s, sz @ s))) for s in states])
    norm_err = max(abs(np.vdot(s, s).real - 1) for s in states)
    return TunnelingTrace(times, vals, float(norm_err), n_rot)


def tunneling_period(spec: TunnelingSpec) -> float:
    """Exact period from the ``{|S>, |-S>}`` block; ``1/(2E)`` for ``S = 1``."""
    h = spec.hamiltonian()
    w, v = np.linalg.eigh(h)
    d = h.shape[0]
    weights = np.abs(v[0]) ** 2 + np.abs(v[d - 1]) ** 2
    pair = np.argsort(weights)[-2:]
    return 1.0 / abs(w[pair[1]] - w[pair[0]])


def fit_period(times: np.ndarray, trace: np.ndarray, guess: float) -> tuple[float, float]:
    """Period and amplitude of ``A cos(2 pi t / T)`` fitted to a trace."""
    (amp, period), _ = curve_fit(lambda t, a, p: a * np.cos(2 * math.pi * t / p), times, trace, p0=[trace[0], guess])
    return float(abs(period)), float(amp)


__all__ = ["TunnelingSpec", "TunnelingTrace", "tunneling_simulation", "tunneling_period", "fit_period"]
