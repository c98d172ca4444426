"""Drive pulses, rotating frames, time-ordered propagation and gate compilation.

Drives are circularly polarized: a segment on a spin site contributes
``gamma [s_x cos(2 pi nu t + phi) + s_y sin(2 pi nu t + phi)]`` while active,
with ``gamma = g_perp mu_B B_1`` in GHz. A segment may instead target a level
pair ``(lo, hi)`` of a given basis; it then acts with the same form on the
two-level subspace (an ideal transition-selective drive).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    SpinRegister,
    eigendecompose,
    embed,
    is_hermitian,
    matexp_unitary,
    site_spin_ops,
    spin_xyz,
)
from .units import MU_B_GHZ_PER_T

SQRT3 = math.sqrt(3.0)


class CompilationError(RuntimeError):
    """A gate cannot be lowered to a selective pulse schedule."""


@dataclass(frozen=True)
class HardwareCalibration:
    """Drive calibration: Rabi frequency ``rabi`` (GHz) at the default amplitude."""

    rabi: float = 0.02
    g_perp: float = 2.0

    def amp_for(self, rabi: float | None = None) -> float:
        """Field amplitude B_1 (T) giving the requested Rabi frequency."""
        return (self.rabi if rabi is None else rabi) / (self.g_perp * MU_B_GHZ_PER_T)


@dataclass(frozen=True)
class PulseSegment:
    target: object
    freq: float
    amp: float
    phase: float = 0.0
    t0: float = 0.0
    tau: float = 1.0
    shape: str = "rectangular"
    g_perp: float = 2.0
    multi_tone: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"pulse duration must be positive, got {self.tau}")
        if self.amp < 0:
            raise ValueError(f"pulse amplitude must be non-negative, got {self.amp}")
        if self.shape != "rectangular":
            raise ValueError(f"unsupported pulse shape {self.shape!r}")
        if isinstance(self.target, list):
            object.__setattr__(self, "target", tuple(self.target))

    @property
    def start(self) -> float:
        return self.t0 - self.tau / 2

    @property
    def end(self) -> float:
        return self.t0 + self.tau / 2

    @property
    def rabi(self) -> float:
        return self.g_perp * MU_B_GHZ_PER_T * self.amp

    def active(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.start) & (t <= self.end)

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.target, tuple):
            d["target"] = list(self.target)
        return d


@dataclass
class PulseSchedule:
    segments: list[PulseSegment] = field(default_factory=list)
    detuning_ramps: list[tuple[float, float, float]] = field(default_factory=list)
    total_time: float | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.segments = sorted(self.segments, key=lambda s: (s.start, str(s.target)))
        self.detuning_ramps = [tuple(map(float, r)) for r in self.detuning_ramps]
        for a_idx, a in enumerate(self.segments):
            for b in self.segments[a_idx + 1:]:
                overlap = min(a.end, b.end) - max(a.start, b.start) > 1e-12
                if overlap and a.target == b.target and not (a.multi_tone and b.multi_tone):
                    raise ValueError(
                        f"segments on target {a.target!r} overlap; flag them multi_tone for simultaneous tones"
                    )
        for t_a, t_b, _ in self.detuning_ramps:
            if t_b < t_a:
                raise ValueError("detuning ramp ends before it starts")
        if self.total_time is None:
            ends = [s.end for s in self.segments] + [r[1] for r in self.detuning_ramps]
            self.total_time = max(ends, default=0.0)

    def to_json(self) -> str:
        return json.dumps(
            {
                "segments": [s.to_dict() for s in self.segments],
                "detuning_ramps": [list(r) for r in self.detuning_ramps],
                "total_time": self.total_time,
                "metadata": self.metadata,
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "PulseSchedule":
        d = json.loads(text)
        return cls(
            [PulseSegment(**s) for s in d["segments"]],
            [tuple(r) for r in d.get("detuning_ramps", [])],
            d.get("total_time"),
            d.get("metadata", {}),
        )

    def then(self, other: "PulseSchedule") -> "PulseSchedule":
        """Concatenate ``other`` after this schedule."""
        shift = self.total_time
        segs = [PulseSegment(**{**s.to_dict(), "t0": s.t0 + shift}) for s in other.segments]
        ramps = [(a + shift, b + shift, w) for a, b, w in other.detuning_ramps]
        return PulseSchedule(
            self.segments + segs,
            self.detuning_ramps + ramps,
            shift + other.total_time,
            {**self.metadata, **other.metadata},
        )


@dataclass(frozen=True)
class FrameSpec:
    """Per-site rotation frequencies (GHz) defining ``R = exp(2 pi i nu t s_z)``."""

    rotation_freqs: dict

    def generator(self, reg: SpinRegister) -> np.ndarray:
        g = np.zeros((reg.total_dim,) * 2, dtype=complex)
        for site, nu in self.rotation_freqs.items():
            g += nu * site_spin_ops(reg, site)[2]
        return g

    def transform(self, reg: SpinRegister, t: float) -> np.ndarray:
        """``W(t) = exp(-2 pi i t sum_k nu_k s_zk)``, diagonal in the product basis."""
        d = np.real(np.diag(self.generator(reg)))
        return np.diag(np.exp(-2j * math.pi * t * d))


# ---------------------------------------------------------------- drive operators


def _pair_operators(target, dim: int, basis: np.ndarray | None):
    lo, hi = target
    if not (0 <= lo < dim and 0 <= hi < dim) or lo == hi:
        raise ValueError(f"invalid level pair {target!r} for dimension {dim}")
    x = np.zeros((dim, dim), dtype=complex)
    y = np.zeros((dim, dim), dtype=complex)
    x[hi, lo] = x[lo, hi] = 0.5
    y[hi, lo] = -0.5j
    y[lo, hi] = 0.5j
    if basis is not None:
        x = basis @ x @ basis.conj().T
        y = basis @ y @ basis.conj().T
    return x, y


def drive_operators(p: PulseSegment, reg: SpinRegister | None, dim: int | None = None,
                    basis: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """The ``(X, Y)`` pair the segment couples to (``s_x, s_y`` of a site, or a level pair)."""
    if isinstance(p.target, tuple):
        dim = reg.total_dim if reg is not None else dim
        if dim is None:
            raise ValueError("level-pair targets need a register or an explicit dimension")
        return _pair_operators(p.target, dim, basis)
    if reg is None:
        raise ValueError("site targets need a register")
    try:
        sx, sy, _ = site_spin_ops(reg, p.target)
    except (IndexError, TypeError) as exc:
        raise ValueError(f"unknown pulse target {p.target!r}") from exc
    return sx, sy


def drive_hamiltonian(p: PulseSegment, reg: SpinRegister | None, t: float, *, dim: int | None = None,
                      basis: np.ndarray | None = None) -> np.ndarray:
    x, y = drive_operators(p, reg, dim, basis)
    if p.amp == 0 or not p.active(t):
        return np.zeros_like(x)
    arg = 2 * math.pi * p.freq * t + p.phase
    return p.rabi * (math.cos(arg) * x + math.sin(arg) * y)


def to_rotating_frame(H_static: np.ndarray, drive: PulseSegment, frame: FrameSpec,
                      reg: SpinRegister | None = None) -> np.ndarray:
    """Static rotating-frame generator ``H - sum_k nu_k s_zk + gamma (s_x cos phi + s_y sin phi)``.

    Exact when ``H_static`` commutes with the frame generator and the drive
    rotates at the frame frequency of its target site.
    """
    H_static = np.asarray(H_static, dtype=complex)
    if reg is None:
        dim = H_static.shape[0]
        reg = SpinRegister([(dim - 1) / 2])
    gen = frame.generator(reg)
    if np.max(np.abs(H_static @ gen - gen @ H_static), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(H_static))):
        warnings.warn("static Hamiltonian does not commute with the frame; the rotating frame is approximate",
                      stacklevel=2)
    site = reg.index(drive.target)
    key = next((k for k in frame.rotation_freqs if reg.index(k) == site), None)
    if key is None or not math.isclose(frame.rotation_freqs[key], drive.freq, rel_tol=0, abs_tol=1e-12):
        warnings.warn("drive frequency differs from the frame of its target; the frame is not static",
                      stacklevel=2)
    sx, sy, _ = site_spin_ops(reg, site)
    return H_static - gen + drive.rabi * (math.cos(drive.phase) * sx + math.sin(drive.phase) * sy)


def lab_to_rotating(U_lab: np.ndarray, frame: FrameSpec, reg: SpinRegister, t_end: float,
                    t_start: float = 0.0) -> np.ndarray:
    """Express a lab propagator over ``[t_start, t_end]`` in the rotating frame."""
    return frame.transform(reg, t_end).conj().T @ U_lab @ frame.transform(reg, t_start)


# ---------------------------------------------------------------- propagation


@dataclass
class TimeDependentHamiltonian:
    """``H(t) = H0 + sum_k f_k(t) V_k`` with hermitian ``V_k`` and real vectorized ``f_k``."""

    H0: np.ndarray
    terms: list[tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]] = field(default_factory=list)
    period: float | None = None
    max_freq: float = 0.0

    def at(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        h = np.broadcast_to(self.H0, (times.size,) + self.H0.shape).astype(complex)
        for v, f in self.terms:
            h = h + np.asarray(f(times), dtype=float)[:, None, None] * v
        return h

    def __call__(self, t: float) -> np.ndarray:
        return self.at([t])[0]


def _magnus4_steps(hfun: Callable[[np.ndarray], np.ndarray], t_a: float, h: float, n: int) -> np.ndarray:
    """Stack of fourth-order Magnus step propagators for ``n`` steps of width ``h``."""
    starts = t_a + h * np.arange(n)
    c = SQRT3 / 6
    h1 = hfun(starts + h * (0.5 - c))
    h2 = hfun(starts + h * (0.5 + c))
    k = math.pi * h * (h1 + h2) + 1j * (SQRT3 * math.pi**2 * h * h / 3) * (h1 @ h2 - h2 @ h1)
    k = (k + np.conj(np.swapaxes(k, -1, -2))) / 2
    w, v = np.linalg.eigh(k)
    return (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _ordered_product(steps: np.ndarray) -> np.ndarray:
    """``steps[-1] @ ... @ steps[0]`` via pairwise reduction."""
    while steps.shape[0] > 1:
        if steps.shape[0] % 2:
            last = steps[-1:]
            steps = np.concatenate([steps[1:-1:2] @ steps[0:-1:2], last])
        else:
            steps = steps[1::2] @ steps[0::2]
    return steps[0]


def _propagator_fine(hfun, t_a: float, t_b: float, n: int, chunk: int = 4096) -> np.ndarray:
    h = (t_b - t_a) / n
    dim = hfun(np.array([t_a])).shape[-1]
    u = np.eye(dim, dtype=complex)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        u = _ordered_product(_magnus4_steps(hfun, t_a + done * h, h, m)) @ u
        done += m
    return u


def _as_hfun(H):
    if isinstance(H, TimeDependentHamiltonian):
        return H.at
    if callable(H):
        return lambda ts: np.stack([np.asarray(H(float(t)), dtype=complex) for t in np.atleast_1d(ts)])
    raise TypeError("H must be an array, a TimeDependentHamiltonian or a callable")


def propagator(H, t_a: float, t_b: float, dt: float | None = None, *, steps_per_period: int = 256,
               check: bool = True) -> np.ndarray:
    """Time-ordered propagator of ``H`` from ``t_a`` to ``t_b`` (ns).

    Static arrays are exponentiated exactly. Periodic generators are integrated
    over one period and raised to the number of whole periods.
    """
    if t_b < t_a:
        raise ValueError("t_b must not precede t_a")
    if isinstance(H, np.ndarray):
        return matexp_unitary(H, t_b - t_a)
    span = t_b - t_a
    dim = _as_hfun(H)(np.array([t_a])).shape[-1]
    if span == 0:
        return np.eye(dim, dtype=complex)
    hfun = _as_hfun(H)
    period = getattr(H, "period", None)
    if period:
        n_per = int(span // period)
        u_per = _propagator_fine(hfun, t_a, t_a + period, steps_per_period)
        u = np.linalg.matrix_power(u_per, n_per) if n_per else np.eye(dim, dtype=complex)
        rem = span - n_per * period
        if rem > 1e-15:
            n_rem = max(1, int(math.ceil(rem / period * steps_per_period)))
            u = _propagator_fine(hfun, t_a + n_per * period, t_b, n_rem) @ u
        return u
    if dt is None:
        raise ValueError("a step size dt is required for non-periodic time-dependent generators")
    n = max(1, int(math.ceil(span / dt - 1e-9)))
    h = span / n
    if check:
        _check_step(H, hfun, t_a, h, n)
    return _propagator_fine(hfun, t_a, t_b, n)


def _check_step(H, hfun, t_a: float, h: float, n: int) -> None:
    h0 = hfun(np.array([t_a]))[0]
    w = np.linalg.eigvalsh((h0 + h0.conj().T) / 2)
    f_max = max(float(w[-1] - w[0]), float(getattr(H, "max_freq", 0.0)))
    if f_max > 0 and h > 1 / (20 * f_max):
        one = _propagator_fine(hfun, t_a, t_a + h, 1)
        two = _propagator_fine(hfun, t_a, t_a + h, 2)
        est = float(np.linalg.norm(one - two, 2)) * n
        warnings.warn(
            f"time step {h:.3g} ns exceeds 1/(20 f_max) = {1 / (20 * f_max):.3g} ns; "
            f"estimated propagator error {est:.2e}",
            stacklevel=3,
        )


def propagate(H, state: np.ndarray, t_span: tuple[float, float], dt: float | None = None, **kw) -> np.ndarray:
    """Evolve a ket, an operator (``U @ state``) or, if ``rho=True``, a density matrix."""
    rho = kw.pop("rho", False)
    u = propagator(H, t_span[0], t_span[1], dt, **kw)
    state = np.asarray(state, dtype=complex)
    if rho:
        return u @ state @ u.conj().T
    return u @ state


# ---------------------------------------------------------------- schedule simulation


def schedule_hamiltonian(H0: np.ndarray, segments: Sequence[PulseSegment], reg: SpinRegister | None = None,
                         basis: np.ndarray | None = None) -> TimeDependentHamiltonian:
    """Generator for an interval during which ``segments`` are all active."""
    H0 = np.asarray(H0, dtype=complex)
    terms = []
    for p in segments:
        if p.amp == 0:
            continue
        x, y = drive_operators(p, reg, H0.shape[0], basis)
        w, ph = 2 * math.pi * p.freq, p.phase
        terms.append((p.rabi * x, lambda t, w=w, ph=ph: np.cos(w * t + ph)))
        terms.append((p.rabi * y, lambda t, w=w, ph=ph: np.sin(w * t + ph)))
    freqs = {p.freq for p in segments if p.amp != 0}
    period = None
    if len(freqs) == 1 and next(iter(freqs)) > 0:
        period = 1 / next(iter(freqs))
    return TimeDependentHamiltonian(H0, terms, period, max((abs(p.freq) for p in segments), default=0.0))


def _breakpoints(schedule: PulseSchedule, t_a: float, t_b: float) -> list[float]:
    pts = {t_a, t_b}
    for s in schedule.segments:
        pts.update((s.start, s.end))
    for r in schedule.detuning_ramps:
        pts.update(r[:2])
    return sorted(p for p in pts if t_a <= p <= t_b)


def simulate_schedule(schedule: PulseSchedule, H0, reg: SpinRegister | None = None, *,
                      basis: np.ndarray | None = None, t_span: tuple[float, float] | None = None,
                      steps_per_period: int = 256, dt: float | None = None) -> np.ndarray:
    """Lab-frame propagator of ``H0`` plus the schedule.

    ``H0`` may be a static array or a callable ``omega0 -> array`` used with
    detuning ramps (resonator frequency held constant between breakpoints).
    """
    t_a, t_b = t_span if t_span is not None else (0.0, schedule.total_time)
    pts = _breakpoints(schedule, t_a, t_b)
    u = None
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 1e-15:
            continue
        mid = (lo + hi) / 2
        if callable(H0):
            ramp = [r for r in schedule.detuning_ramps if r[0] <= mid <= r[1]]
            if not ramp:
                raise ValueError(f"no resonator frequency defined at t = {mid:.4g} ns")
            h_static = np.asarray(H0(ramp[-1][2]), dtype=complex)
        else:
            h_static = np.asarray(H0, dtype=complex)
        active = [s for s in schedule.segments if s.start <= mid <= s.end and s.amp > 0]
        if not active:
            step = matexp_unitary(h_static, hi - lo)
        else:
            gen = schedule_hamiltonian(h_static, active, reg, basis)
            step_dt = dt if dt is not None else 1 / (40 * max(gen.max_freq, 1e-9))
            step = propagator(gen, lo, hi, step_dt, steps_per_period=steps_per_period, check=False)
        u = step if u is None else step @ u
    if u is None:
        dim = (H0(0.0) if callable(H0) else np.asarray(H0)).shape[0]
        u = np.eye(dim, dtype=complex)
    return u


def schedule_trace(schedule: PulseSchedule, H0, psi0: np.ndarray, times: Sequence[float],
                   reg: SpinRegister | None = None, **kw) -> np.ndarray:
    """States at each of the increasing ``times`` (rows)."""
    out = []
    psi = np.asarray(psi0, dtype=complex)
    t_prev = 0.0
    for t in times:
        if t < t_prev - 1e-12:
            raise ValueError("times must be increasing and non-negative")
        if t > t_prev:
            psi = simulate_schedule(schedule, H0, reg, t_span=(t_prev, t), **kw) @ psi
        out.append(psi.copy())
        t_prev = max(t, t_prev)
    return np.array(out)


# ---------------------------------------------------------------- single-qubit compilation


@dataclass(frozen=True)
class Transition:
    """A drivable transition: target (site or level pair), gap (GHz) and relative matrix element."""

    target: object
    gap: float
    coupling: float = 1.0


def rotation_pulse(axis_phase: float, theta: float, transition: Transition, hw: HardwareCalibration,
                   t_start: float = 0.0) -> PulseSegment:
    """Resonant segment implementing a rotation by ``theta`` about the in-plane axis at ``axis_phase``."""
    if not theta > 0:
        raise ValueError(f"rotation angle must be positive, got {theta}")
    rabi = hw.rabi * transition.coupling
    tau = theta / (2 * math.pi * rabi)
    return PulseSegment(transition.target, transition.gap, hw.amp_for(), axis_phase,
                        t_start + tau / 2, tau, g_perp=hw.g_perp)


def semiresonant_phase(delta: float, gamma: float) -> tuple[float, float]:
    """Phase and duration of a detuned ``2 pi`` oscillation.

    ``gamma`` is the transition matrix element of the drive (half the Rabi
    frequency of a spin 1/2) and ``delta`` the detuning of the other level
    above the driven one (gap minus drive frequency). The driven state
    returns multiplied by ``exp(+i phi)`` relative to free evolution.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    omega = math.sqrt(delta * delta + 4 * gamma * gamma)
    return math.pi * (1 - delta / omega), 1 / omega


def semiresonant_detuning(phi: float, gamma: float) -> float:
    """Detuning giving acquired phase ``phi`` (taken modulo 2 pi into (0, 2 pi))."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    phi = phi % (2 * math.pi)
    if phi == 0:
        raise ValueError("a zero phase needs infinite detuning")
    r = 1 - phi / math.pi
    return 2 * gamma * r / math.sqrt(1 - r * r)


def hadamard_schedule(qubit: Transition, hw: HardwareCalibration, t_start: float = 0.0) -> PulseSchedule:
    """``R_y(pi/2)`` then ``R_x(pi)``: equals ``-i`` times the normalized Hadamard in the qubit frame."""
    p1 = rotation_pulse(math.pi / 2, math.pi / 2, qubit, hw, t_start)
    p2 = rotation_pulse(0.0, math.pi, qubit, hw, p1.end)
    return PulseSchedule([p1, p2], metadata={"gate": "hadamard", "global_phase": -math.pi / 2})


def check_selectivity(tau: float, freq: float, others: dict[str, float], what: str = "segment",
                      factor: float = 0.2) -> list[str]:
    """Names of transitions closer than the bandwidth rule allows (``1/tau < factor * separation``)."""
    bad = []
    for name, f in others.items():
        sep = abs(f - freq)
        if not 1 / tau < factor * sep:
            bad.append(f"{name} at {f:.6g} GHz (separation {sep:.3g} GHz, bandwidth {1 / tau:.3g} GHz)")
    return bad


# ---------------------------------------------------------------- two-qubit gate analysis


def conditional_phase(m: np.ndarray) -> float:
    """``phi00 - phi01 - phi10 + phi11`` of a 4x4 block, wrapped to (-pi, pi]."""
    ph = np.angle(np.diag(m))
    x = ph[0] - ph[1] - ph[2] + ph[3]
    return float(math.remainder(x, 2 * math.pi))


def local_phase_correction(m: np.ndarray) -> np.ndarray:
    """Single-qubit z-phases (and a global phase) removing all but the conditional phase."""
    ph = np.angle(np.diag(m))
    return np.diag(np.exp(-1j * np.array([ph[0], ph[1], ph[2], ph[1] + ph[2] - ph[0]])))


def fidelity_up_to_local_phases(m: np.ndarray, target: np.ndarray) -> float:
    d = m.shape[0]
    return float(abs(np.trace(target.conj().T @ local_phase_correction(m) @ m)) ** 2 / d**2)


def cphi_matrix(phi: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(-1j * phi)])


# ---------------------------------------------------------------- switch-mediated gates


QUBIT_PROJECTIONS = ((0.5, 0.5), (0.5, -0.5), (-0.5, 0.5), (-0.5, -0.5))


@dataclass(frozen=True)
class DressedTrimer:
    H0: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    index: dict

    def state(self, m1: float, m2: float, m3: float) -> np.ndarray:
        return self.vectors[:, self.index[(m1, m2, m3)]]

    def energy(self, m1: float, m2: float, m3: float) -> float:
        return float(self.energies[self.index[(m1, m2, m3)]])

    def computational(self) -> np.ndarray:
        """Columns: dressed ``|00>, |01>, |10>, |11>`` with the switch down."""
        return np.stack([self.state(a, -0.5, b) for a, b in QUBIT_PROJECTIONS], axis=1)

    def computational_energies(self) -> np.ndarray:
        return np.array([self.energy(a, -0.5, b) for a, b in QUBIT_PROJECTIONS])


def dressed_trimer(spec) -> DressedTrimer:
    """Eigenstates of the trimer labelled by their dominant product state."""
    from .hamiltonians import build_trimer

    h0 = build_trimer(spec)
    reg = spec.register()
    w, v = eigendecompose(h0)
    index = {}
    for m in [(a, b, c) for a in (0.5, -0.5) for b in (0.5, -0.5) for c in (0.5, -0.5)]:
        k = int(np.argmax(np.abs(v[reg.basis_index(m), :])))
        if k in index.values():
            raise CompilationError("trimer eigenstates are too strongly mixed to be labelled by product states")
        index[m] = k
    return DressedTrimer(h0, w, v, index)


def _switch_transitions(spec, dressed: DressedTrimer):
    reg = spec.register()
    sp = site_spin_ops(reg, 1)
    s_plus = sp[0] + 1j * sp[1]
    out = {}
    for m1, m3 in QUBIT_PROJECTIONS:
        g = dressed.state(m1, -0.5, m3)
        e = dressed.state(m1, 0.5, m3)
        freq = dressed.energy(m1, 0.5, m3) - dressed.energy(m1, -0.5, m3)
        out[(m1, m3)] = (freq, abs(np.vdot(e, s_plus @ g)))
    return out


def _label(m1, m3) -> str:
    arrow = {0.5: "up", -0.5: "down"}
    return f"switch|q1={arrow[m1]},q2={arrow[m3]}"


def compile_cphi_switch(spec, phi: float, hw: HardwareCalibration, *, target=(0.5, 0.5),
                        t_start: float = 0.0) -> PulseSchedule:
    """Semi-resonant ``2 pi`` oscillation of the switch conditioned on the qubit pair ``target``.

    The drive sits below the dressed switch gap so that the driven pair
    acquires ``exp(-i phi)``; on the computational basis the result equals
    ``diag(1, 1, 1, exp(-i phi))`` up to single-qubit z-phases.
    """
    from .hamiltonians import switch_resonance

    nominal = {mm: switch_resonance(spec, *mm) for mm in QUBIT_PROJECTIONS}
    if len({round(f, 9) for f in nominal.values()}) < 4:
        raise CompilationError(
            "switch resonances are not all distinct for the four qubit states; no conditional drive is possible"
        )
    dressed = dressed_trimer(spec)
    trans = _switch_transitions(spec, dressed)
    freq0, element = trans[tuple(target)]
    gamma_me = hw.rabi * element / 2
    delta = 0.0 if math.isclose(phi % (2 * math.pi), math.pi) else semiresonant_detuning(2 * math.pi - phi, gamma_me)
    acquired, tau = semiresonant_phase(delta, gamma_me)
    freq = freq0 - delta
    others = {_label(*mm): f for mm, (f, _) in trans.items() if mm != tuple(target)}
    bad = check_selectivity(tau, freq, others)
    if bad:
        raise CompilationError("unresolved switch transitions: " + "; ".join(bad))
    seg = PulseSegment(1, freq, hw.amp_for(), 0.0, t_start + tau / 2, tau, g_perp=hw.g_perp)
    driven = QUBIT_PROJECTIONS.index(tuple(target))
    state_phases = [0.0] * 4
    state_phases[driven] = acquired
    return PulseSchedule(
        [seg],
        metadata={
            "gate": "cphi",
            "phi": phi,
            "driven_state": ["00", "01", "10", "11"][driven],
            "detuning": delta,
            "dressed_gap": freq0,
            "dressed_element": element,
            "expected_state_phases": state_phases,
        },
    )


def compile_cz_switch(spec, hw: HardwareCalibration, *, target=(0.5, 0.5), t_start: float = 0.0) -> PulseSchedule:
    """Resonant ``2 pi`` pulse on the switch for one qubit configuration (default both up)."""
    sched = compile_cphi_switch(spec, math.pi, hw, target=target, t_start=t_start)
    sched.metadata["gate"] = "cz"
    return sched


@dataclass
class GateReport:
    block: np.ndarray
    fidelity: float
    conditional_phase: float
    state_phases: np.ndarray
    leakage: float
    switch_excitation: float


def analyze_trimer_gate(spec, schedule: PulseSchedule, target: np.ndarray, *, steps_per_period: int = 256) -> GateReport:
    """Simulate a switch schedule and reduce it to the dressed computational block.

    Phases are reported relative to free evolution under the static trimer.
    """
    dressed = dressed_trimer(spec)
    reg = spec.register()
    T = schedule.total_time
    u = simulate_schedule(schedule, dressed.H0, reg, steps_per_period=steps_per_period)
    comp = dressed.computational()
    free = np.exp(2j * math.pi * dressed.computational_energies() * T)
    m = free[:, None] * (comp.conj().T @ u @ comp)
    switch_up = np.stack([dressed.state(a, 0.5, b) for a, b in QUBIT_PROJECTIONS], axis=1)
    exc = float(np.max(np.sum(np.abs(switch_up.conj().T @ u @ comp) ** 2, axis=0)))
    leak = float(np.max(1 - np.sum(np.abs(m) ** 2, axis=0)))
    return GateReport(m, fidelity_up_to_local_phases(m, target), conditional_phase(m),
                      np.angle(np.diag(m)), leak, exc)


def uxy_gate(Gamma: float, tau: float) -> np.ndarray:
    """Exchange-type gate with mixing angle ``pi Gamma tau`` (Gamma in GHz, tau in ns)."""
    if Gamma < 0:
        raise ValueError("Gamma must be non-negative")
    a = math.pi * Gamma * tau
    c, s = math.cos(a), 1j * math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=complex)


def xy_hamiltonian(Gamma: float) -> np.ndarray:
    """``Gamma (s_x1 s_x2 + s_y1 s_y2)`` on two spins 1/2."""
    reg = SpinRegister([0.5, 0.5])
    a = site_spin_ops(reg, 0)
    b = site_spin_ops(reg, 1)
    return Gamma * (a[0] @ b[0] + a[1] @ b[1])


# ---------------------------------------------------------------- photon-mediated phase


@dataclass
class PhotonGateReport:
    block: np.ndarray
    fidelity: float
    conditional_phase: float
    photon_residual: float
    top_fock_population: float


def _photon_setup(spec):
    from .hamiltonians import build_spin_photon, spin_photon_operators

    if len(spec.spins) != 2:
        raise ValueError("the photon-mediated gate needs exactly two spins")
    ops = spin_photon_operators(spec)
    dims = ops["dims"]
    h_spin = build_spin_photon(spec, 0.0) - sum(
        2 * g * (sx @ (ops["a"] + ops["a"].conj().T)) for g, (sx, _, _) in zip(spec.G, ops["spins"])
    )
    energies = np.real(np.diag(h_spin))

    def level_indices(k):
        local = [np.real(np.diag(spec.spins[k].g * spec.B * MU_B_GHZ_PER_T * spin_xyz(spec.spins[k].s)[2]
                                  + spec.spins[k].D * spin_xyz(spec.spins[k].s)[2] @ spin_xyz(spec.spins[k].s)[2]))]
        return np.argsort(local[0])

    lv1, lv2 = level_indices(0), level_indices(1)

    def flat(i1, i2, n):
        return int(np.ravel_multi_index((i1, i2, n), dims))

    def e_of(k, lv, j):
        sp = spec.spins[k]
        sz = np.real(np.diag(spin_xyz(sp.s)[2]))
        i = lv[j]
        return sp.g * spec.B * MU_B_GHZ_PER_T * sz[i] + sp.D * sz[i] ** 2

    return ops, dims, lv1, lv2, flat, e_of, energies


def compile_cphase_photon(spec, phi: float, hw: HardwareCalibration | None = None, *, idle_detuning: float = 3.0,
                          calibrate: bool = True, skip_phase_step: bool = False) -> PulseSchedule:
    """Resonator-frequency ramp for a photon-mediated controlled phase.

    Qubit 1 uses its two lowest levels (|1> excited); qubit 2 uses its two
    lowest levels and its second excited level as auxiliary |e>. Steps: emit
    from qubit 1, semi-resonant ``2 pi`` on the |1>-|e> gap of qubit 2,
    reabsorb on qubit 1.
    """
    ops, dims, lv1, lv2, flat, e_of, energies = _photon_setup(spec)
    if dims[1] < 3:
        raise ValueError("the second spin needs at least three levels for the auxiliary state")
    g1, g2 = spec.G
    gap1 = e_of(0, lv1, 1) - e_of(0, lv1, 0)
    gap2 = e_of(1, lv2, 2) - e_of(1, lv2, 1)
    sx1 = spin_xyz(spec.spins[0].s)[0]
    sx2 = spin_xyz(spec.spins[1].s)[0]
    c1 = 2 * g1 * abs(sx1[lv1[1], lv1[0]])
    c2 = 2 * g2 * abs(sx2[lv2[2], lv2[1]])
    if min(c1, c2) <= 0:
        raise CompilationError("the chosen transitions are not coupled to the resonator")
    t_swap = 1 / (4 * c1)
    w_idle = max(gap1, gap2) + idle_detuning

    def build(delta):
        acquired, t_sr = semiresonant_phase(delta, c2)
        ramps = [(0.0, t_swap, gap1)]
        t = t_swap
        if not skip_phase_step:
            # other level sits delta above: E_e - (E_1 + omega) = delta
            ramps.append((t, t + t_sr, gap2 - delta))
            t += t_sr
        ramps.append((t, t + t_swap, gap1))
        return PulseSchedule([], ramps, t + t_swap, {
            "gate": "cphase_photon", "phi": phi, "detuning": delta, "idle_frequency": w_idle,
            "step_coupling": c2, "swap_time": t_swap, "acquired_phase": acquired,
        })

    if skip_phase_step:
        return build(0.0)
    if math.isclose(phi % (2 * math.pi), 0.0, abs_tol=1e-12):
        raise CompilationError("a zero phase needs no phase step; use skip_phase_step")
    delta = 0.0 if math.isclose(phi % (2 * math.pi), math.pi) else semiresonant_detuning(2 * math.pi - phi, c2)
    sched = build(delta)
    if calibrate:
        # absorb dispersive shifts from spectator transitions with a secant search on the detuning
        def err(d):
            rep = analyze_photon_gate(spec, build(d))
            return math.remainder(rep.conditional_phase + phi, 2 * math.pi)

        d0, d1 = delta, delta + 0.05 * c2
        e0, e1 = err(d0), err(d1)
        for _ in range(20):
            if abs(e1) < 1e-9 or e1 == e0:
                break
            d0, d1, e0 = d1, d1 - e1 * (d1 - d0) / (e1 - e0), e1
            e1 = err(d1)
        sched = build(d1)
    if min(c1, c2) < 1e-3:
        warnings.warn("spin-photon coupling is below 1 MHz; the strong-coupling regime is doubtful", stacklevel=2)
    return sched


def analyze_photon_gate(spec, schedule: PulseSchedule) -> PhotonGateReport:
    from .hamiltonians import build_spin_photon

    ops, dims, lv1, lv2, flat, e_of, energies = _photon_setup(spec)
    comp = [flat(lv1[a], lv2[b], 0) for a in (0, 1) for b in (0, 1)]
    u = simulate_schedule(schedule, lambda w: build_spin_photon(spec, w))
    T = schedule.total_time
    sub = u[np.ix_(comp, comp)]
    m = np.exp(2j * math.pi * energies[comp] * T)[:, None] * sub
    n_op = np.real(np.diag(ops["n"]))
    photon = float(np.max([np.sum(np.abs(u[:, c]) ** 2 * n_op) for c in comp]))
    top = n_op == spec.n_max
    top_pop = float(np.max([np.sum(np.abs(u[top, c]) ** 2) for c in comp]))
    if top_pop > 1e-4:
        warnings.warn(f"top Fock level population {top_pop:.1e} exceeds 1e-4; raise n_max", stacklevel=2)
    return PhotonGateReport(m, fidelity_up_to_local_phases(m, cphi_matrix(schedule.metadata.get("phi", 0.0))),
                            conditional_phase(m), photon, top_pop)
