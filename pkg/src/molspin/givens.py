"""Decomposition of unitaries and isometries into adjacent two-level rotations.

A rotation on levels ``(upper, upper + 1)`` acts in that ordered pair as
``[[c, -i s e^{-i phi}], [-i s e^{i phi}, c]]`` with ``c = cos(theta/2)``,
``s = sin(theta/2)``: the resonant-pulse rotation of a two-level transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GivensRotation:
    upper: int
    theta: float
    phi: float

    @property
    def lower(self) -> int:
        return self.upper + 1

    def block(self) -> np.ndarray:
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        return np.array([[c, -1j * s * np.exp(-1j * self.phi)], [-1j * s * np.exp(1j * self.phi), c]])

    def matrix(self, d: int) -> np.ndarray:
        m = np.eye(d, dtype=complex)
        i = self.upper
        m[i:i + 2, i:i + 2] = self.block()
        return m

    def inverse(self) -> "GivensRotation":
        return GivensRotation(self.upper, self.theta, self.phi + math.pi)


def _zero_upper(a: complex, b: complex) -> tuple[float, float]:
    """Rotation whose inverse moves the amplitude of the upper entry ``a`` into ``b``."""
    if abs(b) == 0:
        return (math.pi, 0.0) if abs(a) > 0 else (0.0, 0.0)
    ratio = 1j * a / b
    return 2 * math.atan(abs(ratio)), -float(np.angle(ratio))


def _zero_lower(a: complex, b: complex) -> tuple[float, float]:
    """Rotation whose inverse moves the amplitude of the lower entry ``b`` into ``a``."""
    if abs(a) == 0:
        return (math.pi, 0.0) if abs(b) > 0 else (0.0, 0.0)
    ratio = 1j * b / a
    return 2 * math.atan(abs(ratio)), float(np.angle(ratio))


def givens_decompose(W: np.ndarray, targets: Sequence[int] | None = None, tol: float = 1e-12):
    """Adjacent-rotation sequence reproducing the columns of ``W``.

    ``W`` is ``d x k``; column ``c`` is the image of basis state ``targets[c]``
    (default: ``0..k-1``). Returns ``(rotations, phases)`` with rotations in
    time order, such that applying them and then ``diag(exp(1j * phases))``
    maps each ``|targets[c]>`` to ``W[:, c]``.
    """
    W = np.asarray(W, dtype=complex)
    d, k = W.shape
    targets = list(range(k)) if targets is None else [int(t) for t in targets]
    if len(targets) != k or len(set(targets)) != k:
        raise ValueError("one distinct target per column is required")
    if np.max(np.abs(W.conj().T @ W - np.eye(k))) > 1e-9:
        raise ValueError("columns must be orthonormal")
    A = W.copy()
    recorded: list[GivensRotation] = []
    fixed: set[int] = set()

    def apply_inverse(rot: GivensRotation):
        i = rot.upper
        A[i:i + 2, :] = rot.block().conj().T @ A[i:i + 2, :]

    order = sorted(range(k), key=lambda c: -targets[c])
    for c in order:
        t = targets[c]
        free_rows = [r for r in range(d) if r not in fixed]
        above = [r for r in free_rows if r < t]
        below = [r for r in free_rows if r > t]
        if above and above != list(range(above[0], t)) or below and below != list(range(t + 1, below[-1] + 1)):
            raise ValueError("targets must leave contiguous free levels around each column")
        for r in above:
            theta, phi = _zero_upper(A[r, c], A[r + 1, c])
            rot = GivensRotation(r, theta, phi)
            apply_inverse(rot)
            recorded.append(rot)
        for r in reversed(below):
            theta, phi = _zero_lower(A[r - 1, c], A[r, c])
            rot = GivensRotation(r - 1, theta, phi)
            apply_inverse(rot)
            recorded.append(rot)
        fixed.add(t)
    delta = np.zeros(d)
    for c in range(k):
        delta[targets[c]] = float(np.angle(A[targets[c], c]))
    # W = G_1 ... G_n D; push D to the end of the sequence in time
    shifted = [GivensRotation(g.upper, g.theta, g.phi + delta[g.upper] - delta[g.lower]) for g in recorded]
    rotations = [g for g in reversed(shifted) if abs(math.remainder(g.theta, 4 * math.pi)) > tol]
    return rotations, delta


def givens_unitary(rotations: Sequence[GivensRotation], phases: np.ndarray, d: int) -> np.ndarray:
    u = np.eye(d, dtype=complex)
    for g in rotations:
        u = g.matrix(d) @ u
    return np.diag(np.exp(1j * np.asarray(phases))) @ u
