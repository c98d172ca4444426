"""Physical constants and unit conversions.

Energies are stored as linear frequencies in GHz and times in ns, so a
Hamiltonian ``H`` generates ``U = exp(-2j*pi*H*t)``.
"""

MU_B_GHZ_PER_T = 13.9962449
"""Bohr magneton over Planck's constant, GHz/T."""

MU_N_GHZ_PER_T = 7.6225932e-3
"""Nuclear magneton over Planck's constant, GHz/T."""

GHZ_PER_CM1 = 29.9792458
"""1 cm^-1 expressed in GHz."""

# (mu0 / 4 pi) * mu_B * mu_N / h, expressed in GHz * Angstrom^3.
DIPOLAR_GHZ_A3 = 1e-7 * 9.2740100783e-24 * 5.0507837461e-27 / 6.62607015e-34 / 1e-30 / 1e9


def cm1_to_ghz(x):
    return x * GHZ_PER_CM1


def ghz_to_cm1(x):
    return x / GHZ_PER_CM1


_TO_GHZ = {"ghz": 1.0, "mhz": 1e-3, "khz": 1e-6, "cm-1": GHZ_PER_CM1, "cm^-1": GHZ_PER_CM1}
_TO_NS = {"ns": 1.0, "us": 1e3, "µs": 1e3, "ms": 1e6, "ps": 1e-3}
_TO_T = {"t": 1.0, "mt": 1e-3}


def convert(value, unit, kind):
    """Convert ``value`` given in ``unit`` to the canonical unit of ``kind``.

    ``kind`` is one of ``"frequency"`` (GHz), ``"time"`` (ns) or ``"field"`` (T).
    """
    table = {"frequency": _TO_GHZ, "time": _TO_NS, "field": _TO_T}[kind]
    try:
        return value * table[unit.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown {kind} unit {unit!r}; expected one of {sorted(table)}") from None
