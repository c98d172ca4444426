import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from molspin.core import SpinRegister, eigendecompose, is_hermitian, spin_xyz
from molspin.hamiltonians import (ExchangeTerm, HamiltonianSpec, HyperfineQuditSpec, PhotonSpin, SpinPhotonSpec,
                                  TrimerSpec, ZeemanTerm, ZfsTerm, boson_operators, build_hyperfine_qudit,
                                  build_spin_photon, build_trimer, effective_xy_coupling, g_tensor,
                                  stevens_operator, switch_resonance, xy_coupling_exact)
from molspin.units import MU_B_GHZ_PER_T


@pytest.mark.parametrize("g,B", [(2.0, 0.35), (1.8, 1.0), (4.25, 5.0)])
def test_zeeman_splitting(g, B):
    reg = SpinRegister([0.5])
    h = HamiltonianSpec(reg, [ZeemanTerm(0, g, B)]).build()
    w, _ = eigendecompose(h)
    assert w[1] - w[0] == pytest.approx(g * MU_B_GHZ_PER_T * B)


def test_zeeman_up_is_index_zero_and_higher_for_positive_field():
    reg = SpinRegister([0.5])
    h = HamiltonianSpec(reg, [ZeemanTerm(0, 2.0, 1.0)]).build()
    assert h[0, 0].real > h[1, 1].real


def test_g_tensor_rotation_preserves_principal_values():
    g = g_tensor((2.0, 4.25, 6.5), (0.3, 0.7, -1.1))
    assert np.allclose(np.sort(np.linalg.eigvalsh(g)), [2.0, 4.25, 6.5])


@given(st.floats(-3, 3), st.sampled_from([0.5, 1.0, 1.5]))
def test_isotropic_exchange_multiplets(J, s):
    reg = SpinRegister([s, s])
    h = HamiltonianSpec(reg, [ExchangeTerm((0, 1), J_iso=J)]).build()
    w = np.linalg.eigvalsh(h)
    totals = np.arange(0, 2 * s + 1)
    expected = sorted(J / 2 * (S * (S + 1) - 2 * s * (s + 1)) for S in totals for _ in range(int(2 * S + 1)))
    assert np.allclose(np.sort(w), expected, atol=1e-10)


def test_exchange_same_site_rejected():
    with pytest.raises(ValueError):
        HamiltonianSpec(SpinRegister([0.5, 0.5]), [ExchangeTerm((0, 0), J_iso=1.0)]).build()


def test_empty_hamiltonian_rejected():
    with pytest.raises(ValueError):
        HamiltonianSpec(SpinRegister([0.5]), []).build()


@pytest.mark.parametrize("s", [1.0, 1.5, 2.5])
def test_zfs_axial_levels(s):
    d = -1.0
    h = HamiltonianSpec(SpinRegister([s]), [ZfsTerm(0, d)]).build()
    m = s - np.arange(int(2 * s) + 1)
    assert np.allclose(np.diag(h).real, d * m**2)


@pytest.mark.parametrize("k,q", [(2, 0), (2, 2), (2, -2), (4, 0), (4, 4)])
def test_stevens_operators_hermitian(k, q):
    assert is_hermitian(stevens_operator(k, q, 2.5))


def test_stevens_o20_definition():
    s = 1.5
    sz = spin_xyz(s)[2]
    assert np.allclose(stevens_operator(2, 0, s), 3 * sz @ sz - s * (s + 1) * np.eye(4))


@pytest.mark.parametrize("k,q,s", [(3, 0, 2.0), (4, 0, 1.0), (2, 3, 1.5)])
def test_stevens_invalid(k, q, s):
    with pytest.raises(ValueError):
        stevens_operator(k, q, s)


def test_trimer_hermitian_and_switch_resonances_distinct():
    spec = TrimerSpec.reference()
    assert is_hermitian(build_trimer(spec))
    freqs = {round(switch_resonance(spec, a, b), 9) for a in (0.5, -0.5) for b in (0.5, -0.5)}
    assert len(freqs) == 4


def test_hyperfine_qudit_dimension_and_register_check():
    spec = HyperfineQuditSpec(A=(0.1, 0.1, 0.9), p=0.05, I=1.5, B=0.3)
    h = build_hyperfine_qudit(spec)
    assert h.shape == (8, 8)
    assert is_hermitian(h)
    with pytest.raises(ValueError):
        build_hyperfine_qudit(spec, SpinRegister([0.5, 0.5]))


def test_boson_operators_commutator_below_truncation():
    a, n = boson_operators(6)
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(comm[:-1, :-1], np.eye(6))
    assert np.allclose(a.conj().T @ a, n)


def test_spin_photon_hamiltonian_shape():
    spec = SpinPhotonSpec(12.0, (PhotonSpin(0.5), PhotonSpin(1.0, 2.0, 1.0)), (0.01, 0.01), 4, 0.3)
    h = build_spin_photon(spec)
    assert h.shape == (2 * 3 * 5,) * 2
    assert is_hermitian(h)
    with pytest.raises(ValueError):
        SpinPhotonSpec(12.0, (PhotonSpin(0.5),), (0.01, 0.02))


def test_effective_xy_coupling_matches_exact_in_perturbative_limit():
    J, g1, g2, B = 0.05, 2.0, 4.0, 5.0
    approx = effective_xy_coupling(J, g1, g2, B)
    exact = xy_coupling_exact(J, g1, g2, B)
    assert approx == pytest.approx(exact, rel=0.05)


def test_effective_xy_coupling_degenerate():
    with pytest.raises(ValueError):
        effective_xy_coupling(0.1, 2.0, 2.0, 1.0)
    with pytest.warns(UserWarning):
        effective_xy_coupling(1.0, 2.0, 2.1, 1.0)
