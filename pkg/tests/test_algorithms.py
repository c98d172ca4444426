import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molspin.algorithms import (GroverSpec, RabiModel, TfimSpec, TrotterPlan, TunnelingSpec, grover_qudit,
                                grover_unitary, heisenberg_from_uxy, jordan_wigner, pauli_conjugate,
                                spin_boson_map, tfim_step_circuit, trotterize, tunneling_simulation)
from molspin.algorithms.grover import grover_brute_force, optimal_iterations
from molspin.algorithms.mappings import rabi_boson_trace, rabi_qudit_trace, raw_ladder_element
from molspin.algorithms.trotter import (circuit_unitary, coupling_exponential, exact_propagator, heisenberg_exact,
                                        tfim_qudit_step, tfim_step_phase, trotter_error, trotter_step)
from molspin.algorithms.tunneling import tunneling_period
from molspin.pulses import CompilationError


# ---------------------------------------------------------------- Trotter


def test_trotter_plan_validation():
    with pytest.raises(ValueError):
        TrotterPlan([np.eye(2)], 1.0, n=0)
    with pytest.raises(ValueError):
        TrotterPlan([np.eye(2)], 1.0, order=3)
    with pytest.raises(ValueError):
        TrotterPlan([np.eye(2), np.eye(3)], 1.0)
    with pytest.raises(ValueError):
        TrotterPlan([], 1.0)


def test_commuting_terms_are_exact():
    h1 = np.diag([1.0, -1.0])
    h2 = np.diag([0.3, 0.7])
    plan = TrotterPlan([h1, h2], 2.0, 1)
    assert np.allclose(trotterize(plan), exact_propagator(plan))


@pytest.mark.parametrize("order", [1, 2])
def test_trotter_converges(order):
    h1, h2 = TfimSpec().terms()
    errs = [trotter_error(TrotterPlan([h1, h2], 1.0, n, order)) for n in (5, 10, 20)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("tau", [0.01, 0.1, 0.37])
def test_tfim_gate_list_matches_slice(tau):
    spec = TfimSpec(0.7, 1.3)
    u = circuit_unitary(tfim_step_circuit(spec, tau))
    h1, h2 = spec.terms()
    assert np.allclose(tfim_step_phase(spec, tau) * u, trotter_step([h1, h2], tau), atol=1e-12)


def test_tfim_qudit_step_rotation_count():
    rots, _, u = tfim_qudit_step(TfimSpec(), 0.1)
    h1, h2 = TfimSpec().terms()
    assert np.allclose(u, trotter_step([h1, h2], 0.1))
    assert len(rots) <= 6


@pytest.mark.parametrize("axes", [("x", "x"), ("y", "y"), ("x", "y"), ("z", "x")])
@pytest.mark.parametrize("phi", [0.3, 1.7])
def test_pauli_conjugation_identity(axes, phi):
    w, w_dag = pauli_conjugate(axes)
    zz = coupling_exponential(("z", "z"), phi)
    assert np.allclose(w_dag @ zz @ w, coupling_exponential(axes, phi))


def test_pauli_conjugate_rejects_bad_axis():
    with pytest.raises(ValueError):
        pauli_conjugate(("q", "x"))


@settings(max_examples=25)
@given(st.floats(0.05, 12.0))
def test_heisenberg_from_uxy(theta):
    u = circuit_unitary(heisenberg_from_uxy(0.01, theta))
    assert np.allclose(np.exp(1j * theta / 4) * u, heisenberg_exact(theta), atol=1e-10)


def test_heisenberg_needs_positive_gamma():
    with pytest.raises(ValueError):
        heisenberg_from_uxy(0.0, 1.0)


# ---------------------------------------------------------------- mappings


@pytest.mark.parametrize("S", [1.0, 1.5, 2.5])
def test_exact_boson_map_matrix_elements(S):
    bmap = spin_boson_map(S)
    d = int(2 * S) + 1
    for n in range(d - 1):
        assert bmap.a_dag[n + 1, n] == pytest.approx(math.sqrt(n + 1))
    comm = bmap.a @ bmap.a_dag - bmap.a_dag @ bmap.a
    assert np.allclose(comm[:-1, :-1], np.eye(d - 1))


def test_raw_map_uses_spin_ladder():
    S = 1.5
    bmap = spin_boson_map(S, exact=False)
    for n in range(3):
        assert bmap.a_dag[n + 1, n] == pytest.approx(raw_ladder_element(S, n))


def _rms_vs_oracle(occ, exact):
    model = RabiModel(g=0.05)
    times = np.linspace(0, 10, 101)
    oracle = rabi_boson_trace(model, 40, times, occ)
    return float(np.sqrt(np.mean((oracle - rabi_qudit_trace(model, 1.5, times, occ, exact=exact)) ** 2)))


def test_truncation_error_grows_with_occupation():
    errs = [_rms_vs_oracle(occ, True) for occ in (0, 1, 2)]
    assert errs[0] < errs[1] < errs[2]
    assert errs[0] < 1e-4


def test_raw_map_is_worse_than_rescaled_map():
    for occ in (0, 1, 2):
        assert _rms_vs_oracle(occ, False) > 10 * _rms_vs_oracle(occ, True)


def test_trotterized_qudit_rabi_converges():
    model = RabiModel()
    times = np.linspace(0, 5, 11)
    exact = rabi_qudit_trace(model, 1.5, times)
    coarse = np.max(np.abs(rabi_qudit_trace(model, 1.5, times, trotter_steps=10) - exact))
    fine = np.max(np.abs(rabi_qudit_trace(model, 1.5, times, trotter_steps=40) - exact))
    assert fine < coarse
    assert fine < 1e-3


@pytest.mark.parametrize("n", [2, 3, 4])
def test_jordan_wigner_anticommutation(n):
    ops = [jordan_wigner(j, n) for j in range(n)]
    for j, (cj, cjd) in enumerate(ops):
        for k, (ck, ckd) in enumerate(ops):
            assert np.allclose(cj @ ckd + ckd @ cj, np.eye(2**n) * (j == k))
            assert np.allclose(cj @ ck + ck @ cj, 0)
    with pytest.raises(ValueError):
        jordan_wigner(n, n)


# ---------------------------------------------------------------- tunnelling


def test_tunneling_modes_agree():
    spec = TunnelingSpec()
    times = np.linspace(0, 20, 201)
    exact = tunneling_simulation(spec, times)
    qudit = tunneling_simulation(spec, times, "qudit")
    assert np.allclose(exact.sz, qudit.sz, atol=1e-10)
    assert qudit.rotations_per_step > 0
    assert qudit.norm_error < 1e-10


def test_tunneling_period_s1():
    assert tunneling_period(TunnelingSpec(1.0, -1.0, 0.05)) == pytest.approx(10.0)


def test_tunneling_validation():
    with pytest.warns(UserWarning):
        TunnelingSpec(1.0, -1.0, 0.5)
    with pytest.raises(ValueError):
        TunnelingSpec(0.5)
    with pytest.raises(ValueError):
        tunneling_simulation(TunnelingSpec(), [0.0, 1.0, 3.0], "qudit")
    with pytest.raises(ValueError):
        tunneling_simulation(TunnelingSpec(), [0.0, 1.0], "other")


# ---------------------------------------------------------------- Grover


@pytest.mark.parametrize("d", [3, 4, 5, 8])
def test_grover_unitary_matches_brute_force(d):
    k = optimal_iterations(d)
    for marked in range(d):
        assert np.allclose(grover_unitary(d, marked), grover_brute_force(d, marked, k), atol=1e-12)


def test_grover_d3_single_iterate_value():
    assert grover_unitary(3, 0)[0] == pytest.approx(25 / 27)


def test_grover_validation():
    with pytest.raises(ValueError):
        grover_unitary(2, 0)
    with pytest.raises(ValueError):
        grover_unitary(3, 3)
    with pytest.raises(CompilationError):
        GroverSpec(3, 0, (1.0, 1.0))
    with pytest.raises(ValueError):
        GroverSpec(3, 0, (1.0,))


def test_grover_unitary_mode_result():
    res = grover_qudit(GroverSpec(3, 1, (1.0, 1.3)), "unitary")
    assert res.populations[1] == pytest.approx(25 / 27)
    assert res.schedule is None
    with pytest.raises(ValueError):
        grover_qudit(GroverSpec(3, 1, (1.0, 1.3)), "annealing")
