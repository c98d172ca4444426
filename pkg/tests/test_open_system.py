import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molspin.core import PAULI, SpinRegister, spin_xyz
from molspin.open_system import (BathCoupling, KrausChannel, LindbladTerm, NoiseModel, bath_rate_matrix,
                                 cluster_bath_rates, dephasing_channel, dephasing_toy_model, dipolar_tensor,
                                 ensemble_echo, expectation_pauli, kraus_apply, lindblad_evolve, lindblad_exact,
                                 liouvillian, measure_z, partial_trace, pure_density, purity, relaxation_channel,
                                 validate_density)

REG = SpinRegister([0.5])


def _random_state(rng, d):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


@settings(max_examples=20)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 30.0))
def test_lindblad_preserves_trace_and_hermiticity(seed, t):
    rng = np.random.default_rng(seed)
    rho0 = pure_density(_random_state(rng, 2))
    h = 0.3 * spin_xyz(0.5)[0]
    terms = NoiseModel(T1=8.0, T2=5.0).terms(REG)
    rho = lindblad_exact(h, terms, rho0, t)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


def test_rk4_matches_liouvillian_exponential():
    rng = np.random.default_rng(1)
    rho0 = pure_density(_random_state(rng, 2))
    h = 0.2 * spin_xyz(0.5)[0] + 0.1 * spin_xyz(0.5)[2]
    terms = NoiseModel(T1=20.0, T2=10.0).terms(REG)
    times = [1.0, 5.0, 12.0]
    states = lindblad_evolve(h, terms, rho0, 12.0, times=times)
    for t, rho in zip(times, states):
        assert np.allclose(rho, lindblad_exact(h, terms, rho0, t), atol=1e-7)


def test_liouvillian_shape_and_trace_preservation():
    terms = NoiseModel(T1=3.0, T2=2.0).terms(REG)
    L = liouvillian(np.zeros((2, 2)), terms)
    assert L.shape == (4, 4)
    assert np.allclose(np.eye(2).reshape(-1) @ L, 0)


def test_kraus_completeness_enforced():
    with pytest.raises(ValueError):
        KrausChannel([0.5 * np.eye(2)])
    with pytest.raises(ValueError):
        KrausChannel([])


@pytest.mark.parametrize("t", [0.0, 1.0, 5.0])
def test_channel_composition(t):
    rho = np.full((2, 2), 0.5, dtype=complex)
    ch = dephasing_channel(t, 4.0).compose(dephasing_channel(2.0, 4.0))
    assert np.allclose(kraus_apply(ch, rho), kraus_apply(dephasing_channel(t + 2.0, 4.0), rho))


def test_relaxation_ends_in_ground_state():
    rho = kraus_apply(relaxation_channel(1e3, 1.0), np.diag([1.0, 0.0]))
    assert np.allclose(rho, np.diag([0.0, 1.0]))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(T1=-1.0)
    with pytest.warns(UserWarning):
        NoiseModel(T1=1.0, T2=3.0)
    with pytest.raises(ValueError):
        LindbladTerm(np.eye(2), -1.0)


def test_validate_density():
    with pytest.raises(ValueError):
        validate_density(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        validate_density(np.diag([1.2, -0.2]))
    assert purity(np.eye(2) / 2) == pytest.approx(0.5)


def test_partial_trace_product_state():
    rng = np.random.default_rng(2)
    a = pure_density(_random_state(rng, 2))
    b = pure_density(_random_state(rng, 3))
    rho = np.kron(a, b)
    assert np.allclose(partial_trace(rho, (2, 3), [0]), a)
    assert np.allclose(partial_trace(rho, (2, 3), [1]), b)
    with pytest.raises(IndexError):
        partial_trace(rho, (2, 3), [2])


@pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
def test_dephasing_toy_model(p):
    a, b = 0.6, 0.8
    rho = dephasing_toy_model(a, b, p)
    assert rho[0, 0].real == pytest.approx(a * a)
    assert abs(rho[0, 1]) <= a * b + 1e-12
    assert np.trace(rho).real == pytest.approx(1.0)


def test_measure_z_and_pauli_expectations(rng):
    psi = _random_state(rng, 2)
    rho = pure_density(psi)
    for ax in "xyz":
        assert expectation_pauli(rho, REG, 0, ax) == pytest.approx(np.trace(rho @ PAULI[ax]).real)
    p, post = measure_z(rho, REG, 0, 0)
    assert p == pytest.approx(abs(psi[0]) ** 2)
    assert np.allclose(post, np.diag([1.0, 0.0]))


def test_dipolar_tensor_traceless():
    d = dipolar_tensor((1.0, 2.0, 3.0), 2.0, 5.58)
    assert np.trace(d) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        dipolar_tensor((0, 0, 0), 2.0, 1.0)


def test_bath_rate_matrix_symmetric_and_single_spin():
    reg = SpinRegister([0.5, 0.5])
    C = np.array([[1.0, 0.3], [0.3, 2.0]])
    v = np.eye(4)
    g = bath_rate_matrix(v, BathCoupling(C), reg)
    assert np.allclose(g, g.T)
    # |up,up> vs |down,down>: both spins flip
    assert g[0, 3] == pytest.approx(C.sum())
    with pytest.raises(ValueError):
        BathCoupling(np.array([[1.0, 0.2], [0.3, 1.0]]))


def test_cluster_kinds():
    with pytest.raises(ValueError):
        cluster_bath_rates("other", BathCoupling(np.eye(7)))


def test_hahn_echo_refocuses_static_spread():
    tau, sigma = 5.0, 0.05
    free = ensemble_echo(tau, sigma, echo=False)
    assert free == pytest.approx(math.exp(-((2 * math.pi * sigma * tau) ** 2) / 2), rel=1e-3)
    assert ensemble_echo(tau, sigma) == pytest.approx(1.0, abs=1e-6)
    assert ensemble_echo(tau, sigma, T2=50.0) == pytest.approx(math.exp(-2 * tau / 50.0), rel=1e-6)
