import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from molspin.givens import GivensRotation, givens_decompose, givens_unitary


@settings(max_examples=40)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_unitary_reconstruction(d, seed):
    u = unitary_group.rvs(d, random_state=seed)
    rots, phases = givens_decompose(u)
    assert np.allclose(givens_unitary(rots, phases, d), u, atol=1e-10)
    assert len(rots) <= d * (d - 1) // 2
    assert all(0 <= g.upper < d - 1 for g in rots)


@settings(max_examples=30)
@given(st.integers(3, 6), st.integers(1, 2), st.integers(0, 2**31 - 1))
def test_isometry_columns_reproduced(d, k, seed):
    w = unitary_group.rvs(d, random_state=seed)[:, :k]
    targets = list(range(d - k, d))
    rots, phases = givens_decompose(w, targets)
    u = givens_unitary(rots, phases, d)
    for c, t in enumerate(targets):
        assert np.allclose(u[:, t], w[:, c], atol=1e-10)


def test_rotation_inverse_and_block_unitarity():
    g = GivensRotation(1, 0.8, 0.3)
    m = g.matrix(4)
    assert np.allclose(m @ g.inverse().matrix(4), np.eye(4))
    assert np.allclose(m.conj().T @ m, np.eye(4))


def test_identity_needs_no_rotations():
    rots, phases = givens_decompose(np.eye(4))
    assert rots == []
    assert np.allclose(phases, 0)


@pytest.mark.parametrize("targets", [[0, 0], [1]])
def test_bad_targets(targets):
    w = np.eye(4)[:, :2]
    with pytest.raises(ValueError):
        givens_decompose(w, targets)


def test_non_orthonormal_rejected():
    with pytest.raises(ValueError):
        givens_decompose(np.ones((3, 2)))
