import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from qsuff.errors import NotADensityMatrix, NonHermitianInput
from qsuff.linalg import (
    X, Y, Z,
    as_density,
    direct_sum,
    hermitian_eig,
    is_density,
    is_faithful,
    kms_inner,
    matrix_from_json,
    matrix_to_json,
    mlog,
    mpow,
    msqrt,
    partial_trace,
    positive_part,
    random_density,
    random_unitary,
    support_projector,
    trace_positive_part,
)


def _state(seed, d, rank=None):
    return random_density(d, np.random.default_rng(seed), rank=rank)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_sqrt_matches_scipy(seed, d):
    rho = _state(seed, d)
    np.testing.assert_allclose(msqrt(rho), sla.sqrtm(rho), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5), st.floats(-2.0, 2.0))
def test_power_matches_scipy(seed, d, p):
    rho = _state(seed, d)
    np.testing.assert_allclose(mpow(rho, p), sla.fractional_matrix_power(rho, p), atol=1e-7, rtol=1e-7)


def test_log_matches_scipy(rng):
    rho = random_density(4, rng)
    np.testing.assert_allclose(mlog(rho), sla.logm(rho), atol=1e-10)


def test_eig_reconstructs(rng):
    h = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    h = h + h.conj().T
    es = hermitian_eig(h)
    np.testing.assert_allclose(es.reconstruct(), h, atol=1e-12)
    assert np.all(np.diff(es.eigenvalues) >= 0)


def test_spectral_projectors_merge_degenerate():
    vals, projs = hermitian_eig(np.diag([1.0, 1.0, 3.0])).spectral_projectors()
    np.testing.assert_allclose(vals, [1.0, 3.0])
    assert [round(np.trace(p).real) for p in projs] == [2, 1]


def test_positive_part_trace():
    h = np.diag([2.0, -1.0, 0.5]).astype(complex)
    np.testing.assert_allclose(positive_part(h), np.diag([2.0, 0.0, 0.5]))
    assert trace_positive_part(h) == pytest.approx(2.5)


def test_support_of_rank_deficient(rng):
    rho = random_density(4, rng, rank=2)
    p = support_projector(rho)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    assert np.trace(p).real == pytest.approx(2.0)
    np.testing.assert_allclose(p @ rho, rho, atol=1e-12)
    assert not is_faithful(rho)


def test_partial_trace_of_product(rng):
    a, b = random_density(2, rng), random_density(3, rng)
    np.testing.assert_allclose(partial_trace(np.kron(a, b), (2, 3), 0), a, atol=1e-13)
    np.testing.assert_allclose(partial_trace(np.kron(a, b), (2, 3), 1), b, atol=1e-13)


def test_direct_sum_blocks():
    s = direct_sum(np.eye(1), 2 * np.eye(2))
    np.testing.assert_allclose(np.diag(s), [1, 2, 2])


def test_pauli_algebra():
    np.testing.assert_allclose(X @ Y, 1j * Z)
    np.testing.assert_allclose(X @ X, np.eye(2))


def test_random_unitary_is_unitary(rng):
    u = random_unitary(4, rng)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_kms_inner_at_identity_is_hs(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    tau = np.eye(3) / 3
    assert kms_inner(a, b, tau) == pytest.approx(np.trace(a.conj().T @ b) / 3)


def test_density_validation():
    assert is_density(np.eye(2) / 2)
    with pytest.raises(NotADensityMatrix):
        as_density(np.diag([1.5, -0.5]))
    with pytest.raises(NonHermitianInput):
        as_density(np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_json_round_trip(rng):
    rho = random_density(3, rng)
    np.testing.assert_array_equal(matrix_from_json(matrix_to_json(rho)), rho)
