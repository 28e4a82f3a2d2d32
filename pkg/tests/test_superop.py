import numpy as np
import pytest

from qsuff.channels import depolarizing, random_channel, transpose_map, unitary_channel
from qsuff.errors import DimensionMismatch, NonHermitianChoi, ParseError, PositivityUnverified
from qsuff.linalg import random_density, random_unitary
from qsuff.superop import (
    DECOMPOSABLE,
    EXACT_CO_CP,
    EXACT_CP,
    NONE,
    SuperOperator,
    combine,
    from_choi,
    from_kraus,
    superop_from_json,
)


def _choi_by_loops(t):
    n, m = t.in_dim, t.out_dim
    c = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for j in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1.0
            c += np.kron(e, t.apply(e))
    return c


def test_kraus_action_matches_sum(rng):
    ks = [rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2)) for _ in range(2)]
    t = from_kraus(ks)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    np.testing.assert_allclose(t.apply(a), sum(k @ a @ k.conj().T for k in ks), atol=1e-12)
    assert (t.in_dim, t.out_dim) == (2, 3)
    assert t.matrix.shape == (9, 4)
    assert t.evidence == EXACT_CP


def test_choi_matches_definition(rng):
    t = random_channel(2, 3, rng)
    np.testing.assert_allclose(t.choi(), _choi_by_loops(t), atol=1e-12)
    back = from_choi(t.choi(), 2, 3)
    np.testing.assert_allclose(back.matrix, t.matrix, atol=1e-12)


def test_dual_is_hs_adjoint(rng):
    t = random_channel(2, 3, rng)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    lhs = np.trace(b.conj().T @ t.apply(a))
    rhs = np.trace(t.dual().apply(b).conj().T @ a)
    assert lhs == pytest.approx(rhs)
    np.testing.assert_allclose(t.dual().dual().matrix, t.matrix)


def test_channel_flags(rng):
    t = random_channel(3, 2, rng)
    assert t.is_trace_preserving()
    assert t.dual().is_unital()
    assert t.is_cp()


def test_transpose_is_co_cp_not_cp():
    t = transpose_map(3)
    assert t.evidence == EXACT_CO_CP
    assert not t.is_cp()
    np.testing.assert_allclose(t.apply(np.arange(9).reshape(3, 3)), np.arange(9).reshape(3, 3).T)


def test_mixture_of_cp_and_co_cp_is_decomposable(rng):
    u = unitary_channel(random_unitary(2, rng))
    mix = combine([0.5, 0.5], [u, transpose_map(2) @ u])
    assert mix.evidence in (DECOMPOSABLE, EXACT_CP, EXACT_CO_CP)
    mix.require_positive()


def test_negative_weights_drop_evidence():
    d = depolarizing(2, 0.3)
    t = combine([2.0, -1.0], [SuperOperator.identity(2), d])
    assert t.evidence == NONE


def test_unverified_map_is_rejected():
    # a -> a + tr(a) X: Hermiticity preserving but not positive
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    t = SuperOperator.from_action(lambda a: a + 2 * np.trace(a) * x, 2)
    assert t.evidence == NONE
    with pytest.raises(PositivityUnverified):
        t.require_positive()


def test_probing_records_count(rng):
    t = depolarizing(2, 0.5)
    raw = SuperOperator(t.matrix, 2, 2, NONE)
    assert raw.probe_positivity(20, rng).evidence == "probed:20"


def test_json_round_trip(rng):
    t = random_channel(2, 2, rng)
    back = superop_from_json(t.to_json())
    np.testing.assert_allclose(back.matrix, t.matrix)
    assert back.evidence == EXACT_CP


def test_json_errors():
    with pytest.raises(ParseError):
        superop_from_json({"in_dim": 2})
    with pytest.raises(ParseError):
        superop_from_json({"in_dim": 2, "out_dim": 2, "repr": "bogus", "data": []})


def test_kraus_shape_checks():
    with pytest.raises(DimensionMismatch):
        from_kraus([np.eye(2), np.eye(3)])


def test_non_hermitian_choi():
    with pytest.raises(NonHermitianChoi):
        from_choi(np.triu(np.ones((4, 4))), 2, 2)


def test_composition_applies_in_order(rng):
    a, b = random_channel(2, 3, rng), random_channel(3, 2, rng)
    rho = random_density(2, rng)
    np.testing.assert_allclose((b @ a).apply(rho), b.apply(a.apply(rho)), atol=1e-12)
