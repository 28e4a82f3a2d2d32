import numpy as np
import pytest

from qsuff.equivalence import (
    ANTIUNITARY,
    EQUIVALENT,
    INEQUIVALENT,
    UNITARY,
    apply_relation,
    canonical_form,
    decide_ptp_equivalence,
    invert_relation,
    koashi_blocks,
    transpose_doubling,
    tuple_equiv,
)
from qsuff.errors import LabelMismatch
from qsuff.linalg import X, Y, direct_sum, random_density, random_hermitian, random_unitary
from qsuff.suffstats import StatisticalExperiment, dichotomy

I2 = np.eye(2)


def _conj(u, rho):
    return u @ rho @ u.conj().T


def test_tuple_equiv_with_itself(rng):
    a = [random_hermitian(3, rng) for _ in range(2)]
    rel = tuple_equiv(a, a)
    assert rel.status == UNITARY
    for x in a:
        np.testing.assert_allclose(apply_relation(rel, x), x, atol=1e-9)


def test_tuple_equiv_finds_rotation(rng):
    a = [random_hermitian(3, rng) for _ in range(2)]
    u = random_unitary(3, rng)
    b = [_conj(u, x) for x in a]
    rel = tuple_equiv(a, b)
    assert rel.status == UNITARY and rel.residual < 1e-8
    for x, y in zip(a, b):
        np.testing.assert_allclose(apply_relation(rel, x), y, atol=1e-8)
        np.testing.assert_allclose(invert_relation(rel, y), x, atol=1e-8)


def test_tuple_equiv_antiunitary(rng):
    a = [random_hermitian(3, rng) for _ in range(2)]
    u = random_unitary(3, rng)
    b = [_conj(u, x.conj()) for x in a]
    rel = tuple_equiv(a, b)
    assert rel.status == ANTIUNITARY and rel.anti
    for x, y in zip(a, b):
        np.testing.assert_allclose(apply_relation(rel, x), y, atol=1e-8)


def test_sign_flip_of_y_is_also_a_rotation():
    # conjugation by X flips Y and fixes X, so the unitary branch already succeeds
    a = [0.5 * (I2 + Y), 0.5 * (I2 + X)]
    b = [0.5 * (I2 - Y), 0.5 * (I2 + X)]
    rel = tuple_equiv(a, b)
    assert rel.equivalent
    for x, y in zip(a, b):
        np.testing.assert_allclose(apply_relation(rel, x), y, atol=1e-9)


def test_spectrum_mismatch():
    rel = tuple_equiv([np.diag([1.0, 0.0])], [np.diag([0.5, 0.5])])
    assert rel.status == INEQUIVALENT
    assert rel.mismatch


def test_koashi_blocks_of_product(rng):
    omega = random_density(3, rng)
    rho, sigma = np.kron(random_density(2, rng), omega), np.kron(random_density(2, rng), omega)
    kb = koashi_blocks(dichotomy(rho, sigma))
    assert [(b.n, b.m) for b in kb.blocks] == [(2, 3)]
    assert kb.residual < 1e-9
    np.testing.assert_allclose(kb.reconstruct(0), rho, atol=1e-9)


def test_koashi_blocks_of_generic_pair(rng):
    kb = koashi_blocks(dichotomy(random_density(3, rng), random_density(3, rng)))
    assert [(b.n, b.m) for b in kb.blocks] == [(3, 1)]


def test_koashi_blocks_of_classical_quantum_mixture(rng):
    rho = direct_sum(0.4 * random_density(2, rng), 0.6 * random_density(1, rng))
    sigma = direct_sum(0.7 * random_density(2, rng), 0.3 * random_density(1, rng))
    kb = koashi_blocks(dichotomy(rho, sigma))
    assert sorted((b.n, b.m) for b in kb.blocks) == [(1, 1), (2, 1)]
    np.testing.assert_allclose(np.sort(kb.weights[0]), [0.4, 0.6], atol=1e-9)
    for i, r in enumerate((rho, sigma)):
        np.testing.assert_allclose(kb.reconstruct(i), r, atol=1e-9)


def test_canonical_form_of_transpose_doubling(rng):
    rho, sigma = random_density(2, rng), random_density(2, rng)
    cf = canonical_form(dichotomy(transpose_doubling(rho, 0.3), transpose_doubling(sigma, 0.3)))
    assert len(cf.classes) == 1
    # one weight per label
    np.testing.assert_allclose(cf.classes[0].weights, [1.0, 1.0], atol=1e-9)


def test_rotated_experiment_is_equivalent(rng):
    rho, sigma = random_density(3, rng), random_density(3, rng)
    u = random_unitary(3, rng)
    v = decide_ptp_equivalence(dichotomy(rho, sigma), dichotomy(_conj(u, rho), _conj(u, sigma)))
    assert v.status == EQUIVALENT
    # certificates are unital maps whose duals carry the states across
    t, s = v.certificate
    assert t.is_unital() and s.is_unital()
    np.testing.assert_allclose(t.dual().apply(rho), _conj(u, rho), atol=1e-7)
    np.testing.assert_allclose(s.dual().apply(_conj(u, sigma)), sigma, atol=1e-7)
    assert max(v.residuals.values()) <= 1e-7


def test_transposed_experiment_is_equivalent(rng):
    rho, sigma = random_density(3, rng), random_density(3, rng)
    v = decide_ptp_equivalence(dichotomy(rho, sigma), dichotomy(rho.T, sigma.T))
    assert v.status == EQUIVALENT
    for m in v.certificate:
        m.require_positive()


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.7])
def test_transpose_doubling_is_equivalent(rng, lam):
    rho, sigma = random_density(2, rng), random_density(2, rng)
    e2 = dichotomy(transpose_doubling(rho, lam), transpose_doubling(sigma, lam))
    v = decide_ptp_equivalence(dichotomy(rho, sigma), e2)
    assert v.status == EQUIVALENT
    t, s = v.certificate
    np.testing.assert_allclose(t.dual().apply(rho), e2["rho"], atol=1e-7)
    np.testing.assert_allclose(s.dual().apply(e2["sigma"]), sigma, atol=1e-7)


def test_swapped_pair_is_inequivalent(rng):
    rho, sigma = random_density(3, rng), random_density(3, rng)
    v = decide_ptp_equivalence(dichotomy(rho, sigma), dichotomy(sigma, rho))
    assert v.status == INEQUIVALENT
    assert v.invariant_mismatches


def test_dimension_mismatch_is_inequivalent(rng):
    v = decide_ptp_equivalence(dichotomy(random_density(2, rng), random_density(2, rng)),
                               dichotomy(random_density(3, rng), random_density(3, rng)))
    assert v.status == INEQUIVALENT


def test_label_mismatch(rng):
    e1 = StatisticalExperiment.from_states([random_density(2, rng), random_density(2, rng)], ["a", "b"])
    e2 = StatisticalExperiment.from_states([random_density(2, rng), random_density(2, rng)], ["a", "c"])
    with pytest.raises(LabelMismatch):
        decide_ptp_equivalence(e1, e2)


def test_round_trip_under_isometric_embedding(rng):
    # rho -> rho (+) 0 composed with a rotation; the back-map is a compression
    rho, sigma = random_density(2, rng), random_density(2, rng)
    u = random_unitary(3, rng)
    big = [_conj(u, direct_sum(x, np.zeros((1, 1)))) for x in (rho, sigma)]
    v = decide_ptp_equivalence(dichotomy(rho, sigma), dichotomy(*big))
    assert v.status == EQUIVALENT


def test_verdict_json(rng):
    rho, sigma = random_density(2, rng), random_density(2, rng)
    v = decide_ptp_equivalence(dichotomy(rho, sigma), dichotomy(rho, sigma))
    out = v.to_json()
    assert out["status"] == EQUIVALENT and len(out["certificates"]) == 2
    assert v.to_json(include_maps=False)["certificates"] == []
