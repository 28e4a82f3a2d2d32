import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsuff.divergences import hockey_stick
from qsuff.errors import NotFaithful, ParseError
from qsuff.fixtures import pauli_example
from qsuff.linalg import X, Z, direct_sum, random_density
from qsuff.opsys import close_jstar, close_star, state_ce, tpce
from qsuff.suffstats import (
    StatisticalExperiment,
    bayes_k,
    d_operator,
    dichotomy,
    minimal_jstar,
    np_breakpoints,
    np_projector,
    restrict_to_support,
    success_probability,
    symmetry_report,
)


def _doubled(rho, lam):
    return direct_sum(lam * rho, (1 - lam) * rho.T)


def test_pauli_anchor():
    rho, sigma = pauli_example()
    an = minimal_jstar(dichotomy(rho, sigma))
    assert (an.K.dim, an.J.dim, an.A.dim) == (3, 3, 4)
    for b in (np.eye(2), X, Z):
        assert an.J.residual(b) < 1e-8
    rep = symmetry_report(rho, sigma)
    assert rep.full_star and not rep.full_jstar


def test_np_projector_of_commuting_pair():
    rho, sigma = np.diag([0.6, 0.3, 0.1]), np.diag([0.2, 0.3, 0.5])
    np.testing.assert_allclose(np_projector(rho, sigma, 1.5), np.diag([1, 0, 0]))
    np.testing.assert_allclose(np_breakpoints(rho, sigma), [0.2, 1.0, 3.0])


def test_breakpoints_are_likelihood_ratio_spectrum(rng):
    rho, sigma = random_density(3, rng), random_density(3, rng)
    bps = np_breakpoints(rho, sigma)
    w = np.linalg.eigvals(np.linalg.solve(sigma, rho)).real
    np.testing.assert_allclose(bps, np.sort(w), rtol=1e-9)


def test_breakpoints_with_singular_sigma():
    rho, sigma = np.diag([0.5, 0.25, 0.25]), np.diag([0.5, 0.5, 0.0])
    # ratios 1 and 0.5 on supp sigma; the kernel direction gives no breakpoint
    np.testing.assert_allclose(np_breakpoints(rho, sigma), [0.5, 1.0], rtol=1e-9)


def test_bayes_k_of_identical_states(rng):
    rho = random_density(3, rng)
    assert bayes_k(rho, rho).dim == 1


def test_classical_experiment_level_sets():
    # ratios p/q: 2, 2, 0.5, 1 -> three level sets
    p = np.array([0.2, 0.4, 0.1, 0.3])
    q = np.array([0.1, 0.2, 0.2, 0.3]) / 0.8
    q = q / q.sum()
    ratios = p / q
    levels = len(np.unique(np.round(ratios, 9)))
    an = minimal_jstar(dichotomy(np.diag(p), np.diag(q)))
    assert an.J.dim == levels
    assert an.A.dim == levels
    for b in an.J.basis:
        np.testing.assert_allclose(b - np.diag(np.diag(b)), 0, atol=1e-9)


def test_identical_states_after_restriction(rng):
    rho = random_density(3, rng, rank=2)
    e, v = restrict_to_support(dichotomy(rho, rho))
    assert v.shape == (3, 2)
    assert minimal_jstar(e).J.dim == 1


def test_non_faithful_raises(rng):
    rho = random_density(3, rng, rank=1)
    with pytest.raises(NotFaithful):
        minimal_jstar(dichotomy(rho, rho))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 4), st.integers(2, 3))
def test_sufficiency_invariants(seed, d, k):
    rng = np.random.default_rng(seed)
    states = [random_density(d, rng) for _ in range(k)]
    e = StatisticalExperiment.from_states(states)
    an = minimal_jstar(e)
    f = state_ce(an.J, e.average())
    for rho in states:
        np.testing.assert_allclose(f.dual().apply(rho), rho, atol=1e-8)
    assert close_jstar(list(an.hat_states.values()) + [an.omega], d).same_as(an.J)
    assert close_star(list(an.J.basis), d).dim == an.A.dim


def _structured_pair(rng):
    """Block states whose minimal J*-algebra is a proper subalgebra."""
    g = random_density(2, rng)
    return np.kron(random_density(3, rng), g), np.kron(random_density(3, rng), g)


def test_tpce_preserves_tests_and_divergences(rng):
    rho, sigma = _structured_pair(rng)
    an = minimal_jstar(dichotomy(rho, sigma))
    assert an.J.dim == 9
    e = tpce(an.J)
    er, es = e.apply(rho), e.apply(sigma)
    for t in (0.2, 0.7, 1.0, 1.9, 5.0):
        assert hockey_stick(er, es, t) == pytest.approx(hockey_stick(rho, sigma, t), abs=1e-10)
    np.testing.assert_allclose(d_operator(er, es), d_operator(rho, sigma), atol=1e-8)
    bps = np_breakpoints(rho, sigma)
    for t in np.sqrt(bps[:-1] * bps[1:]):
        np.testing.assert_allclose(np_projector(er, es, t), np_projector(rho, sigma, t), atol=1e-8)


def test_d_operator(rng):
    rho, sigma = random_density(3, rng), random_density(3, rng)
    d = d_operator(rho, sigma)
    assert np.linalg.eigvalsh(d)[0] > 0
    assert np.trace(sigma @ d).real == pytest.approx(1.0)
    assert minimal_jstar(dichotomy(rho, sigma)).J.residual(d) < 1e-8
    np.testing.assert_allclose(d_operator(sigma, sigma), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(d_operator(np.diag([0.6, 0.4]), np.diag([0.2, 0.8])), np.diag([3.0, 0.5]))


def test_success_probability():
    rho, tau = np.diag([0.75, 0.25]), np.eye(2) / 2
    assert success_probability(rho, tau, 0.5) == pytest.approx(0.625)
    assert success_probability(rho, rho, 0.3) == pytest.approx(0.7)
    assert success_probability(np.diag([1.0, 0]), np.diag([0, 1.0]), 0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.7])
def test_transpose_doubling_keeps_fingerprint(rng, lam):
    rho, sigma = random_density(2, rng), random_density(2, rng)
    a = minimal_jstar(dichotomy(rho, sigma))
    b = minimal_jstar(dichotomy(_doubled(rho, lam), _doubled(sigma, lam)))
    assert a.J.dim == b.J.dim
    assert [f.iso_class for f in a.fingerprints] == [f.iso_class for f in b.fingerprints]


def test_symmetry_flags():
    rng = np.random.default_rng(3)
    rep = symmetry_report(random_density(3, rng), random_density(3, rng))
    assert rep.full_jstar and rep.full_star
    rep = symmetry_report(np.diag([0.5, 0.3, 0.2]), np.diag([0.2, 0.3, 0.5]))
    assert not rep.full_jstar and not rep.full_star


def test_experiment_json_round_trip(rng):
    e = StatisticalExperiment.from_states([random_density(2, rng) for _ in range(3)], ["a", "b", "c"])
    back = StatisticalExperiment.from_json(e.to_json())
    assert back.labels == e.labels
    for x, y in zip(back.states, e.states):
        np.testing.assert_allclose(x, y)
    with pytest.raises(ParseError):
        StatisticalExperiment.from_json({"dim": 2})
