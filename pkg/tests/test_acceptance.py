"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest
import scipy.linalg as sla

from qsuff.channels import ampliation, combine, random_channel, sufficiency_check, transpose_map, unitary_channel
from qsuff.divergences import (
    F_FAMILIES,
    DivergenceSpec,
    alpha_z,
    alpha_z_in_dpi_region,
    alpha_z_quasi,
    dpi_harness,
    frenkel_relative_entropy,
    relative_entropy,
)
from qsuff.equivalence import EQUIVALENT, decide_ptp_equivalence, transpose_doubling
from qsuff.fixtures import majorana, pauli_example, quaternionic_generators, symmetric_generators
from qsuff.linalg import X, Z, random_density, random_unitary
from qsuff.opsys import SYMPLECTIC, close_jstar, fingerprint, state_ce
from qsuff.suffstats import StatisticalExperiment, dichotomy, minimal_jstar
from qsuff.superop import DECOMPOSABLE, EXACT_CO_CP, EXACT_CP

def test_c1_pauli_anchor(criterion):
    t0 = time.perf_counter()
    rho, sigma = pauli_example()
    an = minimal_jstar(dichotomy(rho, sigma))
    res = max(an.J.residual(b) for b in (np.eye(2), X, Z))
    ok = an.J.dim == 3 and an.A.dim == 4 and res <= 1e-8
    assert criterion("C1 Pauli anchor", ok, f"J_dim={an.J.dim} A_dim={an.A.dim} membership={res:.1e}",
                   time.perf_counter() - t0, 1.0)


def _timed_closure(gens):
    t0 = time.perf_counter()
    j = close_jstar(gens)
    return j, time.perf_counter() - t0


def test_c2_closure_fixtures(criterion):
    t_all = time.perf_counter()
    bad, slowest = [], 0.0
    for d in range(2, 7):
        j, dt = _timed_closure(list(symmetric_generators(d)))
        slowest = max(slowest, dt)
        if j.dim != d * (d + 1) // 2 or dt >= 5:
            bad.append(f"sym d={d}: {j.dim}")
    for m in range(1, 9):
        j, dt = _timed_closure(majorana(m))
        slowest = max(slowest, dt)
        if j.dim != m + 1 or dt >= 5:
            bad.append(f"majorana m={m}: {j.dim}")
    j, dt = _timed_closure(list(quaternionic_generators(4)))
    slowest = max(slowest, dt)
    kind = fingerprint(j).kind
    if j.dim != 28 or kind != SYMPLECTIC or dt >= 5:
        bad.append(f"quaternionic: {j.dim} {kind}")
    detail = f"14 fixtures, slowest {slowest:.2f} s" + (f", failures {bad}" if bad else "")
    assert criterion("C2 closure fixtures", not bad, detail, time.perf_counter() - t_all, 14 * 5.0)


def test_c3_frenkel_consistency(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(500):
        d = 2 + k % 4
        rho, sigma = random_density(d, rng), random_density(d, rng)
        worst = max(worst, abs(frenkel_relative_entropy(rho, sigma) - relative_entropy(rho, sigma)))
    # classical KL oracle for diag(0.75, 0.25) against the maximally mixed state
    kl = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    anchor = frenkel_relative_entropy(np.diag([0.75, 0.25]), np.eye(2) / 2)
    ok = worst <= 1e-6 and abs(anchor - 0.130812) <= 1e-6 and abs(anchor - kl) <= 1e-9
    assert criterion("C3 Frenkel consistency", ok, f"500 pairs, worst {worst:.1e}, anchor {anchor:.9f}",
                   time.perf_counter() - t0, 60.0)


def test_c4_sufficiency_suite(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst, dim_fail = 0.0, 0
    for trial in range(200):
        d, k = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        states = [random_density(d, rng, real=trial % 4 == 0) for _ in range(k)]
        e = StatisticalExperiment.from_states(states)
        an = minimal_jstar(e)
        f = state_ce(close_jstar(list(an.K.basis), d), e.average())
        worst = max(worst, max(np.linalg.norm(f.dual().apply(r) - r) for r in states))
        if close_jstar(list(an.hat_states.values()) + [an.omega], d).dim != an.J.dim:
            dim_fail += 1
    ok = worst <= 1e-8 and dim_fail == 0
    assert criterion("C4 sufficiency suite", ok, f"200 experiments, worst {worst:.1e}, dim mismatches {dim_fail}",
                   time.perf_counter() - t0, 120.0)


_RECOVERY_SPECS = [DivergenceSpec.relative_entropy(), DivergenceSpec.frenkel(), DivergenceSpec.f_div("chi2"),
                   DivergenceSpec.f_div("hellinger"), DivergenceSpec.alpha_z(0.5, 0.75),
                   DivergenceSpec.alpha_z(2.0, 1.5)]


def _entangled(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    v /= np.linalg.norm(v)
    return 0.8 * np.outer(v, v.conj()) + 0.2 * random_density(4, rng)


def _recovery_trial(k, rng):
    """Unital map, pair, and whether the map is sufficient by construction."""
    kind = k % 5
    if kind == 0:
        g = random_density(int(rng.integers(1, 3)), rng)
        rho, sigma = np.kron(random_density(2, rng), g), np.kron(random_density(2, rng), g)
        e = dichotomy(rho, sigma)
        return state_ce(minimal_jstar(e).J, e.average()), rho, sigma, True
    if kind == 1:
        d = int(rng.integers(2, 4))
        return unitary_channel(random_unitary(d, rng)), random_density(d, rng), random_density(d, rng), True
    if kind == 2:
        d = int(rng.integers(2, 4))
        return transpose_map(d), random_density(d, rng), random_density(d, rng), True
    if kind == 3:
        g = random_density(2, rng)
        return ampliation((2, 2)), np.kron(random_density(2, rng), g), np.kron(random_density(2, rng), g), True
    return ampliation((2, 2)), _entangled(rng), _entangled(rng), False


def test_c5_recovery_coherence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    violations, undecided = [], 0
    for k in range(200):
        t, rho, sigma, expected = _recovery_trial(k, rng)
        v = sufficiency_check(t, rho, sigma)
        if v.sufficient is None:
            undecided += 1
            continue
        if not v.consistent or v.sufficient != expected:
            violations.append((k, "verdict"))
        for spec in _RECOVERY_SPECS:
            if dpi_harness(t, rho, sigma, spec).coherent is False:
                violations.append((k, spec.family))
    detail = f"200 trials, {len(violations)} violations, {undecided} inconclusive"
    assert criterion("C5 recovery coherence", not violations, detail, time.perf_counter() - t0, 180.0)


def test_c6_transpose_doubling(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    failures, worst = 0, 0.0
    for k in range(50):
        d = 2 + k % 2
        rho, sigma = random_density(d, rng), random_density(d, rng)
        for lam in (0.3, 0.5, 0.7):
            e2 = dichotomy(transpose_doubling(rho, lam), transpose_doubling(sigma, lam))
            v = decide_ptp_equivalence(dichotomy(rho, sigma), e2)
            if v.status != EQUIVALENT:
                failures += 1
                continue
            worst = max(worst, max(v.residuals.values()))
    ok = failures == 0 and worst <= 1e-7
    assert criterion("C6 transpose doubling", ok, f"150 trials, {failures} not Equivalent, worst residual {worst:.1e}",
                   time.perf_counter() - t0, 120.0)


def _dpi_specs():
    specs = [DivergenceSpec.hockey_stick(t) for t in (0.3, 1.0, 2.5)]
    specs += [DivergenceSpec.relative_entropy(), DivergenceSpec.frenkel()]
    specs += [DivergenceSpec.f_div(n) for n in F_FAMILIES]
    grid = [(a, z) for a in (0.3, 0.5, 0.8, 1.5, 2.0, 3.0) for z in (0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)]
    specs += [DivergenceSpec.alpha_z(a, z) for a, z in grid if alpha_z_in_dpi_region(a, z)]
    return specs


def test_c7_dpi_regression(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    specs = _dpi_specs()
    worst, bad_evidence = -math.inf, 0
    for _ in range(100):
        di, do = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        p = rng.uniform()
        ch = combine([p, 1 - p], [random_channel(di, do, rng, 2), transpose_map(do) @ random_channel(di, do, rng, 2)])
        if ch.evidence not in (DECOMPOSABLE, EXACT_CP, EXACT_CO_CP):
            bad_evidence += 1
        rho, sigma = random_density(di, rng), random_density(di, rng)
        r2, s2 = ch.apply(rho), ch.apply(sigma)
        for spec in specs:
            worst = max(worst, spec.evaluate(r2, s2) - spec.evaluate(rho, sigma))
    ok = worst <= 1e-8 and bad_evidence == 0
    assert criterion("C7 DPI regression", ok, f"100 channels x {len(specs)} divergences, max increase {worst:.1e}",
                   time.perf_counter() - t0, 120.0)


def _fpow(a, p):
    return sla.fractional_matrix_power(a, p)


def test_c8_alpha_z_degenerations(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    err_s = err_p = err_f = 0.0
    for k in range(100):
        d = 2 + k % 3
        rho, sigma = random_density(d, rng), random_density(d, rng)
        for a in (0.3, 0.5, 0.8, 1.5, 2.0):
            s = _fpow(sigma, (1 - a) / (2 * a))
            sandwiched = math.log(np.trace(_fpow(s @ rho @ s, a)).real) / (a - 1)
            petz = math.log(np.trace(_fpow(rho, a) @ _fpow(sigma, 1 - a)).real) / (a - 1)
            err_s = max(err_s, abs(alpha_z(rho, sigma, a, a) - sandwiched))
            err_p = max(err_p, abs(alpha_z(rho, sigma, a, 1.0) - petz))
        sq = sla.sqrtm(rho)
        fid = np.trace(sla.sqrtm(sq @ sigma @ sq)).real
        err_f = max(err_f, abs(alpha_z_quasi(rho, sigma, 0.5, 0.5) - fid),
                    abs(alpha_z(rho, sigma, 0.5, 0.5) + 2 * math.log(fid)))
    ok = err_s <= 1e-9 and err_p <= 1e-9 and err_f <= 1e-8
    detail = f"100 pairs, sandwiched {err_s:.1e}, Petz {err_p:.1e}, fidelity {err_f:.1e}"
    assert criterion("C8 alpha-z degenerations", ok, detail, time.perf_counter() - t0, 30.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
