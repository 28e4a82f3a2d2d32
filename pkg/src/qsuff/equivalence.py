"""PTP-equivalence of experiments through canonical block forms.

Pipeline: restrict both experiments to the support of their average,
replace the states by their images under the trace-preserving conditional
expectation onto the minimal J*-algebra, split the generated *-algebra
into blocks ``M_n (x) 1_m``, merge the blocks that belong to one J*-factor,
and match the resulting classes by weights and (anti)unitary equivalence
of their state tuples.  Matches are turned into explicit interconverting
maps, which are verified before an ``Equivalent`` verdict is returned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CertificateInvalid, DimensionMismatch, LabelMismatch, NotFaithful, NumericalDegeneracy
from .linalg import frob, mpow
from .opsys import Factor, OperatorSubspace, close_star, factor_decompose, tpce
from .policy import get_policy
from .superop import DECOMPOSABLE, NONE, SuperOperator
from .suffstats import StatisticalExperiment, minimal_jstar, restrict_to_support

UNITARY = "UnitarilyEquivalent"
ANTIUNITARY = "AntiunitarilyEquivalent"
INEQUIVALENT = "Inequivalent"
INCONCLUSIVE = "Inconclusive"
EQUIVALENT = "Equivalent"

DIVERGENCE_GRID = (0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0)

# iso classes whose J*-isomorphisms are implemented by (anti)unitaries of the block
_RIGID = {"L", "Sym", "Sp"}


# tuples ------------------------------------------------------------------------

@dataclass
class TupleEquivalence:
    """Result of comparing two tuples of Hermitian matrices.

    For ``UnitarilyEquivalent``, ``b_k = u a_k u*``; for
    ``AntiunitarilyEquivalent``, ``b_k = u a_k^T u*``.
    """

    status: str
    unitary: np.ndarray | None = None
    mismatch: tuple[str, float, float] | None = None
    residual: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def equivalent(self) -> bool:
        return self.status in (UNITARY, ANTIUNITARY)

    @property
    def anti(self) -> bool:
        return self.status == ANTIUNITARY


def _intertwiner(a: Sequence[np.ndarray], b: Sequence[np.ndarray], rng, tol: float):
    """Unitary ``u`` with ``u a_k = b_k u`` for all ``k``, or ``None``."""
    n = a[0].shape[0]
    eye = np.eye(n)
    rows = [np.kron(eye, ak.T) - np.kron(bk, eye) for ak, bk in zip(a, b)]
    m = np.concatenate(rows, axis=0)
    _, s, vt = np.linalg.svd(m)
    scale = max(1.0, s[0])
    null = vt.conj()[s <= 1e-8 * scale]
    if len(s) < n * n:
        null = np.concatenate([null, vt.conj()[len(s):]])
    info = {"null_dim": int(len(null)), "smallest_sv": float(s[-1]) if len(s) == n * n else 0.0}
    if len(null) == 0:
        return None, np.inf, info
    best, best_res = None, np.inf
    for _ in range(get_policy().retries):
        c = rng.standard_normal(len(null)) + 1j * rng.standard_normal(len(null))
        u0 = (c @ null).reshape(n, n)
        p, _, q = np.linalg.svd(u0)
        u = p @ q
        res = max(frob(u @ ak @ u.conj().T - bk) for ak, bk in zip(a, b))
        if res < best_res:
            best, best_res = u, res
        if res <= tol:
            break
    info["residual"] = float(best_res)
    return (best if best_res <= tol else None), best_res, info


def _words(k: int, length: int, bound: int, rng) -> list[tuple[int, ...]]:
    total = sum(k ** l for l in range(1, length + 1))
    if total <= bound:
        return [w for l in range(1, length + 1) for w in itertools.product(range(k), repeat=l)]
    out = []
    for _ in range(1000):
        l = int(rng.integers(1, length + 1))
        out.append(tuple(int(x) for x in rng.integers(0, k, size=l)))
    return out


def _word_trace(mats, word) -> complex:
    p = mats[word[0]]
    for i in word[1:]:
        p = p @ mats[i]
    return complex(np.trace(p))


def _word_screen(a, b, words, tol):
    for w in words:
        x, y = _word_trace(a, w), _word_trace(b, w)
        if abs(x - y) > 10 * tol * max(1.0, abs(x)):
            return ("word_trace:" + "".join(str(i) for i in w), abs(x), abs(y))
    return None


def tuple_equiv(a: Sequence[np.ndarray], b: Sequence[np.ndarray], *, seed: int = 0,
                word_bound: int = 20000, tol: float | None = None) -> TupleEquivalence:
    """Decide (anti)unitary equivalence of two Hermitian tuples.

    The constructive path solves the linear intertwiner equations
    ``u a_k = b_k u`` (and the same against the transposed tuple), draws a
    random element of the solution space and takes its polar part; the
    result is verified.  When neither branch yields a verified unitary,
    spectra and traces of words up to length ``min(2 n^2, 12)`` are
    compared; all words are used when there are at most ``word_bound`` of
    them, otherwise 1000 random words.

    ``Inequivalent`` always names a mismatched invariant; a unitary branch
    is preferred when both branches succeed.
    """
    pol = get_policy()
    tol = pol.certificate if tol is None else tol
    a = [np.asarray(x, dtype=complex) for x in a]
    b = [np.asarray(x, dtype=complex) for x in b]
    if len(a) != len(b):
        raise DimensionMismatch("tuples differ in length")
    if not a:
        return TupleEquivalence(UNITARY, np.eye(0))
    if a[0].shape != b[0].shape:
        return TupleEquivalence(INEQUIVALENT, mismatch=("dimension", a[0].shape[0], b[0].shape[0]))
    rng = np.random.default_rng(seed)
    for k, (x, y) in enumerate(zip(a, b)):
        sx, sy = np.linalg.eigvalsh(x), np.linalg.eigvalsh(y)
        gap = float(np.max(np.abs(sx - sy)))
        if gap > 10 * pol.eq * max(1.0, float(np.max(np.abs(sx)))):
            return TupleEquivalence(INEQUIVALENT, mismatch=(f"spectrum[{k}]", float(sx[-1]), float(sy[-1])))
    diag = {}
    u, res, diag["unitary"] = _intertwiner(a, b, rng, tol)
    if u is not None:
        return TupleEquivalence(UNITARY, u, residual=float(res), diagnostics=diag)
    at = [x.conj() for x in a]
    u, res, diag["antiunitary"] = _intertwiner(at, b, rng, tol)
    if u is not None:
        return TupleEquivalence(ANTIUNITARY, u, residual=float(res), diagnostics=diag)
    n = a[0].shape[0]
    words = _words(len(a), min(2 * n * n, 12), word_bound, rng)
    m1 = _word_screen(a, b, words, pol.eq)
    m2 = _word_screen(at, b, words, pol.eq)
    if m1 is not None and m2 is not None:
        return TupleEquivalence(INEQUIVALENT, mismatch=m1, diagnostics=diag | {"anti_mismatch": m2})
    return TupleEquivalence(INCONCLUSIVE, diagnostics=diag)


def apply_relation(rel: TupleEquivalence, x: np.ndarray) -> np.ndarray:
    """``u x u*`` or ``u x^T u*`` according to the branch."""
    u = rel.unitary
    y = x.T if rel.anti else x
    return u @ y @ u.conj().T


def invert_relation(rel: TupleEquivalence, y: np.ndarray) -> np.ndarray:
    u = rel.unitary
    x = u.conj().T @ y @ u
    return x.T if rel.anti else x


# Koashi-Imoto blocks -------------------------------------------------------------

@dataclass
class Block:
    """A factor ``M_n (x) 1_m`` of a *-algebra.

    ``w`` has orthonormal columns indexed by ``(k, j) -> k m + j`` so that
    the factor equals ``w (M_n (x) 1_m) w*``.
    """

    w: np.ndarray
    n: int
    m: int

    @property
    def projection(self) -> np.ndarray:
        return self.w @ self.w.conj().T

    def compress(self, x: np.ndarray) -> np.ndarray:
        """``w* x w`` as an array of shape (n, m, n, m)."""
        return (self.w.conj().T @ x @ self.w).reshape(self.n, self.m, self.n, self.m)

    def reduced(self, x: np.ndarray) -> np.ndarray:
        """Partial trace over the multiplicity space of ``w* x w``."""
        return np.einsum("ijkj->ik", self.compress(x))

    def expand(self, y: np.ndarray, omega: np.ndarray | None = None) -> np.ndarray:
        """``w (y (x) omega) w*`` with ``omega = 1/m`` by default."""
        om = np.eye(self.m) / self.m if omega is None else omega
        return self.w @ np.kron(y, om) @ self.w.conj().T


def _matrix_units(f: Factor, rng) -> Block:
    pol = get_policy()
    alg = f.algebra
    n = int(round(math.sqrt(alg.dim)))
    r = f.rank
    if n * n != alg.dim or r % n:
        raise NumericalDegeneracy(f"factor of dimension {alg.dim} on rank {r} is not M_n (x) 1_m")
    m = r // n
    from .linalg import hermitian_eig

    for _ in range(pol.retries):
        g = np.einsum("k,kij->ij", rng.uniform(-1, 1, alg.dim), alg.basis)
        es = hermitian_eig(g)
        groups = es.clusters(pol.central_gap)
        if len(groups) == n and all(len(ix) == m for ix in groups):
            break
    else:
        raise NumericalDegeneracy("no generic element with separated spectrum")
    evs = es.eigenvectors
    projs = [evs[:, ix] @ evs[:, ix].conj().T for ix in groups]
    f1 = evs[:, groups[0]]
    for _ in range(pol.retries):
        c = rng.standard_normal(alg.dim) + 1j * rng.standard_normal(alg.dim)
        h = np.einsum("k,kij->ij", c, alg.basis)
        cols, ok = [], True
        for k in range(n):
            x = projs[0] if k == 0 else projs[k] @ h @ projs[0]
            nrm = math.sqrt(max(np.trace(x.conj().T @ x).real / m, 0.0))
            if nrm < 1e-6:
                ok = False
                break
            cols.append(x @ f1 / nrm)
        if ok:
            break
    else:
        raise NumericalDegeneracy("matrix units not found")
    w_local = np.concatenate(cols, axis=1)
    return Block(f.isometry @ w_local, n, m)


@dataclass
class KoashiBlocks:
    """Block decomposition ``rho_theta = (+)_j p_{j|theta} rho_{j|theta} (x) omega_j``."""

    labels: tuple[str, ...]
    blocks: list[Block]
    weights: np.ndarray          # (labels, blocks)
    states: list[list[np.ndarray]]  # [label][block], normalized n x n
    omegas: list[np.ndarray]     # per block, m x m
    residual: float

    def reconstruct(self, i: int) -> np.ndarray:
        d = self.blocks[0].w.shape[0]
        out = np.zeros((d, d), dtype=complex)
        for j, blk in enumerate(self.blocks):
            out += self.weights[i, j] * blk.expand(self.states[i][j], self.omegas[j])
        return out


def _blocks_of(a: OperatorSubspace, seed: int = 0) -> list[Block]:
    rng = np.random.default_rng(seed)
    return [_matrix_units(f, rng) for f in factor_decompose(a, seed)]


def _split_states(labels, states, blocks) -> KoashiBlocks:
    weights = np.zeros((len(states), len(blocks)))
    reduced = [[None] * len(blocks) for _ in states]
    omegas = []
    for j, blk in enumerate(blocks):
        total = np.zeros((blk.m, blk.m), dtype=complex)
        for i, rho in enumerate(states):
            c = blk.compress(rho)
            p = float(np.einsum("ijij->", c).real)
            weights[i, j] = p
            red = np.einsum("ijkj->ik", c)
            reduced[i][j] = red / p if p > 1e-14 else np.eye(blk.n) / blk.n
            total += np.einsum("ijil->jl", c)
        omegas.append(total / np.trace(total).real)
    kb = KoashiBlocks(tuple(labels), blocks, weights, reduced, omegas, 0.0)
    kb.residual = max(frob(kb.reconstruct(i) - rho) for i, rho in enumerate(states))
    return kb


def koashi_blocks(e: StatisticalExperiment, seed: int = 0) -> KoashiBlocks:
    """Block/multiplicity decomposition of a faithful experiment.

    The blocks are the factors of the *-algebra generated by the NP tests;
    each state splits as a weighted direct sum of products whose second
    factor ``omega_j`` does not depend on the label.

    Raises
    ------
    NotFaithful
        If the average state has a kernel.
    NumericalDegeneracy
        If the block split is unstable or the product form fails to 1e-8.
    """
    if not e.faithful:
        raise NotFaithful("average state is not faithful")
    an = minimal_jstar(e)
    kb = _split_states(e.labels, e.states, _blocks_of(an.A, seed))
    if kb.residual > 1e-8:
        raise NumericalDegeneracy(f"block reconstruction residual {kb.residual:.2e}")
    return kb


# canonical form --------------------------------------------------------------------

@dataclass
class CanonicalClass:
    """One J*-factor: its blocks, merged weights and representative tuple.

    ``tuples`` holds the class tuple built from the representative block
    and, for two-block classes, also the one built from the partner block.
    """

    iso_class: tuple
    weights: np.ndarray
    tuples: list[list[np.ndarray]]
    blocks: list[Block]
    c: float = 0.0
    phi: TupleEquivalence | None = None
    tag: str = ""

    @property
    def tuple(self) -> list[np.ndarray]:
        return self.tuples[0]

    @property
    def n(self) -> int:
        return self.blocks[0].n

    def key(self):
        return (self.iso_class, tuple(np.round(self.weights, 8)))


@dataclass
class CanonicalForm:
    labels: tuple[str, ...]
    classes: list[CanonicalClass]
    merge_log: list[dict]
    # reduction data used by the interconverters
    support: np.ndarray
    restricted: StatisticalExperiment
    analysis: object
    expectation: SuperOperator

    def class_multiset(self) -> list:
        return sorted(c.key() for c in self.classes)

    def reassembled(self) -> StatisticalExperiment:
        """Direct sum of the class tuples as an experiment."""
        from .linalg import direct_sum

        states = [direct_sum(*[c.tuple[i] for c in self.classes]) for i in range(len(self.labels))]
        return StatisticalExperiment(self.labels, tuple(states))

    def to_json(self) -> dict:
        return {
            "classes": [{"tag": c.tag, "iso_class": list(c.iso_class),
                         "weights": [float(x) for x in c.weights],
                         "blocks": [[b.n, b.m] for b in c.blocks]} for c in self.classes],
            "merge_log": self.merge_log,
        }


def canonical_form(e: StatisticalExperiment, seed: int = 0) -> CanonicalForm:
    """Canonical classes of an experiment after reduction to its minimal J.

    Blocks of the generated *-algebra belonging to the same J*-factor are
    merged; the representative is the block with the larger weight (the
    first one on ties), and the class tuple is
    ``(1 + c) ptrace(w_rep* rho_hat w_rep)`` with ``c`` the weight ratio
    partner/representative.

    Raises
    ------
    NumericalDegeneracy
        If blocks cannot be grouped, weights are not proportional, or the
        partner block is not (anti)unitarily related to the representative.
    """
    pol = get_policy()
    red, v = restrict_to_support(e)
    an = minimal_jstar(red)
    cond = tpce(an.J)
    hats = [an.hat_states[l] for l in red.labels]
    a = an.A if an.A.contains(np.eye(red.dim_H))[0] else close_star(list(an.J.basis), red.dim_H)
    blocks = _blocks_of(a, seed)
    jfacs = factor_decompose(an.J, seed)
    groups: list[list[int]] = [[] for _ in jfacs]
    for k, blk in enumerate(blocks):
        p = blk.projection
        hits = [i for i, f in enumerate(jfacs) if frob(f.projection @ p - p) <= 1e-6]
        if len(hits) != 1:
            raise NumericalDegeneracy("A-block not inside a single J-factor")
        groups[hits[0]].append(k)
    classes, log = [], []
    for i, (f, members) in enumerate(zip(jfacs, groups)):
        from .opsys import fingerprint

        iso = fingerprint(f.algebra).iso_class
        if len(members) not in (1, 2):
            raise NumericalDegeneracy(f"J-factor spans {len(members)} blocks")
        red_t = [[blocks[k].reduced(h) for h in hats] for k in members]
        w = np.array([[float(np.trace(x).real) for x in red_t[j]] for j in range(len(members))])
        if len(members) == 1:
            cls = CanonicalClass(iso, w[0], [red_t[0]], [blocks[members[0]]], 0.0, None)
        else:
            order = [0, 1] if w[0].sum() >= w[1].sum() - 1e-12 else [1, 0]
            r, q = order
            c = w[q].sum() / w[r].sum()
            if np.max(np.abs(w[q] - c * w[r])) > 1e-7:
                raise NumericalDegeneracy("block weights are not proportional")
            phi = tuple_equiv([c * x for x in red_t[r]], red_t[q], seed=seed)
            if not phi.equivalent:
                raise NumericalDegeneracy("partner block not (anti)unitarily related")
            rep_t = [(1 + c) * x for x in red_t[r]]
            par_t = [(1 + 1 / c) * x for x in red_t[q]]
            cls = CanonicalClass(iso, w[r] + w[q], [rep_t, par_t],
                                 [blocks[members[r]], blocks[members[q]]], c, phi)
            log.append({"class": i, "rep_block": members[r], "partner_block": members[q],
                        "c": float(c), "relation": phi.status})
        classes.append(cls)
    sort_key = [(c.iso_class, tuple(-np.round(c.weights, 9)),
                 tuple(np.round(np.concatenate([np.linalg.eigvalsh(x) for x in c.tuple]), 9)))
                for c in classes]
    order = sorted(range(len(classes)), key=lambda k: sort_key[k])
    classes = [classes[k] for k in order]
    for k, c in enumerate(classes):
        c.tag = f"{c.iso_class[0]}{c.iso_class[1]}#{k}"
    return CanonicalForm(red.labels, classes, log, v, red, an, cond)


# interconverters -----------------------------------------------------------------

def _restriction(v: np.ndarray) -> SuperOperator:
    """TP map ``x -> v* x v + tr((1 - v v*) x) 1/r``."""
    d, r = v.shape
    comp = np.eye(d) - v @ v.conj().T

    def fn(x):
        return v.conj().T @ x @ v + np.trace(comp @ x) * np.eye(r) / r

    return SuperOperator.from_action(fn, d, r)


def _offsets(classes) -> list[int]:
    out, k = [], 0
    for c in classes:
        out.append(k)
        k += c.n
    return out + [k]


def _gamma(cf: CanonicalForm, alt: list[int]) -> SuperOperator:
    """``x -> (+)_c (weight factor) ptrace(w_rep* x w_rep)``."""
    off = _offsets(cf.classes)
    r, n = cf.restricted.dim_H, off[-1]

    def fn(x):
        out = np.zeros((n, n), dtype=complex)
        for k, c in enumerate(cf.classes):
            blk = c.blocks[alt[k]]
            cc = c.c if alt[k] == 0 else 1 / c.c if c.c else 0.0
            out[off[k]:off[k + 1], off[k]:off[k + 1]] = (1 + cc) * blk.reduced(x)
        return out

    return SuperOperator.from_action(fn, r, n)


def _lambda(cf: CanonicalForm, alt: list[int]) -> SuperOperator:
    """Inverse of :func:`_gamma` on the class tuples, into the hat states."""
    off = _offsets(cf.classes)
    r, n = cf.restricted.dim_H, off[-1]

    def fn(x):
        out = np.zeros((r, r), dtype=complex)
        for k, c in enumerate(cf.classes):
            y = x[off[k]:off[k + 1], off[k]:off[k + 1]]
            if len(c.blocks) == 1:
                out += c.blocks[0].expand(y)
                continue
            rep, par = c.blocks[alt[k]], c.blocks[1 - alt[k]]
            cc = c.c if alt[k] == 0 else 1 / c.c
            part = apply_relation(c.phi, y) if alt[k] == 0 else invert_relation(c.phi, y)
            out += rep.expand(y) / (1 + cc) + par.expand(part) * cc / (1 + cc)
        return out

    return SuperOperator.from_action(fn, n, r)


def _match_map(cf1, cf2, pairing, rels) -> SuperOperator:
    o1, o2 = _offsets(cf1.classes), _offsets(cf2.classes)

    def fn(x):
        out = np.zeros((o2[-1], o2[-1]), dtype=complex)
        for i, j in pairing.items():
            y = x[o1[i]:o1[i + 1], o1[i]:o1[i + 1]]
            out[o2[j]:o2[j + 1], o2[j]:o2[j + 1]] = apply_relation(rels[i], y)
        return out

    return SuperOperator.from_action(fn, o1[-1], o2[-1])


def _unmatch_map(cf1, cf2, pairing, rels) -> SuperOperator:
    o1, o2 = _offsets(cf1.classes), _offsets(cf2.classes)

    def fn(x):
        out = np.zeros((o1[-1], o1[-1]), dtype=complex)
        for i, j in pairing.items():
            y = x[o2[j]:o2[j + 1], o2[j]:o2[j + 1]]
            out[o1[i]:o1[i + 1], o1[i]:o1[i + 1]] = invert_relation(rels[i], y)
        return out

    return SuperOperator.from_action(fn, o2[-1], o1[-1])


def _petz_dual(cf: CanonicalForm) -> SuperOperator:
    """``x -> omega^{1/2} E(omega_hat^{-1/2} x omega_hat^{-1/2}) omega^{1/2}``."""
    om = cf.restricted.average()
    om_hat = cf.expectation.apply(om)
    return (SuperOperator.conjugation(mpow(om, 0.5)) @ cf.expectation
            @ SuperOperator.conjugation(mpow(om_hat, -0.5)))


def _decomposable(t: SuperOperator) -> SuperOperator:
    return t.with_evidence(DECOMPOSABLE) if t.evidence == NONE else t


def _schroedinger_chain(src: CanonicalForm, dst: CanonicalForm, alt_src, alt_dst, mid) -> SuperOperator:
    chain = [
        _restriction(src.support),
        src.expectation,
        _decomposable(_gamma(src, alt_src)),
        _decomposable(mid),
        _decomposable(_lambda(dst, alt_dst)),
        _petz_dual(dst),
        SuperOperator.conjugation(dst.support),
    ]
    out = chain[0]
    for step in chain[1:]:
        out = step @ out
    return out


def build_interconverters(cf1: CanonicalForm, cf2: CanonicalForm, pairing: dict[int, int],
                          rels: dict[int, TupleEquivalence], alt2: dict[int, int],
                          e1: StatisticalExperiment, e2: StatisticalExperiment):
    """Assemble unital maps ``T, S`` with ``T* rho_theta = rho'_theta`` and back.

    ``pairing`` sends class ``i`` of ``cf1`` to class ``j`` of ``cf2`` with
    ``rels[i]`` relating ``cf1.classes[i].tuple`` to the ``alt2[j]``-th tuple of
    ``cf2.classes[j]``.

    Returns
    -------
    T, S : SuperOperator
        Unital maps (duals of the PTP interconverters).
    residuals : dict
        State-mapping residuals and the identity defect of ``T o S`` on ``J`` of ``e1``.

    Raises
    ------
    CertificateInvalid
        If a residual exceeds the certificate tolerance.
    """
    tol = get_policy().certificate
    a1 = [0] * len(cf1.classes)
    a2 = [alt2.get(j, 0) for j in range(len(cf2.classes))]
    fwd = _schroedinger_chain(cf1, cf2, a1, a2, _match_map(cf1, cf2, pairing, rels))
    bwd = _schroedinger_chain(cf2, cf1, a2, a1, _unmatch_map(cf1, cf2, pairing, rels))
    res = {
        "forward": max(frob(fwd.apply(e1[l]) - e2[l]) for l in e1.labels),
        "backward": max(frob(bwd.apply(e2[l]) - e1[l]) for l in e1.labels),
    }
    t, s = fwd.dual(), bwd.dual()
    ts = t @ s
    v = cf1.support
    j = cf1.analysis.J
    res["identity_on_J"] = max(frob(v.conj().T @ ts.apply(v @ b @ v.conj().T) @ v - b) for b in j.basis)
    bad = {k: x for k, x in res.items() if x > tol}
    if bad:
        raise CertificateInvalid(f"interconverter residuals {bad}")
    return t, s, res


# verdict ------------------------------------------------------------------------------

@dataclass
class EquivalenceVerdict:
    status: str
    certificate: tuple[SuperOperator, SuperOperator] | None = None
    residuals: dict = field(default_factory=dict)
    invariant_mismatches: list[dict] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self, include_maps: bool = True) -> dict:
        out = {
            "status": self.status,
            "certificates": [m.to_json() for m in self.certificate] if (self.certificate and include_maps) else [],
            "invariant_mismatches": self.invariant_mismatches,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def _screen(cf1: CanonicalForm, cf2: CanonicalForm) -> list[dict]:
    from .divergences import hockey_stick, relative_entropy

    tol = get_policy().eq
    out = []
    a1, a2 = cf1.analysis, cf2.analysis
    for name, x, y in (("J_dim", a1.J.dim, a2.J.dim), ("K_dim", a1.K.dim, a2.K.dim)):
        if x != y:
            out.append({"invariant": name, "values": [x, y]})
    f1 = sorted(list(fp.iso_class) for fp in a1.fingerprints)
    f2 = sorted(list(fp.iso_class) for fp in a2.fingerprints)
    if f1 != f2:
        out.append({"invariant": "factor_iso_classes", "values": [f1, f2]})
    if out:
        return out
    r1, r2 = cf1.restricted, cf2.restricted
    for la, lb in itertools.permutations(r1.labels, 2):
        vals = [(f"E_{t}({la}||{lb})", hockey_stick(r1[la], r1[lb], t), hockey_stick(r2[la], r2[lb], t))
                for t in DIVERGENCE_GRID]
        vals.append((f"D({la}||{lb})", relative_entropy(r1[la], r1[lb]), relative_entropy(r2[la], r2[lb])))
        for name, x, y in vals:
            if math.isinf(x) or math.isinf(y):
                if x != y:
                    out.append({"invariant": name, "values": [str(x), str(y)]})
            elif abs(x - y) > 10 * tol * max(1.0, abs(x)):
                out.append({"invariant": name, "values": [x, y]})
    return out


def _candidates(cf1, cf2, seed, word_bound):
    tol_w = get_policy().weight
    cand: dict[int, list[tuple[int, int, TupleEquivalence]]] = {}
    failures: dict[int, list[TupleEquivalence]] = {}
    for i, c1 in enumerate(cf1.classes):
        cand[i], failures[i] = [], []
        for j, c2 in enumerate(cf2.classes):
            if c1.iso_class != c2.iso_class or c1.n != c2.n:
                continue
            if np.max(np.abs(c1.weights - c2.weights)) > max(tol_w, 1e-8):
                continue
            for alt, tup in enumerate(c2.tuples):
                rel = tuple_equiv(c1.tuple, tup, seed=seed, word_bound=word_bound)
                if rel.equivalent:
                    cand[i].append((j, alt, rel))
                    break
                failures[i].append(rel)
    return cand, failures


def _assign(cand, n1):
    """Deterministic backtracking bipartite matching."""
    used: set[int] = set()
    choice: dict[int, tuple[int, int, TupleEquivalence]] = {}

    def rec(i):
        if i == n1:
            return True
        for j, alt, rel in cand[i]:
            if j in used:
                continue
            used.add(j)
            choice[i] = (j, alt, rel)
            if rec(i + 1):
                return True
            used.discard(j)
        return False

    return choice if rec(0) else None


def decide_ptp_equivalence(e1: StatisticalExperiment, e2: StatisticalExperiment, *,
                           seed: int = 0, word_bound: int = 20000) -> EquivalenceVerdict:
    """Decide whether two experiments are PTP-equivalent.

    ``Equivalent`` verdicts carry verified interconverters ``(T, S)``,
    ``Inequivalent`` ones a list of mismatched invariants, and
    ``Inconclusive`` ones diagnostics.

    Raises
    ------
    LabelMismatch
        If the label sets differ.
    """
    if set(e1.labels) != set(e2.labels):
        raise LabelMismatch(f"{sorted(e1.labels)} vs {sorted(e2.labels)}")
    e2 = StatisticalExperiment(e1.labels, tuple(e2[l] for l in e1.labels))
    try:
        cf1, cf2 = canonical_form(e1, seed), canonical_form(e2, seed)
    except NumericalDegeneracy as exc:
        return EquivalenceVerdict(INCONCLUSIVE, diagnostics={"canonical_form": str(exc)})
    mism = _screen(cf1, cf2)
    if mism:
        return EquivalenceVerdict(INEQUIVALENT, invariant_mismatches=mism)
    w1 = sorted(c.key() for c in cf1.classes)
    w2 = sorted(c.key() for c in cf2.classes)
    if len(w1) != len(w2) or any(a[0] != b[0] or np.max(np.abs(np.subtract(a[1], b[1]))) > 1e-6
                                 for a, b in zip(w1, w2)):
        return EquivalenceVerdict(INEQUIVALENT, invariant_mismatches=[
            {"invariant": "class_weights", "values": [str(w1), str(w2)]}])
    cand, failures = _candidates(cf1, cf2, seed, word_bound)
    choice = _assign(cand, len(cf1.classes))
    if choice is None:
        for i, c in enumerate(cf1.classes):
            if cand[i]:
                continue
            rels = failures[i]
            if c.iso_class[0] in _RIGID and rels and all(r.status == INEQUIVALENT for r in rels):
                m = rels[0].mismatch
                return EquivalenceVerdict(INEQUIVALENT, invariant_mismatches=[
                    {"invariant": f"class_tuple[{c.tag}]:{m[0]}", "values": [m[1], m[2]]}])
        return EquivalenceVerdict(INCONCLUSIVE, diagnostics={
            "unmatched_classes": [cf1.classes[i].tag for i in range(len(cf1.classes)) if not cand[i]]})
    pairing = {i: j for i, (j, _, _) in choice.items()}
    rels = {i: rel for i, (_, _, rel) in choice.items()}
    alt2 = {j: alt for (j, alt, _) in choice.values()}
    try:
        t, s, res = build_interconverters(cf1, cf2, pairing, rels, alt2, e1, e2)
    except CertificateInvalid as exc:
        return EquivalenceVerdict(INCONCLUSIVE, diagnostics={"certificate": str(exc)})
    diag = {"matches": [{"class": cf1.classes[i].tag, "to": cf2.classes[j].tag,
                         "relation": rels[i].status} for i, j in pairing.items()]}
    return EquivalenceVerdict(EQUIVALENT, (t, s), res, diagnostics=diag)


def transpose_doubling(rho, lam: float) -> np.ndarray:
    """``lam rho (+) (1 - lam) rho^T``."""
    from .linalg import direct_sum

    rho = np.asarray(rho, dtype=complex)
    return direct_sum(lam * rho, (1 - lam) * rho.T)
