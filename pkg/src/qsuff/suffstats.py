"""Statistical experiments, Neyman-Pearson tests and minimal sufficient algebras."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, NotFaithful, ParseError, SingularState
from .linalg import (
    as_density,
    frob,
    is_faithful,
    matrix_from_json,
    matrix_to_json,
    mpow,
    require_faithful,
    support_isometry,
    trace_positive_part,
)
from .opsys import (
    FactorFingerprint,
    OperatorSubspace,
    close_jstar,
    close_star,
    fingerprints,
    tpce,
)
from .policy import get_policy


@dataclass(frozen=True)
class StatisticalExperiment:
    """Finite labeled family of density matrices on one space.

    Examples
    --------
    >>> e = StatisticalExperiment.from_states([np.eye(2) / 2, np.diag([1.0, 0.0])])
    >>> e.labels, e.faithful
    (('0', '1'), True)
    """

    labels: tuple[str, ...]
    states: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.states:
            raise DimensionMismatch("an experiment needs at least one state")
        if len(self.labels) != len(self.states):
            raise DimensionMismatch("labels and states differ in number")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be distinct")
        d = np.asarray(self.states[0]).shape[0]
        clean = []
        for rho in self.states:
            rho = as_density(rho)
            if rho.shape != (d, d):
                raise DimensionMismatch("states live on different spaces")
            rho.setflags(write=False)
            clean.append(rho)
        object.__setattr__(self, "states", tuple(clean))
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))

    @classmethod
    def from_states(cls, states: Sequence[np.ndarray], labels: Sequence[str] | None = None):
        labels = [str(i) for i in range(len(states))] if labels is None else labels
        return cls(tuple(labels), tuple(states))

    @property
    def dim_H(self) -> int:
        return self.states[0].shape[0]

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, label: str) -> np.ndarray:
        return self.states[self.labels.index(label)]

    def average(self) -> np.ndarray:
        return sum(self.states) / len(self.states)

    @property
    def faithful(self) -> bool:
        return is_faithful(self.average())

    def mapped(self, fn) -> "StatisticalExperiment":
        """Apply ``fn`` to each state (e.g. a trace-preserving map)."""
        return StatisticalExperiment(self.labels, tuple(fn(r) for r in self.states))

    def to_json(self) -> dict:
        return {"dim": self.dim_H,
                "states": [{"label": l, "matrix": matrix_to_json(r)}
                           for l, r in zip(self.labels, self.states)]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "StatisticalExperiment":
        try:
            dim = int(obj["dim"])
            items = obj["states"]
            labels = [str(s["label"]) for s in items]
            mats = [matrix_from_json(s["matrix"]) for s in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed experiment JSON: {exc}") from exc
        if any(m.shape != (dim, dim) for m in mats):
            raise ParseError("state dimension disagrees with 'dim'")
        try:
            return cls(tuple(labels), tuple(mats))
        except (ValueError, DimensionMismatch) as exc:
            raise ParseError(str(exc)) from exc


def dichotomy(rho, sigma, labels: tuple[str, str] = ("rho", "sigma")) -> StatisticalExperiment:
    return StatisticalExperiment(labels, (rho, sigma))


def restrict_to_support(e: StatisticalExperiment) -> tuple[StatisticalExperiment, np.ndarray]:
    """Compress an experiment to the support of its average state.

    Returns the faithful experiment and the isometry ``V`` with
    ``rho = V rho' V*``.
    """
    v = support_isometry(e.average())
    if v.shape[1] == e.dim_H:
        return e, np.eye(e.dim_H, dtype=complex)
    states = []
    for rho in e.states:
        r = v.conj().T @ rho @ v
        states.append(r / np.trace(r).real)
    return StatisticalExperiment(e.labels, tuple(states)), v


# Neyman-Pearson tests -------------------------------------------------------

def np_projector(rho, sigma, t: float) -> np.ndarray:
    """Projection ``[rho > t sigma]`` onto the positive part of ``rho - t sigma``."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionMismatch("states differ in shape")
    h = rho - t * sigma
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    keep = w > get_policy().rank * max(1.0, frob(h))
    return v[:, keep] @ v[:, keep].conj().T


def _distinct(values: np.ndarray) -> np.ndarray:
    gap = get_policy().gap
    out: list[float] = []
    for x in np.sort(values):
        if out and x - out[-1] <= gap * max(1.0, abs(x)):
            continue
        out.append(float(x))
    return np.array(out)


def np_breakpoints(rho, sigma, allow_singular: bool = True) -> np.ndarray:
    """Values of ``t > 0`` where ``[rho > t sigma]`` can jump.

    For faithful ``sigma`` these are the distinct positive eigenvalues of
    ``sigma^{-1/2} rho sigma^{-1/2}``.  Otherwise the pair is compressed to
    its joint support, the pencil against the average ``omega`` is
    diagonalized, and an eigenvalue ``s`` maps back to ``t = s / (2 - s)``
    (``s = 2`` corresponds to the kernel of ``sigma`` and gives no finite
    breakpoint).

    Raises
    ------
    SingularState
        If ``sigma`` is singular and ``allow_singular`` is false.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    tol = get_policy().rank
    if is_faithful(sigma):
        s = mpow(sigma, -0.5)
        w = np.linalg.eigvalsh(s @ rho @ s)
        return _distinct(w[w > tol * max(1.0, w[-1])])
    if not allow_singular:
        raise SingularState("sigma is not faithful")
    v = support_isometry(0.5 * (rho + sigma))
    r = v.conj().T @ rho @ v
    sg = v.conj().T @ sigma @ v
    om = mpow(0.5 * (r + sg), -0.5)
    w = np.linalg.eigvalsh(om @ r @ om)
    w = w[(w > tol * 2) & (w < 2 - get_policy().gap)]
    return _distinct(w / (2 - w))


def _pieces(bps: np.ndarray) -> list[tuple[float, float]]:
    """Open intervals between breakpoints, with finite stand-ins for 0 and inf."""
    if bps.size == 0:
        return [(1e-3, 1e3)]
    edges = [bps[0] / 16.0] + list(bps) + [bps[-1] * 4.0]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def sample_points(bps: np.ndarray, fractions: Sequence[float]) -> np.ndarray:
    """Points at log-scale ``fractions`` of every piece."""
    pts = []
    for a, b in _pieces(np.asarray(bps)):
        la, lb = np.log(a), np.log(b)
        pts.extend(np.exp(la + f * (lb - la)) for f in fractions)
    return np.array(pts)


_FIRST = (0.5,)
_INITIAL = (0.2, 0.5, 0.8)
_FRESH = ((0.382, 0.618), (0.1, 0.9), (0.3, 0.7), (0.05, 0.95), (0.45, 0.55))


def np_tests(rho, sigma, fractions: Sequence[float] = _INITIAL) -> list[tuple[float, np.ndarray]]:
    """NP projections at sample points of each piece between breakpoints."""
    bps = np_breakpoints(rho, sigma)
    return [(float(t), np_projector(rho, sigma, t)) for t in sample_points(bps, fractions)]


def _adaptive_span(pairs, build, grow, fresh_rounds=_FRESH):
    """Grow ``build(gens)`` until fresh NP samples are contained in it."""
    gens = [p for rho, sig in pairs for _, p in np_tests(rho, sig)]
    s = build(gens)
    for fr in fresh_rounds:
        extra = []
        for rho, sig in pairs:
            for _, p in np_tests(rho, sig, fr):
                if not s.contains(p)[0]:
                    extra.append(p)
        if not extra:
            return s, gens
        gens = gens + extra
        s = grow(s, gens, extra)
    return s, gens


def _require_faithful_pair(rho, sigma):
    if not is_faithful(0.5 * (np.asarray(rho) + np.asarray(sigma))):
        raise NotFaithful("rho + sigma is not faithful")


def bayes_k(rho, sigma) -> OperatorSubspace:
    """Span of the identity and all NP tests ``[rho > t sigma]``, ``t > 0``.

    Projections vary continuously between breakpoints, so each piece is
    sampled at several points and the span is grown until fresh samples
    lie in it.

    Raises
    ------
    NotFaithful
        If ``rho + sigma`` is not faithful.
    """
    _require_faithful_pair(rho, sigma)
    d = np.asarray(rho).shape[0]
    s, _ = _adaptive_span(
        [(rho, sigma)],
        lambda gens: OperatorSubspace.span(gens, d, with_identity=True),
        lambda s, gens, extra: s.extended(extra),
    )
    return s


def d_operator(rho, sigma) -> np.ndarray:
    """``sigma^{-1/2} rho sigma^{-1/2}``.

    Raises
    ------
    SingularState
        If ``sigma`` is not faithful.
    """
    s = mpow(require_faithful(sigma, "sigma"), -0.5)
    d = s @ np.asarray(rho, dtype=complex) @ s
    return 0.5 * (d + d.conj().T)


def success_probability(rho, sigma, p: float) -> float:
    """Optimal probability of guessing ``rho`` (prior ``p``) vs ``sigma``."""
    if not 0.0 < p < 1.0:
        raise ValueError("prior must lie in (0, 1)")
    rho = as_density(rho)
    sigma = as_density(sigma)
    return (1 - p) + p * trace_positive_part(rho - ((1 - p) / p) * sigma)


# minimal sufficient algebras ------------------------------------------------

@dataclass
class SufficiencyAnalysis:
    """Minimal sufficient subspaces of a faithful experiment.

    ``K`` is the span of the NP tests (the pair's own tests for a
    dichotomy, tests against the average state otherwise), ``J`` the
    J*-algebra they generate and ``A`` the generated *-algebra.
    """

    labels: tuple[str, ...]
    K: OperatorSubspace
    J: OperatorSubspace
    A: OperatorSubspace
    hat_states: dict[str, np.ndarray]
    breakpoints: dict[str, np.ndarray]
    fingerprints: list[FactorFingerprint]
    omega: np.ndarray
    pair_ks: dict[tuple[str, str], OperatorSubspace] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "K_dim": self.K.dim,
            "J_dim": self.J.dim,
            "A_dim": self.A.dim,
            "breakpoints": {k: [float(x) for x in v] for k, v in self.breakpoints.items()},
            "fingerprints": [fp.to_json() for fp in self.fingerprints],
            "hat_states": [{"label": k, "matrix": matrix_to_json(v)}
                           for k, v in self.hat_states.items()],
        }


def minimal_jstar(e: StatisticalExperiment) -> SufficiencyAnalysis:
    """Minimal sufficient J*-algebra of a faithful experiment.

    ``J`` is generated by the NP tests ``[rho_theta > t omega]`` of every
    state against the uniform average ``omega``; sample points are added
    until fresh tests lie in ``J``.  The reduced states are the images of
    the trace-preserving conditional expectation onto ``J``.

    Raises
    ------
    NotFaithful
        If the average state has a kernel; see :func:`restrict_to_support`.
    """
    if not e.faithful:
        raise NotFaithful("average state is not faithful")
    d = e.dim_H
    omega = e.average()
    pairs = [(rho, omega) for rho in e.states]
    j, gens = _adaptive_span(
        pairs,
        lambda g: close_jstar(g, d),
        lambda s, g, extra: close_jstar(g, d),
    )
    a = close_star(gens, d)
    if len(e) == 2:
        k = bayes_k(*e.states)
        pair_ks = {(e.labels[0], e.labels[1]): k}
    else:
        k = OperatorSubspace.span(gens, d, with_identity=True)
        pair_ks = {(lab, "average"): bayes_k(rho, omega) for lab, rho in zip(e.labels, e.states)}
        for sub in pair_ks.values():
            k = k.extended(sub.basis)
    if not a.contains(np.eye(d))[0] or not j.is_subspace_of(a):
        a = close_star(list(j.basis), d)
    cond = tpce(j)
    hats = {lab: cond.apply(rho) for lab, rho in zip(e.labels, e.states)}
    bps = {lab: np_breakpoints(rho, omega) for lab, rho in zip(e.labels, e.states)}
    diag = {
        "K_in_J": max((j.residual(b) for b in k.basis), default=0.0),
        "d_in_J": max(j.residual(d_operator(rho, omega)) for rho in e.states),
        "generators": len(gens),
    }
    return SufficiencyAnalysis(e.labels, k, j, a, hats, bps, fingerprints(j), omega,
                               pair_ks, diag)


@dataclass(frozen=True)
class SymmetryReport:
    full_jstar: bool
    full_star: bool
    real_basis_obstruction: bool
    symplectic_obstruction: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def symmetry_report(rho, sigma) -> SymmetryReport:
    """Symmetry flags of a faithful dichotomy.

    ``full_jstar``: no unitary or antiunitary symmetry.  ``full_star``: no
    unitary symmetry.  ``real_basis_obstruction``: some factor of ``J``
    (single-block complex or quaternionic type, or unclassified) admits no
    basis in which its states are real.  ``symplectic_obstruction``: not
    every factor of ``J`` is of quaternionic type.
    """
    _require_faithful_pair(rho, sigma)
    an = minimal_jstar(dichotomy(rho, sigma))
    d = an.J.dim_H
    non_real = {"FullMatrix", "Symplectic", "Spin", "Unknown"}
    real_obs = any(fp.kind in non_real and fp.block_sizes[0] >= 2 for fp in an.fingerprints)
    sympl_obs = not all(fp.kind == "Symplectic" for fp in an.fingerprints)
    return SymmetryReport(an.J.dim == d * d, an.A.dim == d * d, real_obs, sympl_obs)
