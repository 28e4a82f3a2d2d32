"""Operator systems and J*-algebras stored as explicit subspaces.

A subspace of ``L(C^d)`` that is closed under the adjoint is spanned by its
Hermitian elements.  We store a real-orthonormal Hermitian basis, which is
then also orthonormal for the complex Hilbert-Schmidt product, so the
orthogonal projection is ``a -> sum_k tr(b_k a) b_k``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NontrivialCenter, NotJordanClosed, NumericalDegeneracy
from .linalg import frob, hermitian_eig, matrix_from_json, matrix_to_json
from .policy import get_policy
from .superop import DECOMPOSABLE, NONE, POSITIVE, SuperOperator


# real coordinates --------------------------------------------------------

def _to_real(mats: np.ndarray) -> np.ndarray:
    """Stack of Hermitian matrices -> rows of real coordinates (isometric)."""
    flat = mats.reshape(mats.shape[0], mats.shape[1] * mats.shape[2])
    return np.concatenate([flat.real, flat.imag], axis=1)


def _from_real(rows: np.ndarray, d: int) -> np.ndarray:
    n = d * d
    mats = (rows[:, :n] + 1j * rows[:, n:]).reshape(-1, d, d)
    return 0.5 * (mats + np.conj(np.swapaxes(mats, 1, 2)))


def hermitian_parts(mats: Iterable[np.ndarray]) -> np.ndarray:
    """Split each matrix ``a`` into ``(a + a*)/2`` and ``(a - a*)/(2i)``."""
    out = []
    for a in mats:
        a = np.asarray(a, dtype=complex)
        h1 = 0.5 * (a + a.conj().T)
        h2 = -0.5j * (a - a.conj().T)
        for h in (h1, h2):
            if frob(h) > 0:
                out.append(h)
    return np.array(out) if out else np.zeros((0,) + np.asarray(a).shape, dtype=complex)


def _extend(q: np.ndarray, cand: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal rows spanning ``span(q, cand)`` modulo ``span(q)``.

    Candidates are normalized first; residual directions are kept when their
    singular value exceeds ``tol``.  Two projection passes give the
    reorthogonalization.
    """
    if cand.shape[0] == 0:
        return cand[:0]
    norms = np.linalg.norm(cand, axis=1)
    top = float(np.max(norms))
    if top == 0.0:
        return cand[:0]
    # rescale individually, but never by more than 1e4 relative to the
    # largest candidate: a nearly cancelling product would otherwise turn its
    # rounding error into a spurious direction
    scale = np.maximum(norms, 1e-4 * top)
    r = cand / scale[:, None]
    for _ in range(2):
        if q.shape[0]:
            r = r - (r @ q.T) @ q
    _, s, vt = np.linalg.svd(r, full_matrices=False)
    new = vt[s > tol]
    if new.shape[0] == 0:
        return new
    for _ in range(2):
        if q.shape[0]:
            new = new - (new @ q.T) @ q
        new, _ = np.linalg.qr(new.T)
        new = new.T
    return new


# subspaces ----------------------------------------------------------------

class OperatorSubspace:
    """Adjoint-closed subspace of ``L(C^dim_H)`` with an orthonormal Hermitian basis.

    Use :meth:`span` to build one from arbitrary spanning matrices.
    """

    def __init__(self, basis: np.ndarray, dim_H: int, _rows: np.ndarray | None = None):
        basis = np.asarray(basis, dtype=complex).reshape(-1, dim_H, dim_H)
        basis.setflags(write=False)
        self.basis = basis
        self.dim_H = int(dim_H)
        self._rows = _to_real(basis) if _rows is None else _rows
        self._cache: dict = {}

    @classmethod
    def span(cls, mats: Iterable[np.ndarray], dim_H: int | None = None,
             with_identity: bool = False) -> "OperatorSubspace":
        mats = list(mats)
        if dim_H is None:
            if not mats:
                raise DimensionMismatch("dimension needed for an empty span")
            dim_H = np.asarray(mats[0]).shape[0]
        if any(np.asarray(m).shape != (dim_H, dim_H) for m in mats):
            raise DimensionMismatch("spanning matrices differ in shape")
        if with_identity:
            mats = [np.eye(dim_H)] + mats
        empty = cls(np.zeros((0, dim_H, dim_H)), dim_H)
        return empty.extended(mats)

    @classmethod
    def full(cls, d: int) -> "OperatorSubspace":
        mats = []
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                mats.append(e)
        return cls.span(mats, d)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dim

    def extended(self, mats: Iterable[np.ndarray]) -> "OperatorSubspace":
        """Subspace spanned by ``self`` and ``mats`` (Hermitian parts taken)."""
        herm = hermitian_parts(mats)
        if herm.shape[0] == 0:
            return self
        new = _extend(self._rows, _to_real(herm), get_policy().member)
        if new.shape[0] == 0:
            return self
        rows = np.concatenate([self._rows, new], axis=0)
        return OperatorSubspace(_from_real(new, self.dim_H) if self.dim == 0 else
                                np.concatenate([self.basis, _from_real(new, self.dim_H)]),
                                self.dim_H, rows)

    def coefficients(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        return np.einsum("kji,ij->k", self.basis, a)

    def project(self, a) -> np.ndarray:
        """Hilbert-Schmidt orthogonal projection onto the subspace."""
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.dim_H, self.dim_H):
            raise DimensionMismatch(f"shape {a.shape} vs dim_H {self.dim_H}")
        if self.dim == 0:
            return np.zeros_like(a)
        return np.einsum("k,kij->ij", self.coefficients(a), self.basis)

    def residual(self, a) -> float:
        a = np.asarray(a, dtype=complex)
        return frob(a - self.project(a)) / max(1.0, frob(a))

    def contains(self, a, tol: float | None = None) -> tuple[bool, float]:
        """Membership test with relative residual ``||a - P a|| / max(1, ||a||)``."""
        tol = get_policy().member if tol is None else tol
        r = self.residual(a)
        return r <= tol, r

    def __contains__(self, a) -> bool:
        return self.contains(a)[0]

    def is_subspace_of(self, other: "OperatorSubspace", tol: float | None = None) -> bool:
        return all(other.contains(b, tol)[0] for b in self.basis)

    def same_as(self, other: "OperatorSubspace", tol: float | None = None) -> bool:
        return (self.dim == other.dim and self.is_subspace_of(other, tol)
                and other.is_subspace_of(self, tol))

    @property
    def contains_identity(self) -> bool:
        return self.contains(np.eye(self.dim_H) / np.sqrt(self.dim_H))[0]

    def gram_residual(self) -> float:
        g = np.einsum("kij,lji->kl", self.basis, self.basis)
        return frob(g - np.eye(self.dim))

    def projector_matrix(self) -> np.ndarray:
        """Action matrix of the orthogonal projection (row-major vec)."""
        v = self.basis.reshape(self.dim, -1)
        return v.T @ v.conj()

    def to_json(self) -> dict:
        return {"dim_H": self.dim_H, "basis": [matrix_to_json(b) for b in self.basis]}

    @classmethod
    def from_json(cls, obj: dict) -> "OperatorSubspace":
        d = int(obj["dim_H"])
        return cls.span([matrix_from_json(b) for b in obj["basis"]], d)

    def __repr__(self) -> str:
        return f"OperatorSubspace(dim={self.dim}, dim_H={self.dim_H})"


# products -----------------------------------------------------------------

def _check_shapes(*mats) -> list[np.ndarray]:
    arrs = [np.asarray(m, dtype=complex) for m in mats]
    if len({a.shape for a in arrs}) != 1:
        raise DimensionMismatch("operands differ in shape")
    return arrs


def jordan_product(a, b) -> np.ndarray:
    """``a o b = (ab + ba)/2``."""
    a, b = _check_shapes(a, b)
    return 0.5 * (a @ b + b @ a)


def triple_product(a, b, c) -> np.ndarray:
    """Jordan triple product ``{abc} = (abc + cba)/2``."""
    a, b, c = _check_shapes(a, b, c)
    return 0.5 * (a @ b @ c + c @ b @ a)


def symmetrized_product(*mats) -> np.ndarray:
    """``(a_1 ... a_n + a_n ... a_1)/2``."""
    arrs = _check_shapes(*mats)
    fwd = np.linalg.multi_dot(arrs) if len(arrs) > 1 else arrs[0]
    bwd = np.linalg.multi_dot(arrs[::-1]) if len(arrs) > 1 else arrs[0]
    return 0.5 * (fwd + bwd)


def _pair_products(new: np.ndarray, basis: np.ndarray, associative: bool) -> np.ndarray:
    ab = np.einsum("pij,qjk->pqik", new, basis)
    ba = np.einsum("qij,pjk->pqik", basis, new)
    d = new.shape[-1]
    if associative:
        out = np.concatenate([0.5 * (ab + ba), -0.5j * (ab - ba)], axis=0)
    else:
        out = 0.5 * (ab + ba)
    return out.reshape(-1, d, d)


def _close(generators: Sequence[np.ndarray], associative: bool, dim_H: int | None) -> OperatorSubspace:
    gens = list(generators)
    if dim_H is None:
        if not gens:
            raise DimensionMismatch("empty generator list needs dim_H")
        dim_H = np.asarray(gens[0]).shape[0]
    s = OperatorSubspace.span(gens, dim_H, with_identity=True)
    frontier = s.basis
    for _ in range(dim_H * dim_H + 1):
        prods = _pair_products(frontier, s.basis, associative)
        grown = s.extended(prods)
        if grown.dim == s.dim:
            return s
        frontier = grown.basis[s.dim:]
        s = grown
    return s


def close_jstar(generators: Sequence[np.ndarray], dim_H: int | None = None) -> OperatorSubspace:
    """Smallest J*-algebra containing the generators and the identity.

    Breadth-first: each round multiplies the directions found in the
    previous round with the whole current basis, until no rank is gained.

    Examples
    --------
    >>> from qsuff.linalg import X, Z
    >>> close_jstar([X, Z]).dim
    3
    """
    return _close(generators, associative=False, dim_H=dim_H)


def close_star(generators: Sequence[np.ndarray], dim_H: int | None = None) -> OperatorSubspace:
    """Smallest unital *-algebra containing the generators."""
    return _close(generators, associative=True, dim_H=dim_H)


def _closure_defect(s: OperatorSubspace, associative: bool) -> float:
    if s.dim == 0:
        return 0.0
    prods = _pair_products(s.basis, s.basis, associative)
    coef = np.einsum("kji,pij->pk", s.basis, prods)
    resid = prods - np.einsum("pk,kij->pij", coef, s.basis)
    norms = np.linalg.norm(resid.reshape(len(prods), -1), axis=1)
    sizes = np.maximum(1.0, np.linalg.norm(prods.reshape(len(prods), -1), axis=1))
    return float(np.max(norms / sizes))


def jordan_defect(s: OperatorSubspace) -> float:
    """Largest relative residual of a pairwise Jordan product of basis elements."""
    if "jdefect" not in s._cache:
        s._cache["jdefect"] = _closure_defect(s, associative=False)
    return s._cache["jdefect"]


def is_jordan_closed(s: OperatorSubspace, tol: float | None = None) -> bool:
    tol = get_policy().member if tol is None else tol
    return s.contains_identity and jordan_defect(s) <= tol


def is_star_closed(s: OperatorSubspace, tol: float | None = None) -> bool:
    """True when the subspace is closed under the associative product."""
    tol = get_policy().member if tol is None else tol
    return _closure_defect(s, associative=True) <= tol


def require_jordan(s: OperatorSubspace) -> None:
    if not is_jordan_closed(s):
        raise NotJordanClosed(f"Jordan closure defect {jordan_defect(s):.3e}")


# conditional expectations -------------------------------------------------

def tpce(j: OperatorSubspace) -> SuperOperator:
    """Trace-preserving conditional expectation onto ``j``.

    This is the Hilbert-Schmidt orthogonal projection.  Positivity evidence
    is ``exact_cp`` for *-algebras, ``decomposable_by_construction`` when
    the fingerprints show a reversible algebra, and
    ``positive_by_construction`` otherwise.

    Raises
    ------
    NotJordanClosed
        If ``j`` fails the saturation check.
    """
    require_jordan(j)
    m = j.projector_matrix()
    t = SuperOperator(m, j.dim_H, j.dim_H)
    if t.evidence != NONE:
        return t
    return t.with_evidence(DECOMPOSABLE if is_reversible(j) else POSITIVE)


def _sandwich(x: np.ndarray) -> SuperOperator:
    return SuperOperator.conjugation(x)


def state_ce(j: OperatorSubspace, sigma) -> SuperOperator:
    """Conditional expectation onto ``j`` that preserves ``sigma``.

    ``F(a) = (E sigma)^{-1/2} E(sigma^{1/2} a sigma^{1/2}) (E sigma)^{-1/2}``
    with ``E`` the trace-preserving one.
    """
    from .linalg import mpow, require_faithful

    sigma = require_faithful(sigma, "sigma")
    e = tpce(j)
    es = require_faithful(e.apply(sigma), "E(sigma)")
    return _sandwich(mpow(es, -0.5)) @ e @ _sandwich(mpow(sigma, 0.5))


# center and factors ---------------------------------------------------------

def center(j: OperatorSubspace) -> OperatorSubspace:
    """Elements of ``j`` that commute with all of ``j``."""
    if "center" in j._cache:
        return j._cache["center"]
    b = j.basis
    k, d = j.dim, j.dim_H
    comm = np.einsum("kij,ljm->klim", b, b) - np.einsum("lij,kjm->klim", b, b)
    m = comm.reshape(k, -1)
    m = np.concatenate([m.real, m.imag], axis=1).T
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    null = vt[s <= get_policy().member * max(1.0, s[0] if k else 1.0)]
    mats = np.einsum("nk,kij->nij", null, b) if null.size else np.zeros((0, d, d))
    out = OperatorSubspace.span(list(mats), d, with_identity=True)
    j._cache["center"] = out
    return out


@dataclass(frozen=True)
class Factor:
    """A factor of a J*-algebra: central projection, isometry onto its
    range (columns) and the restricted algebra on ``C^rank``."""

    projection: np.ndarray
    isometry: np.ndarray
    algebra: OperatorSubspace

    @property
    def rank(self) -> int:
        return self.isometry.shape[1]


def restrict(j: OperatorSubspace, v: np.ndarray) -> OperatorSubspace:
    """Compress ``j`` by the isometry ``v``: ``b -> v* b v``."""
    mats = np.einsum("ji,kjl,lm->kim", v.conj(), j.basis, v)
    return OperatorSubspace.span(list(mats), v.shape[1])


def factor_decompose(j: OperatorSubspace, seed: int = 0) -> list[Factor]:
    """Split ``j`` into factors via a generic element of its center.

    The central projections are the spectral projections of a random real
    combination of the center basis.  A new seed is drawn when two
    eigenvalues come closer than the ``central_gap`` tolerance.

    Raises
    ------
    NumericalDegeneracy
        If no attempt separates the expected number of projections.
    """
    key = ("factors", seed)
    if key in j._cache:
        return j._cache[key]
    pol = get_policy()
    z = center(j)
    rng = np.random.default_rng(seed)
    for _ in range(pol.retries):
        c = rng.uniform(-1.0, 1.0, size=z.dim)
        es = hermitian_eig(np.einsum("k,kij->ij", c, z.basis))
        groups = es.clusters(pol.central_gap)
        if len(groups) == z.dim:
            break
    else:
        raise NumericalDegeneracy("center element spectrum not separated")
    facs = []
    for idx in groups:
        v = es.eigenvectors[:, idx]
        facs.append(Factor(v @ v.conj().T, v, restrict(j, v)))
    facs.sort(key=lambda f: tuple(-np.round(np.abs(np.diag(f.projection)), 6)))
    if sum(f.algebra.dim for f in facs) != j.dim:
        raise NumericalDegeneracy("factor dimensions do not add up")
    j._cache[key] = facs
    return facs


# fingerprints -------------------------------------------------------------

FULL = "FullMatrix"
SYMMETRIC = "Symmetric"
SYMPLECTIC = "Symplectic"
SPIN = "Spin"
DOUBLED = "FullWithConjugateDoubling"
UNKNOWN = "Unknown"

_REVERSIBLE_KINDS = {FULL, SYMMETRIC, SYMPLECTIC, DOUBLED}


@dataclass(frozen=True)
class FactorFingerprint:
    """Dimension fingerprint of a J*-factor and its generated *-algebra."""

    kind: str
    j_dim: int
    a_dim: int
    block_sizes: tuple[int, ...]
    multiplicities: tuple[int, ...] = field(default=())
    spin_alias: str | None = None

    @property
    def iso_class(self) -> tuple[str, int]:
        """Abstract isomorphism class, independent of the representation."""
        if self.spin_alias:
            return ("V", int(self.spin_alias[1:]))
        if self.kind in (FULL, DOUBLED):
            return ("L", self.block_sizes[0])
        if self.kind == SYMMETRIC:
            return ("Sym", self.block_sizes[0])
        if self.kind == SYMPLECTIC:
            return ("Sp", self.block_sizes[0] // 2)
        return (self.kind, self.j_dim)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "j_dim": self.j_dim, "a_dim": self.a_dim,
               "block_sizes": list(self.block_sizes)}
        if self.spin_alias:
            out["spin_alias"] = self.spin_alias
        return out


def _classify(j_dim: int, sizes: tuple[int, ...]) -> tuple[str, str | None]:
    if len(sizes) == 1:
        n = sizes[0]
        if j_dim == n * n:
            return FULL, ("V3" if n == 2 else None)
        if n >= 2 and j_dim == n * (n + 1) // 2:
            return SYMMETRIC, ("V2" if n == 2 else None)
        if n % 2 == 0 and n >= 4 and j_dim == (n // 2) * (n - 1):
            return SYMPLECTIC, ("V5" if n == 4 else None)
    if len(sizes) == 2 and sizes[0] == sizes[1] and j_dim == sizes[0] ** 2:
        return DOUBLED, ("V3" if sizes[0] == 2 else None)
    k = j_dim - 1
    if k >= 2:
        if k % 2 == 0 and sizes == (2 ** (k // 2),):
            return SPIN, f"V{k}"
        if k % 2 == 1 and set(sizes) == {2 ** ((k - 1) // 2)} and len(sizes) in (1, 2):
            return SPIN, f"V{k}"
    return UNKNOWN, None


def fingerprint(factor: OperatorSubspace) -> FactorFingerprint:
    """Classify a J*-factor by the block structure of its *-algebra.

    Raises
    ------
    NontrivialCenter
        If the input is not a factor.
    """
    if center(factor).dim != 1:
        raise NontrivialCenter(f"center has dimension {center(factor).dim}")
    a = close_star(list(factor.basis), factor.dim_H)
    sizes, mults = [], []
    for f in factor_decompose(a):
        n = int(round(np.sqrt(f.algebra.dim)))
        sizes.append(n)
        mults.append(f.rank // n if n else 0)
    order = np.argsort(sizes, kind="stable")
    sizes_t = tuple(int(sizes[i]) for i in order)
    mults_t = tuple(int(mults[i]) for i in order)
    kind, alias = _classify(factor.dim, sizes_t)
    return FactorFingerprint(kind, factor.dim, a.dim, sizes_t, mults_t, alias)


def fingerprints(j: OperatorSubspace) -> list[FactorFingerprint]:
    if "fingerprints" not in j._cache:
        j._cache["fingerprints"] = [fingerprint(f.algebra) for f in factor_decompose(j)]
    return j._cache["fingerprints"]


def is_reversible(j: OperatorSubspace) -> bool | None:
    """Reversibility read off the factor fingerprints.

    Matrix-family factors in these representations are reversible, spin
    factors that are not aliases of matrix families are not, and ``None``
    is returned when an ``Unknown`` factor is present.
    """
    kinds = [fp.kind for fp in fingerprints(j)]
    if UNKNOWN in kinds:
        return None
    return all(k in _REVERSIBLE_KINDS for k in kinds)


def reversibility_defect(j: OperatorSubspace, max_terms: int = 4096, seed: int = 0) -> float:
    """Largest residual of a symmetrized product of four basis elements.

    Direct but expensive; intended as a cross-check for small ``dim_H``.
    All quadruples are used when there are at most ``max_terms`` of them,
    otherwise a seeded random sample.
    """
    b = j.basis
    k = j.dim
    if k ** 4 <= max_terms:
        quads = itertools.product(range(k), repeat=4)
    else:
        rng = np.random.default_rng(seed)
        quads = (tuple(q) for q in rng.integers(0, k, size=(max_terms, 4)))
    worst = 0.0
    for q in quads:
        worst = max(worst, j.residual(symmetrized_product(*(b[i] for i in q))))
    return worst
