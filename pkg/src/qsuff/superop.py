"""Linear maps on matrices.

A :class:`SuperOperator` from ``L(C^n)`` to ``L(C^m)`` stores its action
matrix ``M`` of shape ``(m*m, n*n)`` with ``vec(T(a)) = M @ vec(a)`` for
row-major ``vec``.  With this convention ``vec(x a y) = kron(x, y.T) vec(a)``.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NonHermitianChoi, PositivityUnverified
from .linalg import frob, matrix_from_json, matrix_to_json
from .policy import get_policy

EXACT_CP = "exact_cp"
EXACT_CO_CP = "exact_co_cp"
DECOMPOSABLE = "decomposable_by_construction"
POSITIVE = "positive_by_construction"
NONE = "none"

_DECOMPOSABLE_CLASS = {EXACT_CP, EXACT_CO_CP, DECOMPOSABLE}
_STRUCTURAL = _DECOMPOSABLE_CLASS | {POSITIVE}


def _transpose_perm(d: int) -> np.ndarray:
    """Index permutation with ``vec(a.T) = vec(a)[perm]``."""
    return np.arange(d * d).reshape(d, d).T.ravel()


def _choi_from_matrix(m: np.ndarray, n_in: int, n_out: int) -> np.ndarray:
    # M[(k,l),(i,j)] = T(E_ij)[k,l];  Choi[(i,k),(j,l)] = T(E_ij)[k,l]
    t = m.reshape(n_out, n_out, n_in, n_in)
    return t.transpose(2, 0, 3, 1).reshape(n_in * n_out, n_in * n_out)


def _matrix_from_choi(c: np.ndarray, n_in: int, n_out: int) -> np.ndarray:
    t = c.reshape(n_in, n_out, n_in, n_out)
    return t.transpose(1, 3, 0, 2).reshape(n_out * n_out, n_in * n_in)


def _psd_within(h: np.ndarray) -> bool:
    h = 0.5 * (h + h.conj().T)
    w = np.linalg.eigvalsh(h)
    return bool(w[0] >= -get_policy().psd * max(1.0, frob(h)))


class SuperOperator:
    """Linear map ``L(C^in_dim) -> L(C^out_dim)``.

    Parameters
    ----------
    matrix : ndarray, shape (out_dim**2, in_dim**2)
        Action matrix in the row-major elementary-matrix basis.
    in_dim, out_dim : int
    evidence : str, optional
        Positivity evidence.  When omitted it is detected from the Choi
        matrix (``exact_cp``, ``exact_co_cp``) or set to ``"none"``.
    """

    __slots__ = ("matrix", "in_dim", "out_dim", "evidence", "_cache")

    def __init__(self, matrix, in_dim: int, out_dim: int, evidence: str | None = None):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (out_dim * out_dim, in_dim * in_dim):
            raise DimensionMismatch(
                f"action matrix shape {m.shape} does not fit {in_dim}->{out_dim}")
        m.setflags(write=False)
        self.matrix = m
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._cache: dict = {}
        self.evidence = self._detect_evidence() if evidence is None else evidence

    # construction --------------------------------------------------------

    @classmethod
    def from_action(cls, fn: Callable[[np.ndarray], np.ndarray], in_dim: int,
                    out_dim: int | None = None, evidence: str | None = None) -> "SuperOperator":
        """Tabulate a Python function on the elementary matrices."""
        out_dim = in_dim if out_dim is None else out_dim
        cols = []
        for i in range(in_dim):
            for j in range(in_dim):
                e = np.zeros((in_dim, in_dim), dtype=complex)
                e[i, j] = 1.0
                img = np.asarray(fn(e), dtype=complex)
                if img.shape != (out_dim, out_dim):
                    raise DimensionMismatch(f"image has shape {img.shape}")
                cols.append(img.ravel())
        return cls(np.array(cols).T, in_dim, out_dim, evidence)

    @classmethod
    def identity(cls, d: int) -> "SuperOperator":
        return cls(np.eye(d * d), d, d, EXACT_CP)

    @classmethod
    def conjugation(cls, x: np.ndarray, y: np.ndarray | None = None,
                    evidence: str | None = None) -> "SuperOperator":
        """The map ``a -> x a y`` (``y = x*`` by default)."""
        x = np.asarray(x, dtype=complex)
        if y is None:
            y = x.conj().T
            evidence = EXACT_CP if evidence is None else evidence
        y = np.asarray(y, dtype=complex)
        return cls(np.kron(x, y.T), x.shape[1], x.shape[0], evidence)

    @classmethod
    def transpose(cls, d: int) -> "SuperOperator":
        m = np.eye(d * d)[_transpose_perm(d)]
        return cls(m, d, d, EXACT_CO_CP)

    # basic operations ----------------------------------------------------

    def apply(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        if a.shape != (self.in_dim, self.in_dim):
            raise DimensionMismatch(f"input shape {a.shape}, expected {self.in_dim}")
        return (self.matrix @ a.ravel()).reshape(self.out_dim, self.out_dim)

    __call__ = apply

    def compose(self, other: "SuperOperator") -> "SuperOperator":
        """Return ``self o other`` (apply ``other`` first)."""
        if other.out_dim != self.in_dim:
            raise DimensionMismatch("composition dimensions differ")
        return SuperOperator(self.matrix @ other.matrix, other.in_dim, self.out_dim,
                             _compose_evidence(self.evidence, other.evidence))

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return self.compose(other)

    def dual(self) -> "SuperOperator":
        """Map with ``tr(dual(a) b) = tr(a T(b))``."""
        pin = _transpose_perm(self.in_dim)
        pout = _transpose_perm(self.out_dim)
        m = self.matrix.T[pin][:, pout]
        return SuperOperator(m, self.out_dim, self.in_dim, self.evidence)

    def choi(self) -> np.ndarray:
        """``sum_ij E_ij (x) T(E_ij)``."""
        return _choi_from_matrix(self.matrix, self.in_dim, self.out_dim)

    def compose_transpose(self) -> "SuperOperator":
        """``T o transpose``."""
        return SuperOperator(self.matrix[:, _transpose_perm(self.in_dim)],
                             self.in_dim, self.out_dim, NONE)

    # predicates ------------------------------------------------------------

    def is_unital(self, tol: float = 1e-9) -> bool:
        img = self.apply(np.eye(self.in_dim))
        return frob(img - np.eye(self.out_dim)) <= tol * max(1.0, np.sqrt(self.out_dim))

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        return self.dual().is_unital(tol)

    def is_hermiticity_preserving(self, tol: float = 1e-9) -> bool:
        # T(a*) = T(a)* on the elementary basis
        n, m = self.in_dim, self.out_dim
        t = self.matrix.reshape(m, m, n, n)
        lhs = t.transpose(0, 1, 3, 2)
        rhs = np.conj(t).transpose(1, 0, 2, 3)
        return frob(lhs - rhs) <= tol * max(1.0, frob(self.matrix))

    def is_cp(self) -> bool:
        if "cp" not in self._cache:
            c = self.choi()
            if frob(c - c.conj().T) > get_policy().herm * max(1.0, frob(c)):
                self._cache["cp"] = False
            else:
                self._cache["cp"] = _psd_within(c)
        return self._cache["cp"]

    def is_co_cp(self) -> bool:
        if "cocp" not in self._cache:
            self._cache["cocp"] = self.compose_transpose().is_cp()
        return self._cache["cocp"]

    def _detect_evidence(self) -> str:
        if self.is_cp():
            return EXACT_CP
        if self.is_co_cp():
            return EXACT_CO_CP
        return NONE

    def flags(self) -> dict:
        return {
            "unital": self.is_unital(),
            "trace_preserving": self.is_trace_preserving(),
            "cp": self.is_cp(),
            "positivity_evidence": self.evidence,
        }

    def with_evidence(self, evidence: str) -> "SuperOperator":
        return SuperOperator(self.matrix, self.in_dim, self.out_dim, evidence)

    def probe_positivity(self, n: int, rng: np.random.Generator) -> "SuperOperator":
        """Test ``n`` random pure inputs; record ``probed:n`` if all stay PSD.

        Structural evidence is never downgraded.
        """
        for _ in range(n):
            v = rng.standard_normal(self.in_dim) + 1j * rng.standard_normal(self.in_dim)
            img = self.apply(np.outer(v, v.conj()) / np.vdot(v, v).real)
            if not _psd_within(img):
                return self.with_evidence(NONE)
        if self.evidence in _STRUCTURAL:
            return self
        return self.with_evidence(f"probed:{n}")

    def require_positive(self, allow_probed: bool = False) -> None:
        ev = self.evidence
        if ev in _STRUCTURAL or (allow_probed and ev.startswith("probed")):
            return
        raise PositivityUnverified(f"positivity evidence {ev!r} is insufficient")

    def distance(self, other: "SuperOperator") -> float:
        return frob(self.matrix - other.matrix)

    # serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {"in_dim": self.in_dim, "out_dim": self.out_dim, "repr": "action",
                "data": matrix_to_json(self.matrix), "positivity_evidence": self.evidence}

    def __repr__(self) -> str:
        return f"SuperOperator({self.in_dim}->{self.out_dim}, evidence={self.evidence!r})"


def _compose_evidence(a: str, b: str) -> str | None:
    if a in _DECOMPOSABLE_CLASS and b in _DECOMPOSABLE_CLASS:
        return None if {a, b} <= {EXACT_CP, EXACT_CO_CP} else DECOMPOSABLE
    if a in _STRUCTURAL and b in _STRUCTURAL:
        return POSITIVE
    return NONE


def combine(weights: Sequence[float], maps: Sequence[SuperOperator]) -> SuperOperator:
    """Linear combination ``sum w_k T_k``; nonnegative weights keep evidence."""
    m0 = maps[0]
    mat = sum(w * t.matrix for w, t in zip(weights, maps))
    evs = {t.evidence for t in maps}
    out = SuperOperator(mat, m0.in_dim, m0.out_dim)
    if out.evidence != NONE or any(w < 0 for w in weights):
        return out
    if evs <= _DECOMPOSABLE_CLASS:
        return out.with_evidence(DECOMPOSABLE)
    if evs <= _STRUCTURAL:
        return out.with_evidence(POSITIVE)
    return out


def from_kraus(kraus: Iterable[np.ndarray]) -> SuperOperator:
    """CP map ``a -> sum_k k a k*``; each ``k`` has shape (out, in)."""
    ks = [np.asarray(k, dtype=complex) for k in kraus]
    if not ks:
        raise DimensionMismatch("empty Kraus list")
    shape = ks[0].shape
    if any(k.shape != shape for k in ks):
        raise DimensionMismatch("Kraus operators differ in shape")
    mat = sum(np.kron(k, k.conj()) for k in ks)
    return SuperOperator(mat, shape[1], shape[0], EXACT_CP)


def from_choi(choi, in_dim: int, out_dim: int | None = None) -> SuperOperator:
    """Inverse of :meth:`SuperOperator.choi`."""
    c = np.asarray(choi, dtype=complex)
    if out_dim is None:
        out_dim = c.shape[0] // in_dim
    if c.shape != (in_dim * out_dim, in_dim * out_dim):
        raise DimensionMismatch(f"Choi shape {c.shape} does not fit {in_dim}->{out_dim}")
    if frob(c - c.conj().T) > get_policy().herm * max(1.0, frob(c)):
        raise NonHermitianChoi("Choi matrix is not Hermitian")
    return SuperOperator(_matrix_from_choi(c, in_dim, out_dim), in_dim, out_dim)


def dual(t: SuperOperator) -> SuperOperator:
    return t.dual()


def superop_from_json(obj: dict) -> SuperOperator:
    """Parse channel JSON ``{in_dim, out_dim, repr, data}``."""
    from .errors import ParseError

    try:
        n, m, rep, data = obj["in_dim"], obj["out_dim"], obj["repr"], obj["data"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"channel JSON missing field: {exc}") from exc
    ev = obj.get("positivity_evidence")
    if rep == "kraus":
        t = from_kraus([matrix_from_json_rect(k) for k in data])
    elif rep == "choi":
        t = from_choi(matrix_from_json(data), n, m)
    elif rep == "action":
        t = SuperOperator(matrix_from_json_rect(data), n, m)
    else:
        raise ParseError(f"unknown channel representation {rep!r}")
    if (t.in_dim, t.out_dim) != (n, m):
        raise ParseError("channel dimensions disagree with data")
    if ev in _STRUCTURAL and t.evidence == NONE:
        t = t.with_evidence(ev)
    return t


def matrix_from_json_rect(obj) -> np.ndarray:
    """Like :func:`matrix_from_json` but allows rectangular arrays."""
    from .errors import ParseError

    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ParseError(f"matrix must be r x c x 2, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]
