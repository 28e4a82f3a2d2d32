"""Dense Hermitian linear algebra with tolerance-aware predicates.

Matrices are plain ``numpy`` arrays.  The ``as_*`` helpers validate an
input and return a clean copy (Hermitian part, complex dtype).
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NegativeInput,
    NonHermitianInput,
    NotADensityMatrix,
    ParseError,
    SingularState,
)
from .policy import get_policy

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def frob(a: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(a))


def _square(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_residual(a: np.ndarray) -> float:
    """Return ``||a - a*||_F / max(1, ||a||_F)``."""
    a = _square(a)
    return frob(a - a.conj().T) / max(1.0, frob(a))


def is_hermitian(a, tol: float | None = None) -> bool:
    tol = get_policy().herm if tol is None else tol
    return hermiticity_residual(a) <= tol


def as_hermitian(a) -> np.ndarray:
    """Validate Hermiticity and return the exact Hermitian part.

    Raises
    ------
    NonHermitianInput
        If the normalized residual exceeds the ``herm`` tolerance.
    """
    a = _square(a)
    res = hermiticity_residual(a)
    if res > get_policy().herm:
        raise NonHermitianInput(f"Hermiticity residual {res:.3e}")
    return 0.5 * (a + a.conj().T)


def as_density(a) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD, unit trace)."""
    pol = get_policy()
    h = as_hermitian(a)
    scale = max(1.0, frob(h))
    w = np.linalg.eigvalsh(h)
    if w[0] < -pol.psd * scale:
        raise NotADensityMatrix(f"negative eigenvalue {w[0]:.3e}")
    tr = float(np.trace(h).real)
    if abs(tr - 1.0) > pol.trace * scale:
        raise NotADensityMatrix(f"trace {tr!r} differs from 1")
    return h


def is_density(a) -> bool:
    try:
        as_density(a)
    except (NotADensityMatrix, NonHermitianInput, DimensionMismatch):
        return False
    return True


class EigSystem(NamedTuple):
    """Ascending eigenvalues with orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def clusters(self, gap: float | None = None) -> list[np.ndarray]:
        """Group eigenvalue indices whose consecutive gaps are below ``gap``."""
        gap = get_policy().gap if gap is None else gap
        w = self.eigenvalues
        scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
        groups, start = [], 0
        for k in range(1, w.size):
            if w[k] - w[k - 1] > gap * scale:
                groups.append(np.arange(start, k))
                start = k
        if w.size:
            groups.append(np.arange(start, w.size))
        return groups

    def spectral_projectors(self, gap: float | None = None):
        """Return ``(values, projectors)`` with one projector per cluster."""
        v = self.eigenvectors
        vals, projs = [], []
        for idx in self.clusters(gap):
            vals.append(float(np.mean(self.eigenvalues[idx])))
            projs.append(v[:, idx] @ v[:, idx].conj().T)
        return np.array(vals), projs


def hermitian_eig(h) -> EigSystem:
    """Eigendecomposition of a Hermitian matrix.

    Examples
    --------
    >>> hermitian_eig(np.diag([0.75, 0.25])).eigenvalues
    array([0.25, 0.75])
    """
    h = as_hermitian(h)
    w, v = np.linalg.eigh(h)
    return EigSystem(w, v)


def _kernel_mask(w: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return np.abs(w) <= get_policy().rank * max(scale, np.finfo(float).tiny)


def fun_calc(h, f: Callable[[np.ndarray], np.ndarray], *, on_support: bool = False) -> np.ndarray:
    """Apply ``f`` to the spectrum of a Hermitian matrix.

    Parameters
    ----------
    h : array_like
        Hermitian matrix.
    f : callable
        Vectorized real function.
    on_support : bool
        Pseudo-function convention: eigenvalues in the numerical kernel are
        mapped to ``0`` and ``f`` is only evaluated on the remaining ones.

    Raises
    ------
    DomainError
        If ``f`` returns a non-finite value at an evaluated eigenvalue.
    """
    es = hermitian_eig(h)
    w, v = es
    fw = np.zeros_like(w)
    mask = ~_kernel_mask(w) if on_support else np.ones(w.shape, dtype=bool)
    with np.errstate(all="ignore"):
        vals = np.asarray(f(w[mask]), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise DomainError("function undefined on part of the spectrum")
    fw[mask] = vals
    return (v * fw) @ v.conj().T


def _psd_eig(h) -> EigSystem:
    pol = get_policy()
    es = hermitian_eig(h)
    if es.eigenvalues.size and es.eigenvalues[0] < -pol.psd * max(1.0, frob(h)):
        raise NegativeInput(f"negative eigenvalue {es.eigenvalues[0]:.3e}")
    return EigSystem(np.clip(es.eigenvalues, 0.0, None), es.eigenvectors)


def mpow(h, p: float) -> np.ndarray:
    """Power of a PSD matrix; for ``p <= 0`` the kernel is mapped to 0."""
    w, v = _psd_eig(h)
    fw = np.zeros_like(w)
    keep = ~_kernel_mask(w) if p <= 0 else w > 0
    fw[keep] = w[keep] ** p
    return (v * fw) @ v.conj().T


def msqrt(h) -> np.ndarray:
    return mpow(h, 0.5)


def mlog(h) -> np.ndarray:
    """Logarithm of a PSD matrix on its support."""
    w, v = _psd_eig(h)
    fw = np.zeros_like(w)
    keep = ~_kernel_mask(w)
    fw[keep] = np.log(w[keep])
    return (v * fw) @ v.conj().T


def positive_part(h) -> np.ndarray:
    return fun_calc(h, lambda x: np.maximum(x, 0.0))


def negative_part(h) -> np.ndarray:
    return fun_calc(h, lambda x: np.maximum(-x, 0.0))


def trace_positive_part(h) -> float:
    """``tr(h^+)`` computed from eigenvalues only."""
    w = np.linalg.eigvalsh(as_hermitian(h))
    return float(np.sum(w[w > 0]))


def support_projector(h) -> np.ndarray:
    """Projection onto the span of eigenvectors with eigenvalue above
    ``rank * lambda_max``.

    Raises
    ------
    NegativeInput
        If ``h`` has an eigenvalue below ``-psd``.
    """
    w, v = _psd_eig(h)
    if not w.size or w[-1] <= 0:
        return np.zeros_like(v)
    keep = w > get_policy().rank * w[-1]
    return v[:, keep] @ v[:, keep].conj().T


def support_isometry(h) -> np.ndarray:
    """Isometry ``V`` (columns) onto the support of a PSD matrix."""
    w, v = _psd_eig(h)
    if not w.size or w[-1] <= 0:
        return v[:, :0]
    keep = w > get_policy().rank * w[-1]
    return v[:, keep]


def is_faithful(rho) -> bool:
    w = np.linalg.eigvalsh(as_hermitian(rho))
    return bool(w.size) and w[0] > get_policy().rank * max(w[-1], 0.0)


def require_faithful(rho, what: str = "state") -> np.ndarray:
    rho = as_hermitian(rho)
    if not is_faithful(rho):
        raise SingularState(f"{what} is not faithful")
    return rho


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product ``tr(a* b)``."""
    return complex(np.vdot(np.asarray(a), np.asarray(b)))


def kms_inner(a, b, sigma) -> complex:
    """KMS inner product ``tr(sigma^{1/2} a* sigma^{1/2} b)``."""
    s = msqrt(require_faithful(sigma))
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != s.shape or b.shape != s.shape:
        raise DimensionMismatch("matrix and state dimensions differ")
    return complex(np.trace(s @ a.conj().T @ s @ b))


def inner_product(a, b, sigma=None) -> complex:
    """Hilbert-Schmidt form, or KMS form relative to ``sigma`` when given.

    Examples
    --------
    >>> tau = np.eye(2) / 2
    >>> round(inner_product(X, X, tau).real, 12)
    1.0
    """
    if sigma is None:
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            raise DimensionMismatch("shapes differ")
        return hs_inner(a, b)
    return kms_inner(a, b, sigma)


def partial_trace(x: np.ndarray, dims: Sequence[int], keep: int) -> np.ndarray:
    """Partial trace of a bipartite operator keeping subsystem ``keep``."""
    da, db = dims
    t = np.asarray(x).reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


def projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


# random objects ---------------------------------------------------------

def random_density(d: int, rng: np.random.Generator, *, rank: int | None = None,
                   real: bool = False) -> np.ndarray:
    """Normalized Wishart state ``G G* / tr(G G*)``."""
    r = d if rank is None else rank
    g = rng.standard_normal((d, r))
    if not real:
        g = g + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    rho = rho / np.trace(rho).real
    return 0.5 * (rho + rho.conj().T).astype(complex)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR decomposition of a Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (g + g.conj().T)


# JSON ---------------------------------------------------------------------

def matrix_to_json(a) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed matrix: {exc}") from exc
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ParseError(f"matrix must be n x n x 2, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]
