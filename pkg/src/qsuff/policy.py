"""Numeric tolerance policy shared by all modules.

The active policy is stored in a context variable so that overrides are
local to a ``with`` block (and to the current thread or task).
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerances used by predicates and rank decisions.

    Attributes
    ----------
    herm, psd, trace : float
        Absolute tolerances after normalizing by ``max(1, ||.||_F)``.
    rank : float
        Relative singular-value / eigenvalue threshold for rank decisions.
    eig : float
        Reconstruction tolerance for eigendecompositions.
    gram : float
        Tolerance on Gram matrices of stored bases.
    member : float
        Relative residual for subspace membership.
    gap : float
        Minimal eigenvalue gap treated as a genuine spectral separation.
    central_gap : float
        Minimal gap for spectra of generic central elements.
    eq, strict : float
        Equality and strictness band for divergence comparisons.
    verdict : float
        Residual below which a recovery condition counts as satisfied.
    weight : float
        Tolerance for comparing weight vectors of canonical classes.
    certificate : float
        Residual tolerance for interconverter verification.
    quad_points : int
        Gauss-Legendre nodes per quadrature piece.
    quad_tol : float
        Absolute tolerance of the adaptive quadrature.
    retries : int
        Number of seeded attempts for generic random combinations.
    """

    herm: float = 1e-9
    psd: float = 1e-9
    trace: float = 1e-9
    rank: float = 1e-10
    eig: float = 1e-9
    gram: float = 1e-8
    member: float = 1e-8
    gap: float = 1e-7
    central_gap: float = 1e-6
    eq: float = 1e-7
    strict: float = 1e-5
    verdict: float = 1e-7
    weight: float = 1e-9
    certificate: float = 1e-7
    quad_points: int = 32
    quad_tol: float = 1e-9
    retries: int = 8

    def replace(self, **changes) -> "NumericPolicy":
        return dataclasses.replace(self, **changes)


_ACTIVE: contextvars.ContextVar[NumericPolicy] = contextvars.ContextVar(
    "qsuff_policy", default=NumericPolicy()
)


def get_policy() -> NumericPolicy:
    """Return the active numeric policy."""
    return _ACTIVE.get()


def set_policy(policy: NumericPolicy) -> None:
    """Install ``policy`` as the active policy of the current context."""
    _ACTIVE.set(policy)


@contextlib.contextmanager
def using_policy(policy: NumericPolicy | None = None, **changes):
    """Temporarily override tolerances.

    Examples
    --------
    >>> with using_policy(member=1e-6):
    ...     get_policy().member
    1e-06
    """
    base = policy if policy is not None else get_policy()
    token = _ACTIVE.set(base.replace(**changes) if changes else base)
    try:
        yield _ACTIVE.get()
    finally:
        _ACTIVE.reset(token)
