"""Channels, Petz recovery maps, fixed-point algebras and sufficiency verdicts.

Conventions: a unital map ``T: L(C^m) -> L(C^n)`` acts on observables, its
dual ``T*`` is trace preserving and maps states on ``C^n`` to states on
``C^m``.  :func:`sufficiency_check` takes the unital map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InconsistentVerdict, NotInvariant, NotJordanClosed, SingularState
from .linalg import frob, is_faithful, mpow, require_faithful
from .opsys import OperatorSubspace, is_jordan_closed, jordan_defect, jordan_product
from .policy import get_policy
from .superop import (
    DECOMPOSABLE,
    EXACT_CO_CP,
    EXACT_CP,
    NONE,
    POSITIVE,
    SuperOperator,
    combine,
    dual,
    from_choi,
    from_kraus,
    superop_from_json,
)
from .suffstats import d_operator, dichotomy, minimal_jstar

__all__ = [
    "SuperOperator", "from_kraus", "from_choi", "dual", "combine", "superop_from_json",
    "EXACT_CP", "EXACT_CO_CP", "DECOMPOSABLE", "POSITIVE", "NONE",
    "petz_recovery", "fixed_point_algebra", "sufficiency_check", "SufficiencyVerdict",
    "unitary_channel", "transpose_map", "pinching", "partial_trace_channel",
    "ampliation", "random_channel", "depolarizing", "kms_norm_defect",
]


# standard maps ----------------------------------------------------------------

def unitary_channel(u: np.ndarray) -> SuperOperator:
    """``a -> u a u*``."""
    return SuperOperator.conjugation(np.asarray(u, dtype=complex))


def transpose_map(d: int) -> SuperOperator:
    return SuperOperator.transpose(d)


def pinching(d: int) -> SuperOperator:
    """Dephasing in the standard basis."""
    ks = []
    for i in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[i, i] = 1.0
        ks.append(k)
    return from_kraus(ks)


def partial_trace_channel(dims: tuple[int, int], keep: int = 0) -> SuperOperator:
    """Trace out one tensor factor of ``C^da (x) C^db``."""
    da, db = dims
    ks = []
    if keep == 0:
        for j in range(db):
            ks.append(np.kron(np.eye(da), np.eye(db)[j:j + 1, :]))
    else:
        for j in range(da):
            ks.append(np.kron(np.eye(da)[j:j + 1, :], np.eye(db)))
    return from_kraus(ks)


def ampliation(dims: tuple[int, int], keep: int = 0) -> SuperOperator:
    """Unital embedding ``a -> a (x) 1`` (dual of the partial trace)."""
    return partial_trace_channel(dims, keep).dual()


def depolarizing(d: int, p: float) -> SuperOperator:
    """``a -> (1 - p) a + p tr(a) 1/d``."""
    ident = SuperOperator.identity(d)
    full = SuperOperator.from_action(lambda a: np.trace(a) * np.eye(d) / d, d)
    return combine([1 - p, p], [ident, full])


def random_channel(d_in: int, d_out: int, rng: np.random.Generator,
                   n_kraus: int | None = None) -> SuperOperator:
    """CPTP map from a random Stinespring isometry."""
    n = d_in * d_out if n_kraus is None else n_kraus
    g = rng.standard_normal((d_out * n, d_in)) + 1j * rng.standard_normal((d_out * n, d_in))
    v, _ = np.linalg.qr(g)
    ks = [v[k * d_out:(k + 1) * d_out, :] for k in range(n)]
    return from_kraus(ks)


# recovery ----------------------------------------------------------------------

def petz_recovery(t: SuperOperator, sigma, *, allow_probed: bool = False) -> SuperOperator:
    """Petz recovery map of a unital positive ``T`` relative to ``sigma``.

    ``R(a) = s^{-1/2} T*(sigma^{1/2} a sigma^{1/2}) s^{-1/2}`` with
    ``s = T* sigma``.  ``R`` is unital and ``R* s = sigma``.

    Raises
    ------
    SingularState
        If ``sigma`` or ``T* sigma`` is not faithful.
    """
    t.require_positive(allow_probed)
    sigma = require_faithful(sigma, "sigma")
    ts = t.dual()
    hat = require_faithful(ts.apply(sigma), "T*(sigma)")
    left = SuperOperator.conjugation(mpow(hat, -0.5))
    right = SuperOperator.conjugation(mpow(sigma, 0.5))
    return left @ ts @ right


def fixed_point_algebra(t: SuperOperator, sigma) -> OperatorSubspace:
    """Fixed points of a unital map with a faithful invariant state.

    Computed as the eigenvalue-1 eigenspace of the action matrix.

    Raises
    ------
    NotInvariant
        If ``T* sigma != sigma`` within ``1e-8``.
    NotJordanClosed
        If the result fails the Jordan saturation check.
    """
    sigma = require_faithful(sigma, "sigma")
    if frob(t.dual().apply(sigma) - sigma) > 1e-8:
        raise NotInvariant("sigma is not invariant")
    d = t.in_dim
    m = t.matrix - np.eye(d * d)
    _, s, vt = np.linalg.svd(m)
    null = vt.conj()[s <= get_policy().member * max(1.0, s[0])]
    fix = OperatorSubspace.span([v.reshape(d, d) for v in null], d)
    if not is_jordan_closed(fix):
        raise NotJordanClosed(f"fixed points not Jordan closed ({jordan_defect(fix):.2e})")
    return fix


def cesaro_mean(t: SuperOperator, n: int = 2000) -> SuperOperator:
    """``(1/n) sum_{k<n} T^k``, a slow cross-check for the fixed-point projection."""
    acc = np.zeros_like(t.matrix)
    p = np.eye(t.matrix.shape[0], dtype=complex)
    for _ in range(n):
        acc += p
        p = t.matrix @ p
    return SuperOperator(acc / n, t.in_dim, t.out_dim, t.evidence)


def kms_norm_defect(t: SuperOperator, sigma, a) -> float:
    """``<Ta, Ta>_sigma - <a, a>_{T* sigma}``; nonpositive for unital positive maps."""
    from .linalg import kms_inner

    ta = t.apply(a)
    hat = t.dual().apply(sigma)
    return float(kms_inner(ta, ta, sigma).real - kms_inner(a, a, hat).real)


# sufficiency verdict ------------------------------------------------------------

CONDITIONS = ("recovery_map_exists", "d_transported", "petz_recovers", "restricts_to_iso")


@dataclass
class SufficiencyVerdict:
    """Outcome of the equivalent recovery conditions for ``(T, rho, sigma)``.

    ``sufficient`` is ``None`` when the conditions disagree or a residual
    falls in the band between the satisfied and violated thresholds.
    """

    conditions: dict[str, bool]
    residuals: dict[str, float]
    sufficient: bool | None
    certificate: SuperOperator | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return len(set(self.conditions.values())) == 1

    def to_json(self) -> dict:
        return {
            "sufficient": self.sufficient,
            "conditions": dict(self.conditions),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _rel(x: np.ndarray, ref: np.ndarray) -> float:
    return frob(x) / max(1.0, frob(ref))


def _iso_residual(t: SuperOperator, j_hat: OperatorSubspace, j: OperatorSubspace) -> tuple[float, dict]:
    """How far ``T`` is from a J*-isomorphism ``j_hat -> j``."""
    info = {"J_dim": j.dim, "J_hat_dim": j_hat.dim}
    if j.dim != j_hat.dim:
        return 1.0, info
    imgs = np.array([t.apply(b) for b in j_hat.basis])
    contain = max(j.residual(x) for x in imgs)
    sv = np.linalg.svd(imgs.reshape(len(imgs), -1), compute_uv=False)
    injective = sv[-1] / max(sv[0], 1e-300)
    homo = 0.0
    for p in range(len(imgs)):
        for q in range(p, len(imgs)):
            lhs = t.apply(jordan_product(j_hat.basis[p], j_hat.basis[q]))
            homo = max(homo, _rel(lhs - jordan_product(imgs[p], imgs[q]), lhs))
    info.update(containment=contain, homomorphism=homo, injectivity=float(injective))
    res = max(contain, homo)
    if injective < 1e-6:
        res = max(res, 1.0 - injective)
    return res, info


def sufficiency_check(t: SuperOperator, rho, sigma, *, strict: bool = False,
                      allow_probed: bool = False) -> SufficiencyVerdict:
    """Evaluate the equivalent recoverability conditions.

    Parameters
    ----------
    t : SuperOperator
        Unital positive map ``L(C^m) -> L(C^n)``; ``rho, sigma`` live on ``C^n``.
    strict : bool
        Raise :class:`InconsistentVerdict` instead of returning an
        undecided verdict.

    Notes
    -----
    Conditions, each reported by its residual:

    * ``recovery_map_exists``: ``d`` is fixed by ``T o R``,
    * ``d_transported``: ``T(d_hat) = d``,
    * ``petz_recovers``: ``R*(T* rho) = rho``,
    * ``restricts_to_iso``: ``T`` maps the minimal J*-algebra of the output
      pair isomorphically onto that of the input pair,

    with ``d = sigma^{-1/2} rho sigma^{-1/2}``, ``d_hat`` the same for the
    output pair and ``R`` the Petz recovery map.  If ``sigma`` or ``T* sigma``
    is singular, ``sigma`` is replaced by ``(rho + sigma)/2``, which does
    not change sufficiency.
    """
    pol = get_policy()
    t.require_positive(allow_probed)
    if not t.is_unital():
        raise ValueError("sufficiency_check expects a unital map")
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    ts = t.dual()
    diag: dict = {}
    if not (is_faithful(sigma) and is_faithful(ts.apply(sigma))):
        sigma = 0.5 * (rho + sigma)
        diag["sigma_replaced_by_average"] = True
        if not (is_faithful(sigma) and is_faithful(ts.apply(sigma))):
            raise SingularState("(rho + sigma)/2 or its image is not faithful")
    rho_hat, sigma_hat = ts.apply(rho), ts.apply(sigma)
    d = d_operator(rho, sigma)
    d_hat = d_operator(rho_hat, sigma_hat)
    r = petz_recovery(t, sigma, allow_probed=allow_probed)
    w = t @ r
    res = {
        "recovery_map_exists": _rel(w.apply(d) - d, d),
        "d_transported": _rel(t.apply(d_hat) - d, d),
        "petz_recovers": _rel(r.dual().apply(rho_hat) - rho, rho),
    }
    j = minimal_jstar(dichotomy(rho, sigma)).J
    j_hat = minimal_jstar(dichotomy(rho_hat, sigma_hat)).J
    res["restricts_to_iso"], diag["iso"] = _iso_residual(t, j_hat, j)
    gap = t.apply(d_hat) - d
    gap = 0.5 * (gap + gap.conj().T)
    ev = np.linalg.eigvalsh(gap)
    diag["ordering"] = {"min_eig_T(d_hat)-d": float(ev[0]), "max_eig_T(d_hat)-d": float(ev[-1])}
    conds = {k: v <= pol.verdict for k, v in res.items()}
    in_band = [k for k, v in res.items() if pol.verdict < v < pol.strict]
    if in_band:
        diag["in_band"] = in_band
    values = set(conds.values())
    if len(values) == 1 and not in_band:
        verdict = values.pop()
    else:
        verdict = None
        diag["inconsistent"] = True
        if strict:
            raise InconsistentVerdict(f"residuals {res}")
    return SufficiencyVerdict(conds, res, verdict, r, diag)
