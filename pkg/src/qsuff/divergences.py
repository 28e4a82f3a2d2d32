"""Hockey-stick, relative entropy, f- and alpha-z divergences, and a DPI harness.

Infinite values are returned as ``math.inf`` when a support condition
fails; they never come from overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channels import SufficiencyVerdict, _jsonable, sufficiency_check
from .errors import DimensionMismatch, UnsupportedParameters
from .linalg import frob, is_faithful, mpow, support_isometry, support_projector
from .policy import get_policy
from .superop import DECOMPOSABLE, EXACT_CO_CP, EXACT_CP, SuperOperator
from .suffstats import np_breakpoints, np_projector

EQ_TOL = 1e-7
GAP_TOL = 1e-5


# helpers -----------------------------------------------------------------------

def _pair(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise DimensionMismatch("states differ in shape")
    return 0.5 * (rho + rho.conj().T), 0.5 * (sigma + sigma.conj().T)


def _supported(rho, sigma) -> bool:
    """``supp rho`` inside ``supp sigma``."""
    p = support_projector(sigma)
    leak = rho - p @ rho @ p
    return frob(leak) <= 1e3 * get_policy().rank * max(1.0, frob(rho))


def _compress(rho, sigma) -> tuple[np.ndarray, np.ndarray]:
    """Restrict both states to ``supp sigma``."""
    if is_faithful(sigma):
        return rho, sigma
    v = support_isometry(sigma)
    return v.conj().T @ rho @ v, v.conj().T @ sigma @ v


_NODES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _NODES:
        _NODES[n] = np.polynomial.legendre.leggauss(n)
    return _NODES[n]


def gauss_integrate(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                    points: int | None = None, tol: float | None = None,
                    depth: int = 40) -> float:
    """Adaptive Gauss-Legendre quadrature of a vectorized integrand.

    The interval is bisected until the rule on the whole piece and on its
    two halves agree within ``tol`` (absolute, scaled by the magnitude).
    """
    pol = get_policy()
    n = pol.quad_points if points is None else points
    tol = pol.quad_tol if tol is None else tol
    x, w = _leggauss(n)

    def rule(lo, hi):
        half = 0.5 * (hi - lo)
        return half * float(np.dot(w, f(lo + half * (x + 1.0))))

    def rec(lo, hi, whole, level):
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        if abs(left + right - whole) <= tol * max(1.0, abs(whole)) or level >= depth:
            return left + right
        return rec(lo, mid, left, level + 1) + rec(mid, hi, right, level + 1)

    if b <= a:
        return 0.0
    return rec(a, b, rule(a, b), 0)


def _positive_trace_batch(rho, sigma, ts: np.ndarray) -> np.ndarray:
    """``tr (rho - t sigma)^+`` for every ``t`` in ``ts``."""
    h = rho[None, :, :] - ts[:, None, None] * sigma[None, :, :]
    ev = np.linalg.eigvalsh(h)
    return np.clip(ev, 0.0, None).sum(axis=1)


def _edges(bps: np.ndarray, lo: float, hi: float, extra=(1.0,)) -> list[float]:
    pts = sorted({lo, hi, *[float(b) for b in bps if lo < b < hi], *[e for e in extra if lo < e < hi]})
    return pts


# hockey stick and relative entropy ---------------------------------------------

def hockey_stick(rho, sigma, t: float) -> float:
    """``E_t(rho || sigma) = tr (rho - t sigma)^+ - (1 - t)^+``."""
    if t < 0:
        raise UnsupportedParameters("t must be nonnegative")
    rho, sigma = _pair(rho, sigma)
    ev = np.linalg.eigvalsh(rho - t * sigma)
    return float(np.clip(ev, 0.0, None).sum() - max(1.0 - t, 0.0))


def relative_entropy(rho, sigma) -> float:
    """``tr rho (log rho - log sigma)`` in nats, ``inf`` unless ``rho << sigma``."""
    rho, sigma = _pair(rho, sigma)
    if not _supported(rho, sigma):
        return math.inf
    rho, sigma = _compress(rho, sigma)
    w, v = np.linalg.eigh(rho)
    keep = w > get_policy().rank
    ent = float(np.sum(w[keep] * np.log(w[keep])))
    ls, us = np.linalg.eigh(sigma)
    logs = (us * np.log(ls)) @ us.conj().T
    cross = float(np.real(np.trace(rho @ logs)))
    return max(ent - cross, 0.0)


def frenkel_relative_entropy(rho, sigma, points: int | None = None,
                             tol: float | None = None) -> float:
    """Relative entropy from the hockey-stick integral representation.

    ``D = int_1^inf E_t(rho||sigma)/t + E_t(sigma||rho)/t^2 dt``.  The
    substitution ``t -> 1/t`` and the skew symmetry of ``E_t`` turn the
    second term into ``int_0^1 E_t(rho||sigma)/t dt``, so only
    ``tr (rho - t sigma)^+`` is evaluated, piecewise between the
    breakpoints of the pair.  The integrand vanishes beyond the largest
    breakpoint.
    """
    rho, sigma = _pair(rho, sigma)
    if not _supported(rho, sigma):
        return math.inf
    rho, sigma = _compress(rho, sigma)
    if frob(rho - sigma) <= get_policy().eq * 1e-3:
        return 0.0
    bps = np_breakpoints(rho, sigma)
    top = max(float(bps[-1]) if bps.size else 1.0, 1.0)

    def integrand(ts):
        e = _positive_trace_batch(rho, sigma, ts) - np.clip(1.0 - ts, 0.0, None)
        return e / ts

    edges = _edges(bps, 0.0, top)
    total = sum(gauss_integrate(integrand, a, b, points, tol) for a, b in zip(edges[:-1], edges[1:]))
    return float(total)


# f-divergences -------------------------------------------------------------------

@dataclass(frozen=True)
class FDivergence:
    """Convex ``f`` with ``f(1) = 0``, its derivative, and ``lim f(x)/x``.

    ``f`` is also the antiderivative of ``fprime``, used on pieces where
    the NP test is constant.
    """

    name: str
    f: Callable[[float], float]
    fprime: Callable[[np.ndarray], np.ndarray]
    slope_at_infinity: float = math.inf


def _xlogx(x):
    return 0.0 if x == 0 else x * math.log(x)


KL = FDivergence("kl", _xlogx, lambda t: np.log(t) + 1.0)
CHI2 = FDivergence("chi2", lambda x: (x - 1.0) ** 2, lambda t: 2.0 * (t - 1.0))
TOTAL_VARIATION = FDivergence("tv", lambda x: 0.5 * abs(x - 1.0), lambda t: 0.5 * np.sign(t - 1.0), 0.5)
HELLINGER = FDivergence("hellinger", lambda x: (math.sqrt(x) - 1.0) ** 2,
                        lambda t: 1.0 - 1.0 / np.sqrt(t), 1.0)
AFFINE = FDivergence("affine", lambda x: x - 1.0, lambda t: np.ones_like(t), 1.0)

F_FAMILIES = {g.name: g for g in (KL, CHI2, TOTAL_VARIATION, HELLINGER, AFFINE)}


def _sigma_weight_batch(rho, sigma, ts: np.ndarray) -> np.ndarray:
    """``tr(sigma [rho > t sigma])`` for every ``t``."""
    h = rho[None, :, :] - ts[:, None, None] * sigma[None, :, :]
    w, v = np.linalg.eigh(h)
    tol = get_policy().rank
    mask = (w > tol).astype(float)
    # tr(sigma P) = sum_k mask_k <v_k, sigma v_k>
    quad = np.einsum("nik,ij,njk->nk", v.conj(), sigma, v).real
    return np.sum(mask * quad, axis=1)


def f_divergence(rho, sigma, spec: FDivergence, points: int | None = None,
                 tol: float | None = None) -> float:
    """``f(0) + int_0^inf f'(t) tr(sigma [rho > t sigma]) dt``.

    Equals ``sum_x q(x) f(p(x)/q(x))`` for commuting pairs.  Returns
    ``inf`` if ``rho`` is not supported on ``sigma`` and ``f`` grows
    superlinearly.

    Raises
    ------
    UnsupportedParameters
        For unsupported pairs and finite ``slope_at_infinity``.
    """
    rho, sigma = _pair(rho, sigma)
    if not _supported(rho, sigma):
        if math.isinf(spec.slope_at_infinity):
            return math.inf
        raise UnsupportedParameters("rho not supported on sigma and f has linear growth")
    rho, sigma = _compress(rho, sigma)
    bps = np_breakpoints(rho, sigma)
    if bps.size == 0:
        return float(spec.f(1.0))
    edges = [0.0] + [float(b) for b in bps]
    extra = 1.0 if 0.0 < 1.0 < edges[-1] and not np.any(np.isclose(bps, 1.0)) else None
    if extra is not None:
        edges = sorted(edges + [extra])
    total = float(spec.f(0.0))
    for a, b in zip(edges[:-1], edges[1:]):
        probe = a + np.array([0.25, 0.75]) * (b - a)
        wts = _sigma_weight_batch(rho, sigma, probe)
        if abs(wts[0] - wts[1]) <= 1e-12:
            total += float(wts[0]) * (spec.f(b) - spec.f(a))
        elif a == 0.0:
            # t = b u^3 smooths a singular f' at the origin
            def g(u, b=b):
                t = b * u ** 3
                return spec.fprime(t) * _sigma_weight_batch(rho, sigma, t) * 3.0 * b * u ** 2
            total += gauss_integrate(g, 0.0, 1.0, points, tol)
        else:
            total += gauss_integrate(lambda t: spec.fprime(t) * _sigma_weight_batch(rho, sigma, t),
                                     a, b, points, tol)
    return float(total)


# alpha-z ------------------------------------------------------------------------

def _pseudo_power(x: np.ndarray, p: float) -> np.ndarray:
    return mpow(x, p)


def alpha_z_quasi(rho, sigma, alpha: float, z: float) -> float:
    """``Q = tr (rho^{a/2z} sigma^{(1-a)/z} rho^{a/2z})^z`` with powers on supports."""
    rho, sigma = _pair(rho, sigma)
    a = _pseudo_power(rho, alpha / (2 * z))
    b = _pseudo_power(sigma, (1 - alpha) / (2 * z))
    s = np.linalg.svd(a @ b, compute_uv=False)
    return float(np.sum(s ** (2 * z)))


def alpha_z(rho, sigma, alpha: float, z: float) -> float:
    """alpha-z Renyi divergence ``log Q / (alpha - 1)``.

    For ``alpha > 1`` the value is ``inf`` unless ``rho << sigma``; for
    ``alpha < 1`` it is ``inf`` only when ``Q = 0``.

    Raises
    ------
    UnsupportedParameters
        Unless ``alpha > 0``, ``alpha != 1`` and ``z > 0``.
    """
    if not (alpha > 0 and alpha != 1 and z > 0):
        raise UnsupportedParameters(f"alpha={alpha}, z={z}")
    rho, sigma = _pair(rho, sigma)
    if alpha > 1 and not _supported(rho, sigma):
        return math.inf
    q = alpha_z_quasi(rho, sigma, alpha, z)
    if q <= 0:
        return math.inf
    return math.log(q) / (alpha - 1)


def alpha_z_in_dpi_region(alpha: float, z: float) -> bool:
    """Parameters for which the alpha-z divergence is monotone under PTP maps."""
    if 0 < alpha < 1:
        return z >= max(alpha, 1 - alpha)
    if alpha > 1:
        return max(alpha / 2, alpha - 1) <= z <= alpha
    return False


def alpha_z_in_recovery_region(alpha: float, z: float) -> bool:
    """Parameters for which equality under a map certifies recoverability (faithful states)."""
    if 0 < alpha < 1:
        return z >= max(alpha, 1 - alpha) and (z > alpha or z > 1 - alpha)
    if alpha > 1:
        return max(alpha / 2, alpha - 1) <= z <= alpha < z + 1
    return False


# specs and the harness ----------------------------------------------------------

@dataclass(frozen=True)
class DivergenceSpec:
    """A family member plus quadrature settings.

    ``family`` is one of ``hockey_stick`` (uses ``t``), ``relative_entropy``,
    ``frenkel``, ``f`` (uses ``f``) and ``alpha_z`` (uses ``alpha, z``).
    """

    family: str
    t: float | None = None
    alpha: float | None = None
    z: float | None = None
    f: FDivergence | None = None
    points: int | None = None
    tol: float | None = None

    @classmethod
    def hockey_stick(cls, t: float) -> "DivergenceSpec":
        return cls("hockey_stick", t=t)

    @classmethod
    def relative_entropy(cls) -> "DivergenceSpec":
        return cls("relative_entropy")

    @classmethod
    def frenkel(cls, points: int | None = None) -> "DivergenceSpec":
        return cls("frenkel", points=points)

    @classmethod
    def f_div(cls, f: FDivergence | str) -> "DivergenceSpec":
        return cls("f", f=F_FAMILIES[f] if isinstance(f, str) else f)

    @classmethod
    def alpha_z(cls, alpha: float, z: float) -> "DivergenceSpec":
        return cls("alpha_z", alpha=alpha, z=z)

    def evaluate(self, rho, sigma) -> float:
        if self.family == "hockey_stick":
            return hockey_stick(rho, sigma, self.t)
        if self.family == "relative_entropy":
            return relative_entropy(rho, sigma)
        if self.family == "frenkel":
            return frenkel_relative_entropy(rho, sigma, self.points, self.tol)
        if self.family == "f":
            return f_divergence(rho, sigma, self.f, self.points, self.tol)
        if self.family == "alpha_z":
            return alpha_z(rho, sigma, self.alpha, self.z)
        raise UnsupportedParameters(f"unknown family {self.family}")

    def certifies_recovery(self) -> bool:
        """Whether equality under a map is known to imply recoverability."""
        if self.family in ("relative_entropy", "frenkel"):
            return True
        if self.family == "f":
            # f'' > 0 forces equality of every E_t; tv and affine are not strictly convex
            return self.f.name in ("kl", "chi2", "hellinger")
        if self.family == "alpha_z":
            return alpha_z_in_recovery_region(self.alpha, self.z)
        return False

    def to_json(self) -> dict:
        out = {"family": self.family}
        for k in ("t", "alpha", "z", "points"):
            if getattr(self, k) is not None:
                out[k] = getattr(self, k)
        if self.f is not None:
            out["f"] = self.f.name
        return out


@dataclass
class DivergenceReport:
    """Before/after values under a map, with the recovery verdict.

    ``equal_within_tol`` is ``None`` inside the band between the equality
    and strict-drop tolerances.  ``coherent`` is ``None`` when the family
    gives no recovery statement or the comparison is undecided.
    """

    spec: DivergenceSpec
    value_before: float
    value_after: float
    equal_within_tol: bool | None
    recovery: SufficiencyVerdict | None
    coherent: bool | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        if math.isinf(self.value_before) and math.isinf(self.value_after):
            return 0.0
        return self.value_before - self.value_after

    def to_json(self) -> dict:
        def ext(x):
            return "inf" if math.isinf(x) else float(x)

        return {
            "divergence": self.spec.to_json(),
            "before": ext(self.value_before),
            "after": ext(self.value_after),
            "delta": ext(self.delta),
            "equal": self.equal_within_tol,
            "verdict": None if self.recovery is None else self.recovery.sufficient,
            "coherent": self.coherent,
            "residuals": {} if self.recovery is None else
            {k: float(v) for k, v in self.recovery.residuals.items()},
            "diagnostics": _jsonable(self.diagnostics),
        }


def dpi_harness(t: SuperOperator, rho, sigma, spec: DivergenceSpec, *,
                tol_eq: float = EQ_TOL, tol_gap: float = GAP_TOL,
                allow_probed: bool = False, check_recovery: bool = True) -> DivergenceReport:
    """Compare a divergence before and after the dual of a unital map.

    The equality flag and the recovery verdict must agree whenever the
    family certifies recovery.
    """
    t.require_positive(allow_probed)
    if spec.family == "alpha_z" and not alpha_z_in_dpi_region(spec.alpha, spec.z):
        raise UnsupportedParameters("alpha-z parameters outside the monotone region")
    ts = t.dual()
    rho_hat, sigma_hat = ts.apply(rho), ts.apply(sigma)
    before = spec.evaluate(rho, sigma)
    after = spec.evaluate(rho_hat, sigma_hat)
    diag: dict = {}
    if math.isinf(before) or math.isinf(after):
        equal = True if (math.isinf(before) and math.isinf(after)) else False
        diag["infinite"] = True
    else:
        delta = before - after
        scale = max(1.0, abs(before))
        if abs(delta) <= tol_eq * scale:
            equal = True
        elif delta >= tol_gap * scale:
            equal = False
        else:
            equal = None
        if delta < -tol_eq * scale:
            diag["dpi_violation"] = float(delta)
    verdict = sufficiency_check(t, rho, sigma, allow_probed=allow_probed) if check_recovery else None
    coherent = None
    if verdict is not None and spec.certifies_recovery() and equal is not None \
            and verdict.sufficient is not None and "infinite" not in diag:
        coherent = equal == verdict.sufficient
    return DivergenceReport(spec, before, after, equal, verdict, coherent, diag)


# d-operator cross-check ----------------------------------------------------------

def phi_sigma(a: np.ndarray, sigma) -> np.ndarray:
    """``int_0^1 sigma^{s-1/2} a sigma^{1/2-s} ds`` in closed form."""
    lam, u = np.linalg.eigh(np.asarray(sigma, dtype=complex))
    b = u.conj().T @ a @ u
    li, lj = lam[:, None], lam[None, :]
    r = li / lj
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(np.abs(r - 1) < 1e-12, 1.0, (r - 1) / np.log(r))
    return u @ (b * np.sqrt(lj / li) * fac) @ u.conj().T


def d_formula_check(rho, sigma, points: int = 64) -> tuple[np.ndarray, float]:
    """Rebuild ``d`` from NP tests as ``phi_sigma(int_0^inf [rho > t sigma] dt)``.

    Returns the reconstruction and its Frobenius distance to the direct
    ``sigma^{-1/2} rho sigma^{-1/2}``.
    """
    rho, sigma = _pair(rho, sigma)
    inv = mpow(sigma, -0.5)
    direct = inv @ rho @ inv
    bps = np_breakpoints(rho, sigma)
    edges = [0.0] + [float(b) for b in bps]
    x, w = _leggauss(points)
    acc = np.zeros_like(rho)
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        for xi, wi in zip(x, w):
            acc += half * wi * np_projector(rho, sigma, a + half * (xi + 1.0))
    rebuilt = phi_sigma(acc, sigma)
    return rebuilt, frob(rebuilt - direct)

