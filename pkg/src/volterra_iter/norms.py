"""L^p norms of grid functions and operator norms of ``V_k^n`` on L^p(0, 1).

Every quantity is returned as a natural log so that ``‖V_k^n‖``, which decays
like ``1/Γ((r+1)n+1)``, never underflows.  Grid norms use the cell weight
``h``: ``‖u‖_p = (h Σ |u_j|^p)^{1/p}``.  The operator acting on cell means is
the lower-triangular Toeplitz matrix from :func:`~volterra_iter.grid.operator_column`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import svdvals, toeplitz

from .errors import DomainError, NormNotConverged, UsageError
from .grid import ScaledGridFunction, conv_power_numeric, convolve, operator_column, restricted_l1
from .special import HolderExponent

__all__ = [
    "NormEstimate",
    "METHODS",
    "lp_norm",
    "volterra_apply",
    "op_norm",
    "operator_norm",
    "rayleigh_quotient",
    "MAX_ITER",
]

METHODS = ("exact-l1", "svd-p2", "power-iteration", "bound-only")
MAX_ITER = 10_000
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class NormEstimate:
    """Bounds ``exp(log_lower) <= ‖V‖_p <= exp(log_upper)``."""

    p: HolderExponent
    log_lower: float
    log_upper: float
    method: str
    iterations: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise UsageError(f"unknown method tag {self.method!r}")
        if self.log_lower > self.log_upper:
            raise DomainError(f"lower bound {self.log_lower} exceeds upper bound {self.log_upper}")

    @property
    def log_mid(self) -> float:
        return 0.5 * (self.log_lower + self.log_upper)

    @property
    def lower(self) -> float:
        return math.exp(self.log_lower)

    @property
    def upper(self) -> float:
        return math.exp(self.log_upper)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = str(self.p)
        return d


def _lp_mantissa(v: np.ndarray, p: HolderExponent, h: float) -> float:
    """``log ‖v‖_p`` for a plain array, scaling by the peak first."""
    a = np.abs(v)
    peak = float(np.max(a)) if a.size else 0.0
    if peak == 0.0:
        return -math.inf
    if p.is_inf:
        return math.log(peak)
    pf = float(p.p)
    s = float(np.sum((a / peak) ** pf))
    return math.log(peak) + (math.log(s) + math.log(h)) / pf


def lp_norm(f: ScaledGridFunction, p) -> float:
    """``log ‖f‖_p`` on the grid."""
    p = HolderExponent.of(p)
    if f.is_zero:
        return -math.inf
    return _lp_mantissa(f.values, p, f.grid.h) + f.log_scale


def volterra_apply(k: ScaledGridFunction, u: ScaledGridFunction) -> ScaledGridFunction:
    """``V_k u = k * u``."""
    return convolve(k, u)


def _toeplitz_matvecs(col: np.ndarray):
    m = col.size

    def apply(u):
        return np.convolve(col, u)[:m]

    def apply_t(z):
        # lower-triangular Toeplitz matrices are persymmetric: T^T = R T R
        return np.convolve(col, z[::-1])[:m][::-1]

    return apply, apply_t


def _power_iteration(col, p: HolderExponent, h: float, start, tol: float, max_iter: int):
    """Boyd's nonlinear power method for ``max ‖T u‖_p / ‖u‖_p``.

    Returns ``(log_best, iterations, converged)``; ``log_best`` is the running
    maximum of the Rayleigh quotient and therefore always a valid lower bound.
    """
    apply, apply_t = _toeplitz_matvecs(col)
    pf = float(p.p)
    qf = float(p.q)
    u = np.array(start, dtype=float)
    best = -math.inf
    prev = None
    for it in range(1, max_iter + 1):
        y = apply(u)
        rq = _lp_mantissa(y, p, h) - _lp_mantissa(u, p, h)
        best = max(best, rq)
        if prev is not None and abs(rq - prev) < tol:
            return best, it, True
        prev = rq
        peak = np.max(np.abs(y))
        if peak == 0.0:
            return best, it, True
        y = y / peak
        z = np.sign(y) * np.abs(y) ** (pf - 1.0)
        v = apply_t(z)
        peak = np.max(np.abs(v))
        if peak == 0.0:
            return best, it, True
        v = v / peak
        u = np.sign(v) * np.abs(v) ** (qf - 1.0)
    return best, max_iter, False


def _trial_lower_bound(col, p: HolderExponent, h: float) -> float:
    """Best Rayleigh quotient over constant and decaying-exponential trial vectors."""
    apply, _ = _toeplitz_matvecs(col)
    m = col.size
    t = (np.arange(m) + 0.5) * h
    best = -math.inf
    for rate in (0.0, 1.0, 4.0, 16.0, 64.0, 256.0):
        for u in (np.exp(-rate * t), np.exp(-rate * (1.0 - t))):
            rq = _lp_mantissa(apply(u), p, h) - _lp_mantissa(u, p, h)
            best = max(best, rq)
    return best


def operator_norm(
    kn: ScaledGridFunction,
    p,
    method: str = "auto",
    tol: float = 1e-8,
    start: ScaledGridFunction | None = None,
    max_iter: int = MAX_ITER,
) -> NormEstimate:
    """Norm of ``u -> kn * u`` on L^p, for an already-powered kernel ``kn``.

    ``auto`` picks ``exact-l1`` at p in {1, inf} (``‖V_k‖ = ‖k‖_1`` there),
    ``svd-p2`` at p = 2, ``power-iteration`` for nonnegative kernels and
    ``bound-only`` otherwise.  ``tol`` is the stopping threshold on successive
    log Rayleigh quotients, i.e. a relative change.
    """
    p = HolderExponent.of(p)
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if method not in ("auto",) + METHODS:
        raise UsageError(f"unknown method {method!r}; choose from auto, {', '.join(METHODS)}")
    endpoint = p.is_inf or p.p == 1
    if method == "auto":
        if endpoint:
            method = "exact-l1"
        elif p.p == 2:
            method = "svd-p2"
        elif kn.is_nonnegative:
            method = "power-iteration"
        else:
            method = "bound-only"
    if method == "exact-l1" and not endpoint:
        raise UsageError(f"exact-l1 is only exact for p in {{1, inf}}, got p={p}")
    if method == "svd-p2" and p.p != 2:
        raise UsageError(f"svd-p2 needs p=2, got p={p}")
    if method == "power-iteration" and endpoint:
        raise UsageError("power-iteration needs 1 < p < inf")

    log_l1 = restricted_l1(kn, 1.0)
    if kn.is_zero:
        return NormEstimate(p, -math.inf, -math.inf, method)
    if method == "exact-l1":
        return NormEstimate(p, log_l1, log_l1, method)

    col, log_scale = operator_column(kn)
    h = kn.grid.h
    if method == "svd-p2":
        # mantissa matrix only; the scale is reattached in log space
        sigma = float(svdvals(toeplitz(col, np.zeros_like(col)), check_finite=False)[0])
        slack = math.log1p(8.0 * col.size * _EPS)
        log_sigma = math.log(sigma) + log_scale
        return NormEstimate(p, log_sigma - slack, min(log_sigma + slack, log_l1 + slack), method)
    if method == "bound-only":
        lower = _trial_lower_bound(col, p, h) + log_scale
        return NormEstimate(p, min(lower, log_l1), log_l1, method)

    u0 = np.ones(kn.grid.m) if start is None else np.array(start.values)
    best, iters, converged = _power_iteration(col, p, h, u0, tol, max_iter)
    estimate = NormEstimate(p, min(best + log_scale, log_l1), log_l1, method, iters)
    if not converged:
        raise NormNotConverged(f"power iteration did not converge in {max_iter} steps", estimate)
    return estimate


def op_norm(
    k: ScaledGridFunction,
    n: int,
    p,
    method: str = "auto",
    tol: float = 1e-8,
    start: ScaledGridFunction | None = None,
    max_iter: int = MAX_ITER,
) -> NormEstimate:
    """Estimate ``‖V_k^n‖_p = ‖V_{k^{*n}}‖_p``.

    ``start`` seeds the power iteration; callers that know the kernel's
    ``(r, mu)`` should pass the extremal function from
    :func:`volterra_iter.asymptotics.extremal_function`.
    """
    kn = conv_power_numeric(k, n)
    return operator_norm(kn, p, method=method, tol=tol, start=start, max_iter=max_iter)


def rayleigh_quotient(k: ScaledGridFunction, n: int, u: ScaledGridFunction, p) -> float:
    """``log ‖V_k^n u‖_p - log ‖u‖_p``."""
    p = HolderExponent.of(p)
    if u.is_zero:
        raise DomainError("Rayleigh quotient of the zero function is undefined")
    kn = conv_power_numeric(k, n)
    return lp_norm(volterra_apply(kn, u), p) - lp_norm(u, p)
