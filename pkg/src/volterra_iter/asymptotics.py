"""Asymptotic norm formulas, extremal sequences and equivalence measurements.

The central formula is, for ``k(t) = t^r f(t)`` with ``f(0) != 0``::

    ‖V_k^n‖_p  ~  C_p (|f(0)| Γ(r+1))^n exp(f'(0)/f(0)) / Γ((r+1)n + 1)

and everything here is evaluated in log space.  The rank-1 operator
``S_λ u = <u, e_{-λ}> e_λ`` (with ``e_λ(t) = exp(λ t)``) is the model the
formula comes from; its norm is available in closed form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError
from .grid import GridSpec, ScaledGridFunction, conv_power_numeric, discretize, restricted_l1
from .kernels import PowerExpKernel, SmoothFactorKernel, tangent_kernel
from .norms import NormEstimate, lp_norm, op_norm, operator_norm, volterra_apply
from .special import HolderExponent, cp_constant, log_gamma

__all__ = [
    "FORMULAS",
    "AsymptoticValue",
    "EquivalenceRow",
    "EquivalenceTrace",
    "s_lambda_norm_exact",
    "s_lambda_norm_asymptotic",
    "asymptotic_norm",
    "extremal_function",
    "rank1_apply",
    "kernel_op_norm",
    "extremal_rayleigh",
    "equivalence_ratio",
    "equivalence_trace",
    "decay_ratio",
]

FORMULAS = ("S-norm-exact", "S-norm-asym", "T-norm-asym", "Vn-exp", "Vn-powexp", "Vn-main", "prob-largedev")


@dataclass(frozen=True)
class AsymptoticValue:
    log_value: float
    n_or_lambda: float
    formula: str

    def __post_init__(self):
        if self.formula not in FORMULAS:
            raise UsageError(f"unknown formula tag {self.formula!r}")
        if not math.isfinite(self.log_value):
            raise DomainError(f"asymptotic value is not finite: {self.log_value}")

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


@dataclass(frozen=True)
class EquivalenceRow:
    n: int
    log_norm_a: float
    log_norm_b: float
    log_diff: float
    ratio: float


@dataclass
class EquivalenceTrace:
    """Rows of ``‖V_A^n - V_B^n‖ / ‖V_A^n‖``, sorted by ``n``."""

    rows: list[EquivalenceRow] = field(default_factory=list)

    def add(self, row: EquivalenceRow) -> None:
        self.rows.append(row)
        self.rows.sort(key=lambda r: r.n)

    @property
    def ratios(self) -> list[float]:
        return [r.ratio for r in self.rows]

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("# log_* columns are natural logs of operator norms; ratio is linear\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["n", "log_norm_a", "log_norm_b", "log_diff", "ratio"])
        for r in self.rows:
            w.writerow([r.n, repr(r.log_norm_a), repr(r.log_norm_b), repr(r.log_diff), repr(r.ratio)])
        return out.getvalue()


def _log_expm1_ratio(x: float) -> float:
    """``log((e^x - 1)/x)``, continuous through 0 and safe for large ``|x|``."""
    if x == 0.0:
        return 0.0
    if x > 1.0:
        return x + math.log(-math.expm1(-x)) - math.log(x)
    if x < -1.0:
        return math.log(-math.expm1(x)) - math.log(-x)
    return math.log(math.expm1(x) / x)


def _log_exp_norm(lam: float, p: HolderExponent) -> float:
    """``log ‖e_λ‖_p`` on (0, 1)."""
    if p.is_inf:
        return max(lam, 0.0)
    pf = float(p.p)
    return _log_expm1_ratio(pf * lam) / pf


def s_lambda_norm_exact(lam: float, p) -> float:
    """``log ‖S_λ‖_p = log ‖e_λ‖_p + log ‖e_{-λ}‖_q``."""
    p = HolderExponent.of(p)
    lam = float(lam)
    return _log_exp_norm(lam, p) + _log_exp_norm(-lam, p.conjugate)


def s_lambda_norm_asymptotic(lam: float, p, formula: str = "S-norm-asym") -> AsymptoticValue:
    """``log(C_p e^λ / λ)``, shared by ``S_λ`` and the truncated ``T_λ``; needs ``λ > 0``."""
    if not lam > 0:
        raise DomainError(f"asymptotic S_λ formula needs λ > 0, got {lam!r}")
    if formula not in ("S-norm-asym", "T-norm-asym"):
        raise UsageError(f"formula must be S-norm-asym or T-norm-asym, got {formula!r}")
    return AsymptoticValue(math.log(cp_constant(p)) + lam - math.log(lam), float(lam), formula)


def _main_formula(log_abs_f0: float, r: float, rate: float, n: float, p: HolderExponent) -> float:
    return (
        math.log(cp_constant(p))
        + n * (log_abs_f0 + log_gamma(r + 1.0))
        + rate
        - log_gamma((r + 1.0) * n + 1.0)
    )


def asymptotic_norm(k: PowerExpKernel | SmoothFactorKernel, n: float, p, formula: str | None = None) -> AsymptoticValue:
    """``log[C_p (|f(0)| Γ(r+1))^n e^{f'(0)/f(0)} / Γ((r+1)n+1)]``.

    Evaluated through the tangent kernel, so a power-exponential kernel gives
    the same bits whichever way it is passed in.  Real ``n > 0`` is accepted.
    """
    p = HolderExponent.of(p)
    n = float(n)
    if not n > 0:
        raise DomainError(f"n must be positive, got {n!r}")
    h = tangent_kernel(k)
    if formula is None:
        if isinstance(k, SmoothFactorKernel) and k.exact_tangent is None:
            formula = "Vn-main"
        else:
            formula = "Vn-exp" if h.r == 0 else "Vn-powexp"
    return AsymptoticValue(_main_formula(h.log_c, h.r, h.mu, n, p), n, formula)


def _g(n: float, g_choice: str) -> float:
    if g_choice == "sqrt":
        return math.sqrt(n)
    if g_choice == "log":
        return math.log1p(n)
    raise UsageError(f"g_choice must be 'sqrt' or 'log', got {g_choice!r}")


def extremal_rate(p, r: float, mu: float, n: float, g_choice: str = "sqrt") -> float:
    """Decay rate ``a`` of the extremal function ``exp(-a t)``."""
    p = HolderExponent.of(p)
    if p.is_inf:
        return 0.0
    if p.p == 1:
        return _g(n, g_choice) * n
    return ((r + 1.0) * n - 1.0 + mu) / float(p.p - 1)


def extremal_function(
    p, r: float, mu: float, n: float, g_choice: str = "sqrt", grid: GridSpec | None = None
) -> ScaledGridFunction:
    """Asymptotically extremal input for ``V_k^n``, with ``mu = f'(0)/f(0)``.

    p = 1: ``exp(-g(n) n t)``; 1 < p < inf: ``exp(-((r+1)n - 1 + mu) t/(p-1))``;
    p = inf: the constant 1.
    """
    if not n >= 1:
        raise DomainError(f"n must be >= 1, got {n!r}")
    grid = grid or GridSpec()
    a = extremal_rate(p, r, mu, n, g_choice)
    return discretize(PowerExpKernel(1, 0.0, 0.0, -a), grid)


def rank1_apply(lam: float, u: ScaledGridFunction) -> ScaledGridFunction:
    """``S_λ u = <u, e_{-λ}> e_λ`` using the grid's cell quadrature."""
    grid = u.grid
    if u.is_zero:
        return u
    e_minus = discretize(PowerExpKernel(1, 0.0, 0.0, -float(lam)), grid)
    s = float(np.dot(u.values, e_minus.values))
    if s == 0.0:
        return ScaledGridFunction.zero(grid)
    log_inner = math.log(abs(s)) + math.log(grid.h) + u.log_scale + e_minus.log_scale
    e_plus = discretize(PowerExpKernel(1, 0.0, 0.0, float(lam)), grid)
    return e_plus.scaled(log_inner, 1 if s > 0 else -1)


def _as_grid(k, grid: GridSpec | None) -> ScaledGridFunction:
    if isinstance(k, ScaledGridFunction):
        return k
    return discretize(k, grid or GridSpec())


def kernel_op_norm(
    k: PowerExpKernel | SmoothFactorKernel,
    n: int,
    p,
    grid: GridSpec | None = None,
    method: str = "auto",
    tol: float = 1e-8,
) -> NormEstimate:
    """:func:`~volterra_iter.norms.op_norm` for an analytic kernel, seeding power iteration with the extremal function."""
    p = HolderExponent.of(p)
    grid = grid or GridSpec()
    kg = discretize(k, grid)
    start = None
    if kg.is_nonnegative and not (p.is_inf or p.p == 1):
        h = tangent_kernel(k)
        start = extremal_function(p, h.r, h.mu, n, grid=grid)
    return op_norm(kg, n, p, method=method, tol=tol, start=start)


def extremal_rayleigh(
    k: PowerExpKernel | SmoothFactorKernel,
    n: int,
    p,
    grid: GridSpec | None = None,
    g_choice: str = "sqrt",
) -> float:
    """``log ‖V_k^n f_n‖_p - log ‖f_n‖_p`` for the extremal ``f_n`` of ``k``."""
    grid = grid or GridSpec()
    h = tangent_kernel(k)
    u = extremal_function(p, h.r, h.mu, n, g_choice, grid)
    kn = conv_power_numeric(discretize(k, grid), n)
    return lp_norm(volterra_apply(kn, u), p) - lp_norm(u, p)


def equivalence_ratio(kA, kB, n: int, p, grid: GridSpec | None = None, tol: float = 1e-8) -> EquivalenceRow:
    """``‖V_A^n - V_B^n‖_p / ‖V_A^n‖_p`` as a trace row.

    The difference operator has kernel ``A^{*n} - B^{*n}`` (signed).  Its norm
    is exact at p in {1, inf}, an SVD at p = 2, and otherwise the upper bound
    ``‖A^{*n} - B^{*n}‖_1``.  The denominator uses the lower bound, so the
    reported ratio never understates the true one.
    """
    p = HolderExponent.of(p)
    a = _as_grid(kA, grid)
    b = _as_grid(kB, a.grid)
    if a.is_zero:
        raise DomainError("kA must not vanish identically")
    an = conv_power_numeric(a, n)
    bn = conv_power_numeric(b, n)
    d = an - bn
    norm_a = operator_norm(an, p, tol=tol)
    norm_b = operator_norm(bn, p, tol=tol)
    if d.is_zero:
        log_diff = -math.inf
    elif p.is_inf or p.p == 1 or p.p == 2:
        log_diff = operator_norm(d, p).log_upper
    else:
        log_diff = restricted_l1(d, 1.0)
    ratio = math.exp(log_diff - norm_a.log_lower) if log_diff > -math.inf else 0.0
    return EquivalenceRow(int(n), norm_a.log_lower, norm_b.log_lower, log_diff, ratio)


def equivalence_trace(kA, kB, ns, p, grid: GridSpec | None = None, tol: float = 1e-8) -> EquivalenceTrace:
    trace = EquivalenceTrace()
    for n in ns:
        trace.add(equivalence_ratio(kA, kB, n, p, grid, tol))
    return trace


def decay_ratio(
    k: PowerExpKernel | SmoothFactorKernel,
    n: int,
    j: int = 0,
    delta: float = 0.5,
    poly_degree: int = 0,
    p=1,
    grid: GridSpec | None = None,
) -> float:
    """``n^deg ∫_0^{1-δ} k^{*(n-j)} / ‖V_k^n‖_p``, which tends to 0 as ``n`` grows."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
    if not 0 <= j < n:
        raise DomainError(f"need 0 <= j < n, got j={j}, n={n}")
    if poly_degree < 0:
        raise DomainError("poly_degree must be >= 0")
    grid = grid or GridSpec()
    est = kernel_op_norm(k, n, p, grid)
    kg = discretize(k, grid)
    num = poly_degree * math.log(n) + restricted_l1(conv_power_numeric(kg, n - j), 1.0 - delta)
    return math.exp(num - est.log_lower)
