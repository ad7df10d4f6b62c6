"""Exact kernel algebra on (0, 1).

Two kernel families are represented:

* :class:`PowerExpKernel`, ``k(t) = ±exp(log_c) t^r exp(mu t)``, which is
  closed under convolution powers;
* :class:`SmoothFactorKernel`, ``k(t) = t^r f(t)`` with ``f`` given as a
  polynomial or a uniform table, and ``f(0)``, ``f'(0)`` stored explicitly.

The module also parses the kernel mini-language used on the command line::

    kernel   := powexp | poly
    powexp   := "powexp:" "c=" REAL "," "r=" REAL "," "mu=" REAL
    poly     := "poly:" "r=" REAL "," "f=" REAL ("," REAL)*

``powexp`` fields may appear in any order; ``c`` defaults to 1 and ``mu`` to 0,
``r`` is required.  In ``poly`` the ``f=`` list must come last and gives the
coefficients ``a0, a1, ...`` of ``f(t) = sum a_j t^j``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .special import log_gamma

__all__ = [
    "PowerExpKernel",
    "SmoothFactorKernel",
    "KernelSpecError",
    "conv_power_closed_form",
    "convolve_closed_form",
    "tangent_kernel",
    "parse_kernel",
]


@dataclass(frozen=True)
class PowerExpKernel:
    """``k(t) = sign * exp(log_c) * t**r * exp(mu * t)``."""

    sign: int
    log_c: float
    r: float
    mu: float

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign!r}")
        if not self.r > -1:
            raise DomainError(f"exponent r must exceed -1, got {self.r!r}")
        if not math.isfinite(self.log_c) or not math.isfinite(self.mu):
            raise DomainError("log_c and mu must be finite")

    @classmethod
    def from_coefficient(cls, c: float, r: float, mu: float = 0.0) -> "PowerExpKernel":
        if c == 0:
            raise DomainError("coefficient must be non-zero")
        return cls(1 if c > 0 else -1, math.log(abs(c)), float(r), float(mu))

    @property
    def coefficient(self) -> float:
        return self.sign * math.exp(self.log_c)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.sign * np.exp(self.log_c + self.r * np.log(t) + self.mu * t)

    def as_smooth_factor(self) -> "SmoothFactorKernel":
        """View as ``t^r f(t)`` with ``f(t) = c exp(mu t)``."""
        c, mu = self.coefficient, self.mu
        return SmoothFactorKernel(
            r=self.r,
            f0=c,
            f1=c * mu,
            f_eval=lambda t: c * np.exp(mu * np.asarray(t, dtype=float)),
            exact_tangent=self,
        )


@dataclass(frozen=True)
class SmoothFactorKernel:
    """``k(t) = t**r * f(t)`` on [0, 1].

    Build with :meth:`from_poly` or :meth:`from_table` in normal use.  The raw
    constructor takes any vectorised callable ``f_eval``; ``f0`` and ``f1``
    must then be supplied by the caller.  ``f0 = 0`` is allowed here (the
    kernel ``t`` written as ``poly:r=0,f=0,1`` is legitimate) and rejected by
    the operations that need ``f(0) != 0``.
    """

    r: float
    f0: float
    f1: float
    f_eval: object
    poly: tuple[float, ...] | None = None
    table: tuple[float, ...] | None = None
    # set when the kernel is itself power-exponential, so no rounding creeps in
    exact_tangent: PowerExpKernel | None = None

    def __post_init__(self):
        if not self.r > -1:
            raise DomainError(f"exponent r must exceed -1, got {self.r!r}")
        if not callable(self.f_eval):
            raise DomainError("f_eval must be callable")

    @classmethod
    def from_poly(cls, r: float, coeffs) -> "SmoothFactorKernel":
        coeffs = tuple(float(a) for a in coeffs)
        if not coeffs:
            raise DomainError("polynomial needs at least one coefficient")
        f1 = coeffs[1] if len(coeffs) > 1 else 0.0
        arr = np.array(coeffs)
        return cls(
            r=float(r),
            f0=coeffs[0],
            f1=f1,
            f_eval=lambda t: np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), arr),
            poly=coeffs,
        )

    @classmethod
    def from_table(cls, r: float, values, f1: float, f0: float | None = None) -> "SmoothFactorKernel":
        """Piecewise-linear interpolation of ``values`` on a uniform grid of [0, 1].

        ``f1`` has to be given: a table cannot determine ``f'(0)`` exactly.
        """
        values = tuple(float(v) for v in values)
        if len(values) < 2:
            raise DomainError("table needs at least two points")
        if f0 is None:
            f0 = values[0]
        elif f0 != values[0]:
            raise DomainError(f"f0={f0} disagrees with table value {values[0]} at t=0")
        xs = np.linspace(0.0, 1.0, len(values))
        ys = np.array(values)
        return cls(
            r=float(r),
            f0=float(f0),
            f1=float(f1),
            f_eval=lambda t: np.interp(np.asarray(t, dtype=float), xs, ys),
            table=values,
        )

    def f(self, t):
        return self.f_eval(t)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return t**self.r * self.f_eval(t)

    def mass(self) -> float:
        """``∫_0^1 k``; exact for polynomial factors, adaptive quadrature otherwise."""
        if self.poly is not None:
            return sum(a / (self.r + j + 1) for j, a in enumerate(self.poly))
        from scipy.integrate import quad

        val, _ = quad(lambda t: float(self(t)), 0.0, 1.0, limit=200)
        return val


def conv_power_closed_form(k: PowerExpKernel, n: float) -> PowerExpKernel:
    """Convolution power ``k^{*n}`` in closed form, for any real ``n > 0``.

    ``(t^r e^{mu t})^{*n} = Γ(r+1)^n / Γ((r+1)n) · t^{(r+1)n-1} e^{mu t}``.
    A negative coefficient is only allowed with integer ``n``.
    """
    n = float(n)
    if not n > 0:
        raise DomainError(f"n must be positive, got {n!r}")
    integer_n = n.is_integer()
    if k.sign < 0 and not integer_n:
        raise DomainError("non-integer power of a negative kernel is undefined")
    a = (k.r + 1.0) * n
    sign = -1 if (k.sign < 0 and int(n) % 2 == 1) else 1
    if n == 1.0:
        return k
    log_c = n * (k.log_c + log_gamma(k.r + 1.0)) - log_gamma(a)
    return PowerExpKernel(sign, log_c, a - 1.0, k.mu)


def convolve_closed_form(a: PowerExpKernel, b: PowerExpKernel) -> PowerExpKernel:
    """``a * b`` for two kernels with the same rate (Beta integral)."""
    if a.mu != b.mu:
        raise DomainError("closed-form convolution needs equal rates mu")
    ra, rb = a.r + 1.0, b.r + 1.0
    log_beta = log_gamma(ra) + log_gamma(rb) - log_gamma(ra + rb)
    return PowerExpKernel(a.sign * b.sign, a.log_c + b.log_c + log_beta, ra + rb - 1.0, a.mu)


def tangent_kernel(k: SmoothFactorKernel | PowerExpKernel) -> PowerExpKernel:
    """``h(t) = f(0) t^r exp((f'(0)/f(0)) t)``: the power-exponential kernel matching ``k`` at 0."""
    if isinstance(k, PowerExpKernel):
        return k
    if k.exact_tangent is not None:
        return k.exact_tangent
    if k.f0 == 0:
        raise DomainError("tangent kernel needs f(0) != 0")
    return PowerExpKernel(1 if k.f0 > 0 else -1, math.log(abs(k.f0)), k.r, k.f1 / k.f0)


class KernelSpecError(DomainError):
    """Malformed kernel spec string; ``position`` indexes the offending character."""

    def __init__(self, message: str, text: str, position: int):
        super().__init__(f"{message} at position {position}\n    {text}\n    {' ' * position}^")
        self.text = text
        self.position = position


_REAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


def _parse_real(text: str, pos: int) -> tuple[float, int]:
    m = _REAL.match(text, pos)
    if not m:
        raise KernelSpecError("expected a real number", text, pos)
    return float(m.group()), m.end()


def _expect(text: str, pos: int, token: str) -> int:
    if not text.startswith(token, pos):
        raise KernelSpecError(f"expected {token!r}", text, pos)
    return pos + len(token)


def _parse_key(text: str, pos: int, allowed) -> tuple[str, int]:
    for key in sorted(allowed, key=len, reverse=True):
        if text.startswith(key + "=", pos):
            return key, pos + len(key) + 1
    raise KernelSpecError(f"expected one of {', '.join(k + '=' for k in allowed)}", text, pos)


def parse_kernel(text: str) -> PowerExpKernel | SmoothFactorKernel:
    """Parse ``powexp:c=..,r=..,mu=..`` or ``poly:r=..,f=a0,a1,...``."""
    text = text.strip()
    if text.startswith("powexp:"):
        pos = len("powexp:")
        fields: dict[str, float] = {}
        while True:
            key_pos = pos
            key, pos = _parse_key(text, pos, ("c", "r", "mu"))
            if key in fields:
                raise KernelSpecError(f"duplicate field {key!r}", text, key_pos)
            fields[key], pos = _parse_real(text, pos)
            if pos == len(text):
                break
            pos = _expect(text, pos, ",")
        if "r" not in fields:
            raise KernelSpecError("missing field 'r'", text, len(text))
        c = fields.get("c", 1.0)
        if c == 0:
            raise KernelSpecError("coefficient c must be non-zero", text, text.index("c=") + 2)
        if not fields["r"] > -1:
            raise KernelSpecError("r must exceed -1", text, text.index("r=") + 2)
        return PowerExpKernel.from_coefficient(c, fields["r"], fields.get("mu", 0.0))
    if text.startswith("poly:"):
        pos = _expect(text, len("poly:"), "r=")
        r_pos = pos
        r, pos = _parse_real(text, pos)
        if not r > -1:
            raise KernelSpecError("r must exceed -1", text, r_pos)
        pos = _expect(text, pos, ",")
        pos = _expect(text, pos, "f=")
        coeffs = []
        while True:
            a, pos = _parse_real(text, pos)
            coeffs.append(a)
            if pos == len(text):
                break
            pos = _expect(text, pos, ",")
        return SmoothFactorKernel.from_poly(r, coeffs)
    raise KernelSpecError("expected 'powexp:' or 'poly:'", text, 0)
