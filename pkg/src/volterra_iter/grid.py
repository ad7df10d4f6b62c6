"""Uniform-grid representation of functions on (0, 1) and their convolution.

A :class:`ScaledGridFunction` holds cell means ``values[j] * exp(log_scale)``
of a function over the cells ``[j h, (j+1) h)``.  Mantissas are renormalised
by powers of two, which is exact, so multiplying a kernel by a constant only
ever touches ``log_scale``.

Convolution is the exact convolution of the two piecewise-constant
interpolants, projected back onto cell means.  Two boxes of width ``h``
convolve to a hat of area ``h**2`` split evenly between two adjacent cells,
so with ``⊛`` the discrete causal convolution::

    c_j = (h/2) * ((a ⊛ b)_j + (a ⊛ b)_{j-1})

This is multiplication by ``(h/2)(1 + x)`` in ``R[x]/(x^m)``.  It is therefore
exactly commutative and associative; only rounding differs between orders.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .kernels import PowerExpKernel, SmoothFactorKernel

__all__ = [
    "GridSpec",
    "ScaledGridFunction",
    "discretize",
    "convolve",
    "conv_power_numeric",
    "restricted_l1",
    "operator_column",
    "DEFAULT_M",
]

DEFAULT_M = 4096
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class GridSpec:
    """``m`` equal cells on (0, 1); ``m`` a power of two so ``h * m == 1`` exactly."""

    m: int = DEFAULT_M

    def __post_init__(self):
        m = self.m
        if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
            raise DomainError(f"m must be an integer, got {m!r}")
        if m < 8 or m & (m - 1):
            raise DomainError(f"m must be a power of two >= 8, got {m}")

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def nodes(self) -> np.ndarray:
        """Cell midpoints."""
        return (np.arange(self.m) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.h


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScaledGridFunction:
    grid: GridSpec
    values: np.ndarray
    log_scale: float

    def __post_init__(self):
        if self.values.shape != (self.grid.m,):
            raise UsageError(f"expected {self.grid.m} values, got shape {self.values.shape}")

    @classmethod
    def from_array(cls, grid: GridSpec, values, log_scale: float = 0.0) -> "ScaledGridFunction":
        """Wrap raw cell values and renormalise so that ``max|values|`` lies in [1/2, 1)."""
        values = np.array(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise DomainError("grid values must be finite")
        peak = float(np.max(np.abs(values))) if values.size else 0.0
        if peak == 0.0 or log_scale == -math.inf:
            return cls.zero(grid)
        _, e = math.frexp(peak)
        return cls(grid, _frozen(np.ldexp(values, -e)), float(log_scale) + e * _LN2)

    @classmethod
    def zero(cls, grid: GridSpec) -> "ScaledGridFunction":
        return cls(grid, _frozen(np.zeros(grid.m)), -math.inf)

    @classmethod
    def constant(cls, grid: GridSpec, value: float = 1.0) -> "ScaledGridFunction":
        return cls.from_array(grid, np.full(grid.m, float(value)))

    @classmethod
    def sample(cls, grid: GridSpec, func) -> "ScaledGridFunction":
        """Midpoint samples of a vectorised ``func`` (second-order cell means for smooth ``func``)."""
        return cls.from_array(grid, func(grid.nodes))

    @property
    def is_zero(self) -> bool:
        return self.log_scale == -math.inf

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def linear(self) -> np.ndarray:
        """Plain cell values; underflows to 0 once ``log_scale`` drops below about -745."""
        if self.is_zero:
            return np.zeros(self.grid.m)
        return self.values * math.exp(self.log_scale)

    def log_abs(self) -> np.ndarray:
        """``log|f|`` per cell, never underflowing."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.values)) + self.log_scale

    def scaled(self, log_factor: float, sign: int = 1) -> "ScaledGridFunction":
        """Multiply by ``sign * exp(log_factor)``; the mantissas are untouched when ``sign = 1``."""
        if self.is_zero:
            return self
        values = self.values if sign > 0 else _frozen(-self.values)
        return ScaledGridFunction(self.grid, values, self.log_scale + log_factor)

    def __neg__(self) -> "ScaledGridFunction":
        return self.scaled(0.0, -1)

    def __sub__(self, other: "ScaledGridFunction") -> "ScaledGridFunction":
        return self + (-other)

    def __add__(self, other: "ScaledGridFunction") -> "ScaledGridFunction":
        _check_same_grid(self, other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        s = max(self.log_scale, other.log_scale)
        v = self.values * math.exp(self.log_scale - s) + other.values * math.exp(other.log_scale - s)
        return ScaledGridFunction.from_array(self.grid, v, s)

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,mantissa,log_scale`` rows; returns the text when ``fh`` is None."""
        out = io.StringIO() if fh is None else fh
        out.write("# t: cell midpoint; value = mantissa * exp(log_scale); log_scale is a natural log\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["t", "mantissa", "log_scale"])
        ls = repr(self.log_scale) if math.isfinite(self.log_scale) else "-inf"
        for t, v in zip(self.nodes, self.values):
            w.writerow([repr(float(t)), repr(float(v)), ls])
        return out.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, text: str) -> "ScaledGridFunction":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.DictReader(rows)
        if reader.fieldnames != ["t", "mantissa", "log_scale"]:
            raise UsageError(f"unexpected CSV header {reader.fieldnames!r}")
        data = list(reader)
        grid = GridSpec(len(data))
        values = np.array([float(r["mantissa"]) for r in data])
        scales = {r["log_scale"] for r in data}
        if len(scales) != 1:
            raise UsageError("log_scale must be identical on every row")
        log_scale = float(scales.pop())
        if log_scale == -math.inf:
            return cls.zero(grid)
        return cls(grid, _frozen(values), log_scale)


def _check_same_grid(a: ScaledGridFunction, b: ScaledGridFunction) -> None:
    if a.grid != b.grid:
        raise UsageError(f"grid mismatch: m={a.grid.m} vs m={b.grid.m}")


def _log_power_moments(m: int, r: float) -> np.ndarray:
    """``log((1/h) ∫_{jh}^{(j+1)h} t^r dt)`` for every cell, without overflow."""
    h = 1.0 / m
    if r == 0:
        return np.zeros(m)
    a = r + 1.0
    j = np.arange(m, dtype=float)
    with np.errstate(divide="ignore"):
        # (j+1)^a - j^a = (j+1)^a * (1 - (j/(j+1))^a)
        lm = a * np.log(j + 1.0) + np.log(-np.expm1(a * np.log(j / (j + 1.0))))
    lm[0] = 0.0
    return lm - math.log(a) + r * math.log(h)


def discretize(k: PowerExpKernel | SmoothFactorKernel, grid: GridSpec) -> ScaledGridFunction:
    """Cell means of ``k``: exact moments of ``t^r`` times the smooth factor at the midpoint."""
    lm = _log_power_moments(grid.m, k.r)
    if isinstance(k, PowerExpKernel):
        shape = lm + k.mu * grid.nodes
        top = float(np.max(shape))
        values = k.sign * np.exp(shape - top)
        return ScaledGridFunction.from_array(grid, values, top + k.log_c)
    top = float(np.max(lm))
    f = np.asarray(k.f(grid.nodes), dtype=float)
    return ScaledGridFunction.from_array(grid, np.exp(lm - top) * f, top)


def _raw_product(a: np.ndarray, b: np.ndarray, method: str) -> np.ndarray:
    m = a.size
    if method == "direct":
        c = np.convolve(a, b)[:m]
    elif method == "fft":
        n = 2 * m
        c = np.fft.irfft(np.fft.rfft(a, n) * np.fft.rfft(b, n), n)[:m]
    else:
        raise UsageError(f"unknown convolution method {method!r}")
    out = c.copy()
    out[1:] += c[:-1]
    return out


def convolve(a: ScaledGridFunction, b: ScaledGridFunction, method: str = "direct") -> ScaledGridFunction:
    """Causal convolution truncated to (0, 1).

    ``method="direct"`` is the O(m^2) reference; ``"fft"`` agrees with it to
    about 1e-13 relative to the peak, but not cell by cell where values are tiny.
    """
    _check_same_grid(a, b)
    if a.is_zero or b.is_zero:
        return ScaledGridFunction.zero(a.grid)
    out = _raw_product(a.values, b.values, method) * 0.5
    return ScaledGridFunction.from_array(a.grid, out, a.log_scale + b.log_scale + math.log(a.grid.h))


def conv_power_numeric(k: ScaledGridFunction, n: int, method: str = "direct") -> ScaledGridFunction:
    """``k^{*n}`` by left-to-right binary powering.

    For each bit of ``n`` after the leading one: square, then multiply by ``k``
    if the bit is set.  The order is fixed, so results are bitwise reproducible.
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise UsageError(f"n must be an integer, got {n!r}")
    if n < 1:
        raise UsageError(f"n must be >= 1 (the algebra has no identity), got {n}")
    result = k
    for bit in bin(int(n))[3:]:
        result = convolve(result, result, method)
        if bit == "1":
            result = convolve(result, k, method)
    return result


def restricted_l1(f: ScaledGridFunction, b: float = 1.0) -> float:
    """``log ∫_0^b |f|``, the cell containing ``b`` weighted by the fraction inside."""
    if not 0.0 < b <= 1.0:
        raise DomainError(f"b must lie in (0, 1], got {b!r}")
    if f.is_zero:
        return -math.inf
    m = f.grid.m
    x = b * m
    full = min(int(math.floor(x)), m)
    absv = np.abs(f.values)
    total = float(np.sum(absv[:full]))
    if full < m:
        total += (x - full) * float(absv[full])
    if total == 0.0:
        return -math.inf
    return math.log(total) + math.log(f.grid.h) + f.log_scale


def operator_column(k: ScaledGridFunction) -> tuple[np.ndarray, float]:
    """First column of the lower-triangular Toeplitz matrix of ``u -> k * u``.

    Returned as ``(mantissa, log_scale)``; the matrix is ``exp(log_scale) * T``
    with ``T[i, j] = col[i - j]`` for ``i >= j``.  It is the matrix of
    :func:`convolve` acting on cell-mean vectors.
    """
    col = k.values.copy()
    col[1:] += k.values[:-1]
    return col * 0.5, k.log_scale + math.log(k.grid.h)
