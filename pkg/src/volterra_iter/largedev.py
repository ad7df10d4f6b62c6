"""``P(X_1 + ... + X_n <= 1)`` for i.i.d. ``X_i`` with a density on (0, inf).

Because ``k^{*n}`` on (0, 1) only depends on ``k`` restricted to (0, 1), the
probability is ``∫_0^1 k^{*n}`` computed on the grid.  Each row of a report sets
that value beside a closed-form oracle (where one exists), a Monte Carlo
estimate and the large-deviation formula
``(f(0) Γ(r+1))^n e^{f'(0)/f(0)} / Γ((r+1)n+1)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import asymptotic_norm
from .errors import DomainError, UnsupportedError
from .grid import GridSpec, conv_power_numeric, discretize, restricted_l1
from .kernels import PowerExpKernel, SmoothFactorKernel, parse_kernel
from .special import log_gamma, log_regularized_lower_gamma

__all__ = [
    "DensitySpec",
    "LargeDevRow",
    "LargeDevReport",
    "parse_density",
    "prob_sum_leq1_grid",
    "prob_sum_leq1_oracle",
    "prob_sum_leq1_asymptotic",
    "prob_sum_leq1_mc",
    "largedev_report",
    "MC_CHUNK",
]

FAMILIES = ("uniform01", "exponential", "gamma", "kernel")
MC_CHUNK = 1 << 16
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class DensitySpec:
    """A probability density with its near-zero data ``k(t) = t^r f(t)``.

    ``r``, ``f0`` and ``f1`` are stored rather than inferred.  For the
    ``kernel`` family the density is ``kernel`` on (0, 1) and the declared
    total ``normalization`` covers whatever lies beyond 1.
    """

    family: str
    params: tuple = ()
    kernel: SmoothFactorKernel | None = None
    normalization: float = 1.0
    r: float = 0.0
    f0: float = 1.0
    f1: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown density family {self.family!r}")
        if abs(self.normalization - 1.0) > 1e-12:
            raise DomainError(f"density must have total mass 1, declared {self.normalization}")

    @classmethod
    def uniform01(cls) -> "DensitySpec":
        return cls("uniform01", (), r=0.0, f0=1.0, f1=0.0)

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "DensitySpec":
        rate = float(rate)
        if not rate > 0:
            raise DomainError(f"rate must be positive, got {rate}")
        return cls("exponential", (rate,), r=0.0, f0=rate, f1=-rate * rate)

    @classmethod
    def gamma(cls, shape: float, rate: float = 1.0) -> "DensitySpec":
        shape, rate = float(shape), float(rate)
        if not (shape > 0 and rate > 0):
            raise DomainError(f"shape and rate must be positive, got {shape}, {rate}")
        f0 = math.exp(shape * math.log(rate) - log_gamma(shape))
        return cls("gamma", (shape, rate), r=shape - 1.0, f0=f0, f1=-rate * f0)

    @classmethod
    def from_kernel(cls, kernel: SmoothFactorKernel, mass: float = 1.0) -> "DensitySpec":
        if isinstance(kernel, PowerExpKernel):
            kernel = kernel.as_smooth_factor()
        inside = kernel.mass()
        if inside > mass + 1e-9:
            raise DomainError(f"mass on (0,1) is {inside:.12g}, more than the declared total {mass}")
        probe = np.linspace(0.0, 1.0, 1025)[1:]
        if np.any(np.asarray(kernel.f(probe)) < 0) or kernel.f0 < 0:
            raise DomainError("density must be nonnegative on (0, 1)")
        return cls("kernel", (), kernel=kernel, normalization=float(mass), r=kernel.r, f0=kernel.f0, f1=kernel.f1)

    def grid_kernel(self) -> PowerExpKernel | SmoothFactorKernel:
        """The density restricted to (0, 1), in a form :func:`discretize` accepts."""
        if self.family == "uniform01":
            return PowerExpKernel(1, 0.0, 0.0, 0.0)
        if self.family == "exponential":
            (rate,) = self.params
            return PowerExpKernel(1, math.log(rate), 0.0, -rate)
        if self.family == "gamma":
            shape, rate = self.params
            return PowerExpKernel(1, shape * math.log(rate) - log_gamma(shape), shape - 1.0, -rate)
        return self.kernel

    def tangent(self) -> PowerExpKernel:
        if self.f0 == 0:
            raise DomainError("large-deviation formula needs f(0) != 0")
        return PowerExpKernel(1, math.log(self.f0), self.r, self.f1 / self.f0)

    def describe(self) -> str:
        if self.family == "uniform01":
            return "uniform01"
        if self.family == "exponential":
            return f"exponential:rate={self.params[0]!r}"
        if self.family == "gamma":
            return f"gamma:shape={self.params[0]!r},rate={self.params[1]!r}"
        k = self.kernel
        if k.poly is not None:
            return "kernel:poly:r=%r,f=%s" % (k.r, ",".join(repr(a) for a in k.poly))
        return f"kernel:<r={k.r!r},f0={k.f0!r},f1={k.f1!r}>"

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.family == "uniform01":
            return rng.random(shape)
        if self.family == "exponential":
            (rate,) = self.params
            return -np.log1p(-rng.random(shape)) / rate
        if self.family == "gamma":
            shape_a, rate = self.params
            return rng.standard_gamma(shape_a, shape) / rate
        raise UnsupportedError(
            "no sampler for the 'kernel' density family; use the grid path (prob_sum_leq1_grid)"
        )


def parse_density(text: str, mass: float = 1.0) -> DensitySpec:
    """``uniform01``, ``exponential:rate=R``, ``gamma:shape=A,rate=B`` or ``kernel:<kernel spec>``."""
    text = text.strip()
    if text == "uniform01":
        return DensitySpec.uniform01()
    if text.startswith("kernel:"):
        return DensitySpec.from_kernel(parse_kernel(text[len("kernel:"):]), mass)
    name, _, rest = text.partition(":")
    fields = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise DomainError(f"expected key=value in density spec, got {item!r}")
            try:
                fields[key.strip()] = float(val)
            except ValueError as exc:
                raise DomainError(f"bad number {val!r} for {key!r} in density spec") from exc
    if name == "exponential":
        unknown = set(fields) - {"rate"}
        if unknown:
            raise DomainError(f"unknown exponential parameter(s) {sorted(unknown)}")
        return DensitySpec.exponential(fields.get("rate", 1.0))
    if name == "gamma":
        unknown = set(fields) - {"shape", "rate"}
        if unknown or "shape" not in fields:
            raise DomainError("gamma density needs shape=<a> and optional rate=<b>")
        return DensitySpec.gamma(fields["shape"], fields.get("rate", 1.0))
    raise DomainError(f"unknown density {text!r}; expected uniform01, exponential:..., gamma:... or kernel:...")


def prob_sum_leq1_grid(d: DensitySpec, n: int, grid: GridSpec | None = None) -> float:
    """``log P(S_n <= 1) = log ∫_0^1 k^{*n}`` on the grid."""
    grid = grid or GridSpec()
    kg = discretize(d.grid_kernel(), grid)
    if kg.is_zero:
        return -math.inf
    return restricted_l1(conv_power_numeric(kg, n), 1.0)


def prob_sum_leq1_oracle(d: DensitySpec, n: int) -> float | None:
    """Closed-form ``log P(S_n <= 1)`` where one is known, else ``None``."""
    if d.family == "uniform01":
        return -log_gamma(n + 1.0)
    if d.family == "exponential":
        return log_regularized_lower_gamma(float(n), d.params[0])
    if d.family == "gamma":
        shape, rate = d.params
        return log_regularized_lower_gamma(n * shape, rate)
    k = d.kernel
    if k.poly is not None and len(k.poly) == 1:
        # density c t^r on (0,1): the n-fold sum is Dirichlet-like, exact in closed form
        c = k.poly[0]
        return n * (math.log(c) + log_gamma(k.r + 1.0)) - log_gamma((k.r + 1.0) * n + 1.0)
    return None


def prob_sum_leq1_asymptotic(d: DensitySpec, n: float) -> float:
    """``log[(f(0) Γ(r+1))^n e^{f'(0)/f(0)} / Γ((r+1)n+1)]``."""
    return asymptotic_norm(d.tangent(), n, 1, formula="prob-largedev").log_value


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    # Philox is counter based: one key per seed, chunk index in the high counter word.
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64, counter=[0, 0, 0, chunk]))


def prob_sum_leq1_mc(d: DensitySpec, n: int, trials: int, seed: int = 42) -> tuple[float, float]:
    """Monte Carlo ``(estimate, stderr)``; identical for fixed ``(seed, trials, n)``.

    Trials are split into chunks of :data:`MC_CHUNK`, each drawing from its own
    counter-addressed Philox stream, so chunks may run in any order.
    """
    if trials < 1000:
        raise DomainError(f"need at least 1000 trials, got {trials}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if d.family == "kernel":
        d.sample(None, 0)
    hits = 0
    for chunk, start in enumerate(range(0, trials, MC_CHUNK)):
        size = min(MC_CHUNK, trials - start)
        x = d.sample(_chunk_rng(seed, chunk), (size, n))
        hits += int(np.count_nonzero(x.sum(axis=1) <= 1.0))
    est = hits / trials
    return est, math.sqrt(est * (1.0 - est) / trials)


@dataclass(frozen=True)
class LargeDevRow:
    n: int
    log_p_grid: float
    log_p_oracle: float | None
    mc_estimate: float
    mc_stderr: float
    log_p_asymptotic: float
    ratio_grid_over_asym: float
    below_mc_resolution: bool = False


def _json_num(x):
    if x is None:
        return None
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


@dataclass
class LargeDevReport:
    rows: list[LargeDevRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    CSV_HEADER = ("n", "log_p_grid", "log_p_oracle", "mc_estimate", "mc_stderr", "log_p_asym", "ratio")

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("# log_p_* are natural logs of P(S_n <= 1); mc_estimate, mc_stderr and ratio are linear\n")
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([
                r.n,
                repr(r.log_p_grid),
                "" if r.log_p_oracle is None else repr(r.log_p_oracle),
                repr(r.mc_estimate),
                repr(r.mc_stderr),
                repr(r.log_p_asymptotic),
                repr(r.ratio_grid_over_asym),
            ])
        return out.getvalue()

    def to_json(self, extra_meta: dict | None = None) -> str:
        meta = dict(self.meta)
        if extra_meta:
            meta.update(extra_meta)
        rows = [
            {
                "n": r.n,
                "log_p_grid": _json_num(r.log_p_grid),
                "log_p_oracle": _json_num(r.log_p_oracle),
                "mc_estimate": r.mc_estimate,
                "mc_stderr": r.mc_stderr,
                "log_p_asym": _json_num(r.log_p_asymptotic),
                "ratio": _json_num(r.ratio_grid_over_asym),
                "below_mc_resolution": r.below_mc_resolution,
            }
            for r in self.rows
        ]
        return json.dumps({"version": "1", "meta": meta, "rows": rows}, indent=2, sort_keys=True) + "\n"


def largedev_report(
    d: DensitySpec,
    n_values,
    grid: GridSpec | None = None,
    trials: int = 100_000,
    seed: int = 42,
) -> LargeDevReport:
    """One row per ``n``: grid, oracle, Monte Carlo and asymptotic ``P(S_n <= 1)``.

    Monte Carlo is skipped (reported as 0 with ``below_mc_resolution``) when the
    asymptotic probability is below ``10/trials``; the ``kernel`` family has no
    sampler and is always reported that way.
    """
    grid = grid or GridSpec()
    report = LargeDevReport(
        meta={"density": d.describe(), "m": grid.m, "trials": trials, "seed": seed, "log_base": "e"}
    )
    for n in sorted(set(int(v) for v in n_values)):
        log_grid = prob_sum_leq1_grid(d, n, grid)
        log_asym = prob_sum_leq1_asymptotic(d, n)
        below = d.family == "kernel" or log_asym < math.log(10.0 / trials)
        est, se = (0.0, 0.0) if below else prob_sum_leq1_mc(d, n, trials, seed)
        report.rows.append(
            LargeDevRow(
                n=n,
                log_p_grid=log_grid,
                log_p_oracle=prob_sum_leq1_oracle(d, n),
                mc_estimate=est,
                mc_stderr=se,
                log_p_asymptotic=log_asym,
                ratio_grid_over_asym=math.exp(log_grid - log_asym),
                below_mc_resolution=below,
            )
        )
    return report
