"""Command-line entry point: ``volterra-iter <subcommand> [options]``.

Every subcommand writes CSV (default) or JSON to stdout or ``--output``.
CSV output starts with one ``#`` comment line stating which columns are
natural logs.  JSON output carries ``"version": "1"`` and the full run
configuration.  Exit status: 0 on success, 1 on a usage error, 2 when a
numerical procedure fails (the best bounds found are printed to stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass

from .asymptotics import (
    asymptotic_norm,
    decay_ratio,
    equivalence_trace,
    extremal_function,
    kernel_op_norm,
)
from .errors import NormNotConverged, NumericalError, UnsupportedError, VolterraError
from .grid import DEFAULT_M, GridSpec, conv_power_numeric, discretize
from .kernels import SmoothFactorKernel, parse_kernel, tangent_kernel
from .largedev import largedev_report, parse_density
from .norms import lp_norm, volterra_apply
from .special import HolderExponent

FORMAT_VERSION = "1"


class CliUsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliUsageError(f"{self.prog}: error: {message}")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    spec: str | None
    spec2: str | None
    p: str | None
    n: list[int]
    m: int
    method: str | None
    tol: float
    trials: int | None
    seed: int | None
    output: str | None
    format: str


def _kernel_arg(text):
    try:
        return text, parse_kernel(text)
    except VolterraError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _density_arg(text):
    return text


def _p_arg(text):
    try:
        return HolderExponent.of(text)
    except VolterraError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def parse_n_values(text: str) -> list[int]:
    """``a..b`` (inclusive) or ``a,b,c``; a single integer is a one-element list."""
    text = text.strip()
    try:
        if ".." in text:
            if "," in text:
                raise argparse.ArgumentTypeError("mixing a..b ranges with comma lists is not allowed")
            lo, hi = text.split("..")
            values = list(range(int(lo), int(hi) + 1))
            if not values:
                raise argparse.ArgumentTypeError(f"empty range {text!r}")
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer list or range: {text!r}") from exc
    bad = [v for v in values if v <= 0]
    if bad:
        raise argparse.ArgumentTypeError(f"n must be positive, got {bad[0]}")
    return values


def _m_arg(text):
    try:
        return GridSpec(int(text)).m
    except (ValueError, VolterraError) as exc:
        raise argparse.ArgumentTypeError(f"grid size must be a power of two >= 8, got {text!r}") from exc


def _positive_float(text):
    try:
        v = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volterra-iter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(sp, default_format="csv"):
        sp.add_argument("--m", type=_m_arg, default=DEFAULT_M, help="grid cells, power of two (default 4096)")
        sp.add_argument("--tol", type=_positive_float, default=1e-8, help="power-iteration tolerance")
        sp.add_argument("--format", choices=("csv", "json"), default=default_format)
        sp.add_argument("--output", "-o", default=None, help="write here instead of stdout")

    sp = sub.add_parser("convpow", help="dump k^{*n} on the grid")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--method", choices=("direct", "fft"), default="direct")
    common(sp)

    sp = sub.add_parser("norm", help="operator norm estimate of V_k^n")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--p", type=_p_arg, required=True)
    sp.add_argument("--method", choices=("auto", "exact-l1", "svd-p2", "power-iteration", "bound-only"), default="auto")
    common(sp, default_format="json")

    sp = sub.add_parser("table", help="operator norm vs asymptotic formula")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--p", type=_p_arg, required=True)
    sp.add_argument("--method", choices=("auto", "exact-l1", "svd-p2", "power-iteration", "bound-only"), default="auto")
    common(sp)

    sp = sub.add_parser("extremal", help="Rayleigh quotient of the extremal sequence vs the norm")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--p", type=_p_arg, required=True)
    sp.add_argument("--g", choices=("sqrt", "log"), default="sqrt", help="growth function for p=1")
    common(sp)

    sp = sub.add_parser("equiv", help="equivalence trace between two kernels (default: the tangent kernel)")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--kernel2", type=_kernel_arg, default=None)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--p", type=_p_arg, required=True)
    common(sp)

    sp = sub.add_parser("decay", help="restricted-mass decay ratio trace")
    sp.add_argument("--kernel", type=_kernel_arg, required=True)
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--p", type=_p_arg, default=HolderExponent(1))
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--j", type=int, default=0)
    sp.add_argument("--degree", type=int, default=0)
    common(sp)

    sp = sub.add_parser("largedev", help="P(S_n <= 1): grid, oracle, Monte Carlo, asymptotic")
    sp.add_argument("--density", type=_density_arg, required=True,
                    help="uniform01 | exponential:rate=R | gamma:shape=A,rate=B | kernel:<kernel spec>")
    sp.add_argument("--mass", type=_positive_float, default=1.0, help="declared total mass for kernel densities")
    sp.add_argument("--n", type=parse_n_values, required=True)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=42)
    common(sp)
    return parser


def _config(args) -> RunConfig:
    kernel = getattr(args, "kernel", None)
    kernel2 = getattr(args, "kernel2", None)
    p = getattr(args, "p", None)
    spec = kernel[0] if kernel else getattr(args, "density", None)
    return RunConfig(
        subcommand=args.subcommand,
        spec=spec,
        spec2=kernel2[0] if kernel2 else None,
        p=None if p is None else str(p),
        n=list(args.n),
        m=args.m,
        method=getattr(args, "method", None),
        tol=args.tol,
        trials=getattr(args, "trials", None),
        seed=getattr(args, "seed", None),
        output=args.output,
        format=args.format,
    )


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def _emit_table(header, rows, comment, config, fmt) -> str:
    if fmt == "json":
        payload = {
            "version": FORMAT_VERSION,
            "config": asdict(config),
            "rows": [{k: _clean(v) for k, v in zip(header, row)} for row in rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    out = io.StringIO()
    out.write(f"# {comment}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return out.getvalue()


def _single_n(args) -> int:
    if len(args.n) != 1:
        raise CliUsageError(f"argument --n: {args.subcommand} takes a single n, got {len(args.n)} values")
    return args.n[0]


def _cmd_convpow(args, config, grid):
    _, k = args.kernel
    f = conv_power_numeric(discretize(k, grid), _single_n(args), method=args.method)
    if args.format == "json":
        return json.dumps({
            "version": FORMAT_VERSION,
            "config": asdict(config),
            "log_scale": _clean(f.log_scale),
            "t": [float(t) for t in f.nodes],
            "mantissa": [float(v) for v in f.values],
        }, indent=2, sort_keys=True) + "\n"
    return f.to_csv()


def _cmd_norm(args, config, grid):
    _, k = args.kernel
    est = kernel_op_norm(k, _single_n(args), args.p, grid, method=args.method, tol=args.tol)
    if args.format == "json":
        payload = {"version": FORMAT_VERSION, "config": asdict(config), "estimate": est.to_dict()}
        payload["estimate"] = {key: _clean(v) for key, v in payload["estimate"].items()}
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    header = ("n", "p", "log_lower", "log_upper", "method", "iterations")
    row = (args.n[0], str(args.p), est.log_lower, est.log_upper, est.method, est.iterations)
    return _emit_table(header, [row], "log_* columns are natural logs of operator norms", config, "csv")


def _cmd_table(args, config, grid):
    _, k = args.kernel
    rows = []
    for n in args.n:
        est = kernel_op_norm(k, n, args.p, grid, method=args.method, tol=args.tol)
        asym = asymptotic_norm(k, n, args.p).log_value
        rows.append((n, est.log_lower, est.log_upper, asym, math.exp(est.log_mid - asym), est.method))
    header = ("n", "log_op_lower", "log_op_upper", "log_asym", "ratio", "method")
    return _emit_table(header, rows, "log_* columns are natural logs; ratio = exp(log_op_mid - log_asym) is linear",
                       config, args.format)


def _cmd_extremal(args, config, grid):
    _, k = args.kernel
    h = tangent_kernel(k)
    kg = discretize(k, grid)
    rows = []
    for n in args.n:
        u = extremal_function(args.p, h.r, h.mu, n, args.g, grid)
        kn = conv_power_numeric(kg, n)
        rq = lp_norm(volterra_apply(kn, u), args.p) - lp_norm(u, args.p)
        est = kernel_op_norm(k, n, args.p, grid, tol=args.tol)
        rows.append((n, rq, est.log_lower, est.log_upper, math.exp(rq - est.log_lower)))
    header = ("n", "log_rayleigh", "log_op_lower", "log_op_upper", "efficiency")
    return _emit_table(header, rows, "log_* columns are natural logs; efficiency = exp(log_rayleigh - log_op_lower) is linear",
                       config, args.format)


def _cmd_equiv(args, config, grid):
    _, ka = args.kernel
    kb = args.kernel2[1] if args.kernel2 else tangent_kernel(ka)
    trace = equivalence_trace(ka, kb, args.n, args.p, grid, args.tol)
    if args.format == "json":
        rows = [tuple(vars(r).values()) for r in trace.rows]
        return _emit_table(("n", "log_norm_a", "log_norm_b", "log_diff", "ratio"), rows, "", config, "json")
    return trace.to_csv()


def _cmd_decay(args, config, grid):
    _, k = args.kernel
    rows = []
    for n in args.n:
        rows.append((n, args.j, args.delta, args.degree, decay_ratio(k, n, args.j, args.delta, args.degree, args.p, grid)))
    header = ("n", "j", "delta", "degree", "ratio")
    return _emit_table(header, rows, "ratio is linear", config, args.format)


def _cmd_largedev(args, config, grid):
    try:
        d = parse_density(args.density, args.mass)
    except VolterraError as exc:
        raise CliUsageError(f"argument --density: {exc}") from exc
    if args.trials < 1000:
        raise CliUsageError(f"argument --trials: need at least 1000, got {args.trials}")
    report = largedev_report(d, args.n, grid, args.trials, args.seed)
    if args.format == "json":
        return report.to_json({"config": asdict(config)})
    return report.to_csv()


_COMMANDS = {
    "convpow": _cmd_convpow,
    "norm": _cmd_norm,
    "table": _cmd_table,
    "extremal": _cmd_extremal,
    "equiv": _cmd_equiv,
    "decay": _cmd_decay,
    "largedev": _cmd_largedev,
}


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    """Run one subcommand; returns the exit status instead of exiting."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        config = _config(args)
        text = _COMMANDS[args.subcommand](args, config, GridSpec(args.m))
    except CliUsageError as exc:
        print(exc, file=stderr)
        return 1
    except NormNotConverged as exc:
        print(f"numerical error: {exc}", file=stderr)
        print(json.dumps({k: _clean(v) for k, v in exc.estimate.to_dict().items()}, sort_keys=True), file=stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=stderr)
        return 2
    except UnsupportedError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    except VolterraError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main(argv=None) -> None:
    sys.exit(run_cli(argv))


if __name__ == "__main__":
    main()
