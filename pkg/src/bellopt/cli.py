"""Command-line interface: ``bellopt <command> ...``.

Exit codes: 0 on success (including a "no violation" answer), 1 on domain or
tolerance failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, analytic, fock
from . import inequalities as ineqs
from . import optimize as opt
from .errors import DomainError, NoViolationError, TruncationError

SEED_ENV = "BELLOPT_SEED"
ORACLE_TOLERANCE = 1e-9
# Grid endpoints are included when within this distance.
GRID_EPS = 1e-12


@dataclass
class RunReport:
    command: str
    inputs: dict
    outputs: dict
    seed: int
    version: str = __version__

    def __post_init__(self):
        self.inputs = _jsonable(self.inputs)
        self.outputs = _jsonable(self.outputs)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def to_csv(self) -> str:
        """Flattened ``key,value`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for key, val in _flatten(asdict(self)):
            w.writerow([key, val])
        return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, _fmt(obj)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


# -- argument types --------------------------------------------------------

def _setting(text: str) -> complex:
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"setting {text!r} is not of the form re,im") from None
    if len(parts) == 1:
        parts.append(0.0)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"setting {text!r} is not of the form re,im")
    return complex(*parts)


def _mixing(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mixing parameter --p {text!r}") from None
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"mixing parameter --p must lie in [0, 1], got {text}")
    return p


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text!r}")
    return v


def parse_grid(text: str) -> list:
    """Parse ``start:stop:step`` into an ascending, endpoint-inclusive list."""
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid {text!r} is not of the form start:stop:step") from None
    if not (0.0 <= start <= stop <= 1.0):
        raise argparse.ArgumentTypeError(f"grid {text!r} needs 0 <= start <= stop <= 1")
    if not (math.isfinite(step) and step > 0):
        raise argparse.ArgumentTypeError(f"grid step must be positive, got {step!r}")
    count = int(math.floor((stop - start) / step + GRID_EPS)) + 1
    return [min(round(start + k * step, 12), 1.0) for k in range(count)]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reads ``-1,0`` as a value, not an option."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = re.compile(r"^-\.?\d")


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return opt.DEFAULT_SEED
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise SystemExit(f"bellopt: invalid {SEED_ENV}: {exc}")


def build_parser() -> argparse.ArgumentParser:
    seed_default = _default_seed()

    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--output", metavar="FILE", help="write to FILE instead of standard output")
    common.add_argument("--seed", type=_seed, default=seed_default,
                        help=f"random seed (default {opt.DEFAULT_SEED}, or ${SEED_ENV})")

    optim = _Parser(add_help=False)
    d = opt.OptimizerConfig()
    optim.add_argument("--starts", type=_positive_int, default=d.starts)
    optim.add_argument("--radius", type=_positive_float, default=d.radius)
    optim.add_argument("--start-radius", type=_positive_float, default=d.start_radius)
    optim.add_argument("--tol-value", type=_positive_float, default=d.tol_value)
    optim.add_argument("--tol-p", type=_positive_float, default=d.tol_p)
    optim.add_argument("--max-iters", type=_positive_int, default=d.max_iters)

    parser = _Parser(prog="bellopt", description="Bell-inequality violation with unbalanced homodyne detection.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate an inequality at given settings")
    p.add_argument("--inequality", required=True, choices=ineqs.BUILTIN_NAMES)
    p.add_argument("--p", type=_mixing, required=True)
    p.add_argument("--settings", type=_setting, nargs="+", required=True, metavar="RE,IM")

    p = sub.add_parser("sweep", parents=[common, optim], help="optimise over a grid of p")
    p.add_argument("--inequality", required=True, choices=ineqs.BUILTIN_NAMES)
    p.add_argument("--grid", type=parse_grid, default=parse_grid("0:1:0.1"), metavar="START:STOP:STEP")

    p = sub.add_parser("threshold", parents=[common, optim], help="bisect for the violation threshold p*")
    p.add_argument("--inequality", required=True, choices=ineqs.BUILTIN_NAMES)

    p = sub.add_parser("verify-lhv", parents=[common], help="check classical bounds at all LHV vertices")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--inequality", choices=ineqs.BUILTIN_NAMES)
    g.add_argument("--all", action="store_true")

    p = sub.add_parser("oracle-check", parents=[common], help="compare closed forms with the Fock-space oracle")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pair", nargs=2, type=_setting, action="append", metavar="RE,IM")
    g.add_argument("--random", type=_positive_int, metavar="N")
    p.add_argument("--p", type=_mixing, default=None,
                   help="mixing parameter (default 1 for --pair; drawn uniformly for --random)")
    p.add_argument("--truncation", type=_positive_int, default=fock.DEFAULT_TRUNCATION)
    return parser


def _config(args) -> opt.OptimizerConfig:
    return opt.OptimizerConfig(
        starts=args.starts, radius=args.radius, start_radius=min(args.start_radius, args.radius),
        tol_value=args.tol_value, tol_p=args.tol_p, max_iters=args.max_iters, seed=args.seed,
    )


def _defaults(args) -> dict:
    out = {
        "seed": args.seed,
        "starts": getattr(args, "starts", opt.OptimizerConfig.starts),
        "radius": getattr(args, "radius", opt.OptimizerConfig.radius),
        "truncation": getattr(args, "truncation", None) or fock.DEFAULT_TRUNCATION,
    }
    return out


def _result_dict(res: opt.OptimizationResult) -> dict:
    return {
        "p": res.p,
        "value": res.value,
        "excess": res.excess,
        "violated": res.excess > 0,
        "facet": res.facet,
        "settings": list(res.settings),
        "starts_converged": res.starts_converged,
    }


# -- commands --------------------------------------------------------------

def cmd_evaluate(args, parser):
    ineq = ineqs.get(args.inequality)
    if len(args.settings) != ineq.n:
        parser.error(f"--settings: {ineq.name} takes {ineq.n} settings, got {len(args.settings)}")
    value = ineqs.evaluate(ineq, args.p, args.settings)
    dist = ineqs.bound_distances(ineq, value)
    outputs = {
        "value": value,
        "lower_bound": float(ineq.lower_bound) if ineq.lower_bound is not None else None,
        "upper_bound": float(ineq.upper_bound) if ineq.upper_bound is not None else None,
        "distance_lower": dist.get("lower"),
        "distance_upper": dist.get("upper"),
        "excess": max(dist.values()),
        "violated": max(dist.values()) > 0,
    }
    inputs = {"inequality": ineq.name, "p": args.p, "settings": args.settings, "defaults": _defaults(args)}
    return RunReport("evaluate", inputs, outputs, args.seed), 0


def sweep_csv(ineq, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["p", "value", "excess", "violated"]
    for k in range(ineq.n):
        header += [f"s{k}_re", f"s{k}_im"]
    w.writerow(header)
    for p, res in rows:
        row = [repr(p), repr(res.value), repr(res.excess), int(res.excess > 0)]
        for s in res.settings:
            row += [repr(s.real), repr(s.imag)]
        w.writerow(row)
    return buf.getvalue()


def cmd_sweep(args, parser):
    ineq = ineqs.get(args.inequality)
    cfg = _config(args)
    rows = opt.sweep(ineq, args.grid, cfg)
    if (args.format or "csv") == "csv":
        return sweep_csv(ineq, rows), 0
    inputs = {"inequality": ineq.name, "grid": args.grid, "config": asdict(cfg), "defaults": _defaults(args)}
    outputs = {"rows": [_result_dict(r) for _, r in rows]}
    return RunReport("sweep", inputs, outputs, args.seed), 0


def cmd_threshold(args, parser):
    ineq = ineqs.get(args.inequality)
    cfg = _config(args)
    inputs = {"inequality": ineq.name, "config": asdict(cfg), "defaults": _defaults(args)}
    try:
        res = opt.find_threshold(ineq, cfg)
    except NoViolationError as exc:
        outputs = {"status": "no violation", "message": str(exc), "p_star": None, "bracket": None, "evidence": None}
        return RunReport("threshold", inputs, outputs, args.seed), 0
    outputs = {
        "status": "found",
        "p_star": res.p_star,
        "bracket": list(res.bracket),
        "evidence": _result_dict(res.evidence),
        "probes": [list(pr) for pr in res.probes],
    }
    return RunReport("threshold", inputs, outputs, args.seed), 0


def _verdict_dict(ineq, v) -> dict:
    return {
        "name": v.name,
        "holds": v.holds,
        "violated_at": list(v.violated_at) if v.violated_at else None,
        "bounds": {k: str(b) for k, b in ineq.bounds.items()},
        "attaining": {k: [list(t) for t in ts] for k, ts in v.attaining.items()},
        "tight": v.tight,
        "min_value": str(v.min_value),
        "max_value": str(v.max_value),
    }


def cmd_verify_lhv(args, parser):
    names = ineqs.BUILTIN_NAMES if args.all else (args.inequality,)
    results = []
    for name in names:
        ineq = ineqs.get(name)
        results.append(_verdict_dict(ineq, ineqs.verify_lhv_bounds(ineq)))
    ok = all(r["holds"] for r in results)
    inputs = {"inequalities": list(names), "defaults": _defaults(args)}
    outputs = {"all_hold": ok, "results": results}
    return RunReport("verify-lhv", inputs, outputs, args.seed), (0 if ok else 1)


def _random_tuples(count: int, seed: int, p_fixed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        p = float(rng.uniform(0.0, 1.0))
        amps = []
        for _ in range(2):
            r = 2.0 * math.sqrt(rng.uniform())
            theta = 2.0 * math.pi * rng.uniform()
            amps.append(complex(r * math.cos(theta), r * math.sin(theta)))
        out.append((p if p_fixed is None else p_fixed, amps[0], amps[1]))
    return out


def cmd_oracle_check(args, parser):
    N = args.truncation
    if args.random:
        tuples = _random_tuples(args.random, args.seed, args.p)
    else:
        p = 1.0 if args.p is None else args.p
        tuples = [(p, a, b) for a, b in args.pair]
    rows = []
    worst_joint = worst_single = 0.0
    for p, a, b in tuples:
        joint = analytic.joint_probability(p, a, b)
        joint_o = fock.joint_vacuum_probability_oracle(p, a, b, N)
        single = analytic.single_probability(a)
        single_o = fock.single_vacuum_probability_oracle(p, a, N)
        worst_joint = max(worst_joint, abs(joint - joint_o))
        worst_single = max(worst_single, abs(single - single_o))
        if not args.random:
            rows.append({"p": p, "a": a, "b": b, "joint": joint, "joint_oracle": joint_o,
                         "single": single, "single_oracle": single_o})
    passed = max(worst_joint, worst_single) <= ORACLE_TOLERANCE
    inputs = {"p": args.p, "random": args.random, "pairs": args.pair, "truncation": N, "defaults": _defaults(args)}
    outputs = {
        "count": len(tuples),
        "max_joint_discrepancy": worst_joint,
        "max_single_discrepancy": worst_single,
        "tolerance": ORACLE_TOLERANCE,
        "passed": passed,
        "checks": rows,
    }
    return RunReport("oracle-check", inputs, outputs, args.seed), (0 if passed else 1)


COMMANDS = {
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "threshold": cmd_threshold,
    "verify-lhv": cmd_verify_lhv,
    "oracle-check": cmd_oracle_check,
}


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result, code = COMMANDS[args.command](args, parser)
    except TruncationError as exc:
        print(f"bellopt {args.command}: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"bellopt {args.command}: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, str):
        text = result
    elif (args.format or "json") == "json":
        text = result.to_json()
    else:
        text = result.to_csv()
    _emit(text, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
