"""Command-line front end.

Every subcommand prints one JSON document to stdout; trace tables go to CSV
files on request.  Exit codes: 0 on success, 2 when an experiment refuses to
run because its base precondition fails, 1 on any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import List, Optional

from .diagnostics import (
    DiagnosticReport,
    fiber_half_set,
    k_property_check,
    relative_mixing_statistic,
    rwm_verdict,
    vlb_statistic,
    vlb_zero_entropy,
    vwb_statistic,
)
from .entropy import conditional_block_entropy, entropy_rate_estimate
from .errors import ErgolabError, PreconditionError, ValidationError
from .experiments import (
    default_config,
    emit_report,
    load_config,
    run_experiment,
)
from .metrics import (
    EXACT_LIMIT_DEFAULT,
    dbar_distributions,
    dbar_words,
    fbar_distributions,
    fbar_words,
)
from .core import read_distribution_csv, read_word_file
from .systems import SkewProduct, generator_partition, load_system, sample_trajectory


def _emit(doc: dict):
    print(json.dumps(doc, sort_keys=True, indent=2))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return " ".join(str(x) for x in v)
    return str(v)


def _write_trace_csv(path, columns: List[str], rows: List[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def _one_word(path):
    words = read_word_file(path)
    if len(words) != 1:
        raise ValidationError(f"{path} holds {len(words)} words, expected exactly 1")
    return words[0]


def _cmd_metric(args, kind: str) -> int:
    word_fn = fbar_words if kind == "fbar" else dbar_words
    dist_fn = fbar_distributions if kind == "fbar" else dbar_distributions
    if args.words:
        u, v = (_one_word(p) for p in args.words)
        _emit({"kind": kind, "value": word_fn(u, v), "method": "exact",
               "support": [1, 1], "flags": []})
        return 0
    p, q = (read_distribution_csv(path) for path in args.dist)
    res = dist_fn(p, q, exact_limit=args.exact_limit)
    _emit({"kind": kind, "value": res.value, "lower": res.lower,
           "upper": res.upper, "method": res.method,
           "support": list(res.support_shape), "flags": list(res.flags)})
    return 0


def _sampled(args):
    system = load_system(args.system)
    part = generator_partition(system, args.depth)
    return system, sample_trajectory(system, part, args.steps, seed=args.seed)


def _cmd_entropy(args) -> int:
    _, traj = _sampled(args)
    if args.k > 0:
        est = conditional_block_entropy(traj, args.N, args.k)
    else:
        est = entropy_rate_estimate(traj, args.N)
    scale = 1.0 / math.log(2) if args.bits else 1.0
    _emit({"value": est.value * scale,
           "units": "bits" if args.bits else "nats",
           "n_block": args.N, "k_past": args.k,
           "stderr": est.stderr_proxy * scale,
           "flags": list(est.flags)})
    return 0


def _as_skew(args) -> SkewProduct:
    system = load_system(args.system)
    if not isinstance(system, SkewProduct):
        raise ValidationError("this diagnostic needs a skew-product system")
    return system


def _cmd_rwm(args) -> int:
    ext = _as_skew(args)
    report = rwm_verdict(ext, L_schedule=args.L, M=args.M, tol=args.tol,
                         sample_length=args.steps, seed=args.seed,
                         n_anchors=args.anchors)
    _emit(report.to_dict())
    if args.csv:
        _write_trace_csv(args.csv, ["pair", "L", "ea"], report.trace)
    return 0


def _cmd_conditional(args, kind: str) -> int:
    _, traj = _sampled(args)
    if kind == "vlb" and args.zero_entropy:
        rep = vlb_zero_entropy(traj, args.N, args.eps)
        report = DiagnosticReport(
            statistic="vlb_zero_entropy",
            params={"n_block": args.N, "eps": args.eps},
            values={"good_mass": rep.good_mass, "clique_size": rep.clique_size,
                    "support": rep.support},
            verdict=rep.verdict, seed=args.seed, flags=list(rep.flags),
            trace=rep.trace)
        columns = ["word", "weight", "accepted"]
    else:
        stat_fn = vwb_statistic if kind == "vwb" else vlb_statistic
        rep = stat_fn(traj, args.N, args.k, args.eps,
                      exact_limit=args.exact_limit)
        report = DiagnosticReport(
            statistic=kind,
            params={"n_block": args.N, "k_past": args.k, "eps": args.eps},
            values={"good_mass": rep.good_mass,
                    "worst_distance": rep.worst_distance,
                    "unresolved_mass": rep.unresolved_mass,
                    "n_pasts": rep.n_pasts, "n_resolved": rep.n_resolved},
            verdict=rep.verdict, seed=args.seed, flags=list(rep.flags),
            trace=rep.trace)
        columns = ["past", "count", "distance", "good", "resolved"]
    _emit(report.to_dict())
    if args.csv:
        _write_trace_csv(args.csv, columns, report.trace)
    return 0


def _cmd_kcheck(args) -> int:
    _, traj = _sampled(args)
    rep = k_property_check(traj, args.N, args.k0, args.k1,
                           eps=args.eps, delta=args.delta)
    values = {"h_hat": rep.h_hat, "growth_lhs": rep.growth_lhs,
              "growth_rhs": rep.growth_rhs, "remote_lhs": rep.remote_lhs,
              "remote_rhs": rep.remote_rhs, "cond_growth": rep.cond_growth,
              "cond_remote": rep.cond_remote}
    report = DiagnosticReport(
        statistic="kcheck",
        params={"n_block": args.N, "k0": args.k0, "k1": args.k1,
                "eps": args.eps, "delta": args.delta},
        values=values, verdict=rep.verdict, seed=args.seed,
        flags=list(rep.flags))
    _emit(report.to_dict())
    if args.csv:
        rows = [{"key": k, "value": v} for k, v in sorted(values.items())]
        _write_trace_csv(args.csv, ["key", "value"], rows)
    return 0


def _cmd_relmix(args) -> int:
    ext = _as_skew(args)
    f = fiber_half_set(ext.base.n_states, ext.m, 0)
    rep = relative_mixing_statistic(ext, f, f, args.n,
                                    sample_length=args.steps, seed=args.seed)
    verdict = rep.value < args.tol if args.tol is not None else None
    values = {"value": rep.value, "centered_value": rep.centered_value,
              "agreement_gap": rep.agreement_gap}
    report = DiagnosticReport(
        statistic="relmix", params={"n": args.n, "tol": args.tol},
        values=values, verdict=verdict, seed=args.seed, flags=list(rep.flags))
    _emit(report.to_dict())
    if args.csv:
        rows = [{"key": k, "value": v} for k, v in sorted(values.items())]
        _write_trace_csv(args.csv, ["key", "value"], rows)
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        if not args.kind:
            raise ValidationError("need --config or --kind")
        cfg = default_config(args.kind, args.klass)
        env = os.environ.get("ERGOLAB_SEED")
        if env is not None:
            cfg.seed = int(env)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    result = run_experiment(cfg)
    files = emit_report(result, args.out)
    _emit({"rates": result.rates, "files": files, "version": result.version})
    return 0


def _add_sample_args(p, steps_default: int = 100_000):
    p.add_argument("--system", required=True, help="system spec TOML")
    p.add_argument("--steps", type=int, default=steps_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth", type=int, default=1,
                   help="fiber partition depth for composite systems")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergolab",
        description="finite diagnostics for sampled measure-preserving systems")
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("fbar", "dbar"):
        p = sub.add_parser(kind, help=f"{kind} distance between words or laws")
        grp = p.add_mutually_exclusive_group(required=True)
        grp.add_argument("--words", nargs=2, metavar=("U", "V"))
        grp.add_argument("--dist", nargs=2, metavar=("P", "Q"))
        p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT_DEFAULT)
        p.set_defaults(func=lambda a, k=kind: _cmd_metric(a, k))

    p = sub.add_parser("entropy", help="block or conditional entropy estimate")
    _add_sample_args(p, steps_default=1_000_000)
    p.add_argument("--partition", choices=["gen"], default="gen")
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--bits", action="store_true")
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("rwm", help="relative weak mixing verdict")
    p.add_argument("--system", required=True)
    p.add_argument("--L", type=int, nargs="+", default=[64, 256, 1024])
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--anchors", type=int, default=192)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_rwm)

    for kind in ("vwb", "vlb"):
        p = sub.add_parser(kind, help=f"{kind} conditional block-law check")
        _add_sample_args(p, steps_default=1_000_000)
        p.add_argument("--N", type=int, default=6)
        p.add_argument("--k", type=int, default=6)
        p.add_argument("--eps", type=float, default=0.1)
        p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT_DEFAULT)
        p.add_argument("--csv")
        if kind == "vlb":
            p.add_argument("--zero-entropy", action="store_true")
        p.set_defaults(func=lambda a, k=kind: _cmd_conditional(a, k))

    p = sub.add_parser("kcheck", help="finite K-property entropy check")
    _add_sample_args(p, steps_default=1_000_000)
    p.add_argument("--N", type=int, default=4)
    p.add_argument("--k0", type=int, default=2)
    p.add_argument("--k1", type=int, default=8)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_kcheck)

    p = sub.add_parser("relmix", help="relative mixing statistic at one shift")
    p.add_argument("--system", required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_relmix)

    p = sub.add_parser("experiment", help="seeded batch experiment")
    p.add_argument("--config", help="experiment config TOML")
    p.add_argument("--kind", choices=["entropy", "rwm", "preservation"])
    p.add_argument("--class", dest="klass",
                   choices=["vwb", "vlb", "kcheck", "relmix"])
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(f"ergolab: {exc}", file=sys.stderr)
        return 2
    except (ErgolabError, OSError, ValueError) as exc:
        print(f"ergolab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
