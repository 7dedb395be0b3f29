"""Command-line entry point: ``sistables {estimate,count,theory,fig1,fig2,fig3}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible instance,
4 budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import exact_count as ec
from . import experiments as ex
from . import theory
from .errors import ConfigError, SisError

ORIENT = {"col": "column_wise", "row": "row_wise"}
ORDER = {"given": "as_given", "desc": "descending_sum", "asc": "ascending_sum"}


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for item in text.replace(" ", "").split(","):
        b, _, g = item.partition(":")
        try:
            out.append((float(b), float(g)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected beta:gamma pairs, got {item!r}") from None
    return out


def _instance_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("instance")
    g.add_argument("--rows", type=_ints, help="row sums, e.g. 1,1,2")
    g.add_argument("--cols", type=_ints, help="column sums")
    g.add_argument("--family", choices=ex.FAMILIES)
    g.add_argument("--m", type=int)
    g.add_argument("--d", type=int, help="heavy row sum (one-heavy)")
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--d-r", dest="d_r", type=int, help="override floor(beta*m)")
    g.add_argument("--d-c", dest="d_c", type=int, help="override floor(gamma*m)")
    g.add_argument("--n", type=int)
    g.add_argument("--r", type=int)
    g.add_argument("--config", type=Path, help="JSON run config (version 1)")


def _run_args(p: argparse.ArgumentParser, formats: str):
    g = p.add_argument_group("sampler and estimator")
    g.add_argument("--variant", choices=("restart", "feasible"))
    g.add_argument("--orient", choices=tuple(ORIENT))
    g.add_argument("--order", choices=tuple(ORDER))
    g.add_argument("--seed", type=int)
    mode = g.add_mutually_exclusive_group()
    mode.add_argument("--trials", type=int, help="fixed number of trials per run")
    mode.add_argument("--stop-heuristic", action="store_true",
                      help="run until the stop rule fires (default)")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--max-trials", dest="max_trials", type=int)
    g.add_argument("--runs", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out")
    g.add_argument("--format", dest="formats", default=None,
                   help=f"comma list of csv,svg,json (default {formats})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sistables",
                                description="Sequential importance sampling for 0/1 tables.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate", help="estimate the number of tables")
    _instance_args(s)
    _run_args(s, "csv,json")

    s = sub.add_parser("count", help="exact number of tables")
    _instance_args(s)
    s.add_argument("--method", choices=("auto", "brute", "dp", "closed_form"), default="auto")

    s = sub.add_parser("theory", help="separation constants for the heavy families")
    s.add_argument("--family", choices=("one-heavy", "two-heavy"), required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--m", type=int)
    s.add_argument("--d-r", dest="d_r", type=int)
    s.add_argument("--d-c", dest="d_c", type=int)
    s.add_argument("--format", dest="formats", default="text", help="text and/or json")

    s = sub.add_parser("fig1", help="estimate vs trials (regular or two-heavy)")
    _instance_args(s)
    _run_args(s, "csv,svg")

    s = sub.add_parser("fig2", help="trials to stop on regular instances")
    _run_args(s, "csv,svg")
    s.add_argument("--ns", type=_ints, default=[10, 20, 30, 40, 50])
    s.add_argument("--families", default=",".join(ex.FIG2_FAMILIES),
                   help="comma list from 5,10,5log,half or integer degrees")

    s = sub.add_parser("fig3", help="trials to stop on two-heavy instances")
    _run_args(s, "csv,svg")
    s.add_argument("--sizes", type=_ints, default=list(range(20, 141, 20)))
    s.add_argument("--pairs", type=_pairs, default=list(ex.FIG3_PAIRS),
                   help="comma list of beta:gamma")
    return p


def config_from_args(args: argparse.Namespace, default_formats: str) -> ex.RunConfig:
    """JSON config (if any) overlaid with explicitly given flags."""
    if getattr(args, "config", None):
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    else:
        data = {"version": ex.CONFIG_VERSION}
    data.setdefault("formats", default_formats.split(","))
    inst = data.setdefault("instance", {})
    for key in ("rows", "cols", "family", "m", "d", "beta", "gamma", "d_r", "d_c", "n", "r"):
        v = getattr(args, key, None)
        if v is not None:
            inst[key] = v
    if getattr(args, "rows", None) is not None and getattr(args, "family", None) is None:
        inst["family"] = "explicit"
    smp = data.setdefault("sampler", {})
    if getattr(args, "variant", None):
        smp["variant"] = args.variant
    if getattr(args, "orient", None):
        smp["orientation"] = ORIENT[args.orient]
    if getattr(args, "order", None):
        smp["ordering"] = ORDER[args.order]
    est = data.setdefault("estimator", {})
    for key in ("epsilon", "k", "max_trials"):
        v = getattr(args, key, None)
        if v is not None:
            est[key] = v
    for key in ("seed", "runs", "out", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if getattr(args, "trials", None) is not None:
        data["trials"] = args.trials
    if getattr(args, "stop_heuristic", False):
        data["trials"] = None
    if getattr(args, "formats", None):
        data["formats"] = [f.strip() for f in args.formats.split(",") if f.strip()]
    bad = set(data["formats"]) - {"csv", "svg", "json"}
    if bad:
        raise ConfigError(f"unknown formats {sorted(bad)}")
    cfg = ex.config_from_dict(data)
    if cfg.runs < 1 or cfg.workers < 1:
        raise ConfigError("--runs and --workers must be positive")
    return cfg


def _print_runs(runs: list[dict]):
    for r in runs:
        stop = r["stop_trial"] if r["stop_trial"] is not None else "-"
        setting = f"  {r['setting']}" if "setting" in r else ""
        print(f"run {r['run']}: trials={r['trials']} stop={stop} "
              f"log10_estimate={r['final_log10_estimate']:.6f} failures={r['failures']}{setting}")


def cmd_count(args) -> int:
    cfg = config_from_args(args, "csv")
    margins = cfg.instance.build()
    count, method = ex.exact_count(margins, args.method)
    print(f"instance: {cfg.instance.label()} ({margins.n_rows}x{margins.n_cols})")
    print(f"method: {method}")
    digits = str(count)
    if len(digits) <= 40:
        print(f"count: {digits}")
    print(f"count ~ {ec.format_count(count)}")
    return 0


def cmd_theory(args) -> int:
    if args.family == "one-heavy":
        rep = theory.one_heavy_report(args.beta, args.m)
    else:
        if args.gamma is None:
            raise ConfigError("two-heavy theory needs --gamma")
        rep = theory.two_heavy_report(args.beta, args.gamma, args.m, args.d_r, args.d_c)
    fmts = {f.strip() for f in args.formats.split(",")}
    if "text" in fmts or not fmts & {"json"}:
        print(rep.to_text())
    if "json" in fmts:
        print(rep.to_json())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "count":
            return cmd_count(args)
        if args.command == "theory":
            return cmd_theory(args)
        if args.command == "estimate":
            cfg = config_from_args(args, "csv,json")
            summary = ex.cmd_estimate(cfg)
            print(f"instance: {summary['instance']} mode={summary['mode']}")
            _print_runs(summary["runs"])
            return 0
        if args.command == "fig1":
            cfg = config_from_args(args, "csv,svg")
            res = ex.cmd_fig1(cfg, runs_per_setting=args.runs)
            print(f"exact log10 = {res['exact_log10']:.6f} ({res['exact_method']})")
            _print_runs(res["runs"])
            return 0
        if args.command == "fig2":
            cfg = config_from_args(args, "csv,svg")
            fams = [f.strip() for f in args.families.split(",") if f.strip()]
            print(ex.cmd_fig2(cfg, args.ns, fams, runs=args.runs or 20), end="")
            return 0
        if args.command == "fig3":
            cfg = config_from_args(args, "csv,svg")
            print(ex.cmd_fig3(cfg, args.sizes, args.pairs, runs=args.runs or 20), end="")
            return 0
    except SisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
