"""Command-line interface: fuzz, sweep, report, oracle, targets."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import adapter, engine, oracles, report
from .kernels import BACKEND
from .nic import NicConfig
from .simtarget import BUILTIN_TARGETS, TargetSpecError, load_target_spec

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _non_negative(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v >= 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a finite value >= 0, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fraction(text: str) -> float:
    v = _non_negative(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return v


def _value_list(text: str) -> list[float]:
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty value list")
    return [_non_negative(t.strip()) for t in items]


def _add_campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target", default="shallow-magic",
                   help=f"built-in name ({', '.join(BUILTIN_TARGETS)}) or JSON path")
    p.add_argument("--adapter", metavar="ADDR",
                   help="external harness: cmd:<command>, tcp:<host>:<port> or unix:<path>")
    p.add_argument("--rounds", type=_positive_int, default=1440)
    p.add_argument("--round-budget", type=_positive_int, default=1000,
                   help="executions per round")
    p.add_argument("--round-seconds", type=float, help="wall-clock rounds (non-deterministic)")
    p.add_argument("--lambda", dest="lam", type=_non_negative, default=engine.DEFAULT_LAMBDA)
    p.add_argument("--gamma", type=_non_negative, default=0.01)
    p.add_argument("--nic", choices=("on", "off"), default="on")
    p.add_argument("--nic-budget", type=_fraction, default=0.06,
                   help="NIC executions as a fraction of main-loop executions")
    p.add_argument("--max-execs", type=_positive_int)
    p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobsched",
        description="Multi-objective fuzzing scheduler on synthetic or external targets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    fz = sub.add_parser("fuzz", help="run one campaign and write its report directory")
    _add_campaign_flags(fz)
    fz.add_argument("--out", required=True)
    fz.add_argument("--snapshot", help="write a resumable snapshot here when done")
    fz.add_argument("--resume", help="continue from a snapshot up to --rounds total rounds; other campaign flags are ignored")

    sw = sub.add_parser("sweep", help="one campaign per value per RNG seed")
    _add_campaign_flags(sw)
    sw.add_argument("--param", choices=("lambda", "gamma"), default="lambda")
    sw.add_argument("--values", type=_value_list, required=True)
    sw.add_argument("--seeds", type=_positive_int, default=5,
                    help="number of RNG seeds, starting at --seed")
    sw.add_argument("--out", required=True)

    rp = sub.add_parser("report", help="render charts and a text summary")
    rp.add_argument("--in", dest="src", required=True, help="campaign report directory")
    rp.add_argument("--out", help="chart directory (default: the report directory)")

    orc = sub.add_parser("oracle", help="cross-check formulas against independent oracles")
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--rounds", type=_positive_int, default=1000)
    orc.add_argument("--perturb", choices=("ucb",), help="negative control")

    tg = sub.add_parser("targets", help="list built-in targets")
    tg.add_argument("--show", metavar="NAME", help="print a target's JSON")
    return parser


def _config(args, seed: int, **override) -> engine.CampaignConfig:
    nic = NicConfig(enabled=args.nic == "on", budget_fraction=args.nic_budget)
    kw = dict(lam=args.lam, gamma=args.gamma, round_budget=args.round_budget,
              total_rounds=args.rounds, seed=seed, nic=nic, round_seconds=args.round_seconds,
              max_execs=args.max_execs)
    kw.update(override)
    return engine.CampaignConfig(**kw)


def _load_spec(args):
    try:
        return load_target_spec(args.target)
    except (FileNotFoundError, TargetSpecError) as exc:
        raise UsageError(f"bad target {args.target!r}: {exc}") from None


def _run_one(args, cfg, out: Path) -> engine.Campaign:
    spec = _load_spec(args)
    if args.adapter:
        try:
            conn = adapter.connect(args.adapter)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot connect to adapter: {exc}") from None
        executor = adapter.AdapterTarget(conn, spec.cmp_total)
        try:
            return engine.run_campaign(cfg, spec, seeds=spec.initial_seeds, out=out,
                                       executor=executor)
        finally:
            executor.close()
    return engine.run_campaign(cfg, spec, out=out)


def cmd_fuzz(args) -> int:
    out = Path(args.out)
    if args.resume:
        try:
            campaign = engine.Campaign.resume(args.resume)
        except engine.SnapshotError as exc:
            raise UsageError(str(exc)) from None
        campaign.cfg.total_rounds = args.rounds
        campaign.run()
        campaign.write_report(out)
    else:
        campaign = _run_one(args, _config(args, args.seed), out)
    if args.snapshot:
        campaign.snapshot(args.snapshot)
    s = campaign.summary()
    print(f"{s['rounds']} rounds, {s['cumulative_execs']} execs, pool {s['pool_size']}, "
          f"edges {s['edges']}, NIC share {s['nic_share']:.4f} -> {out}")
    return EXIT_OK


SWEEP_FIELDS = ["param", "value", "seed", "speed", "stack", "cmp", "speed_combo_share",
                "good_seed_fraction", "nic_share", "edges"]


def cmd_sweep(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    key = "lam" if args.param == "lambda" else "gamma"
    rows = []
    for value in args.values:
        for seed in range(args.seed, args.seed + args.seeds):
            cfg = _config(args, seed, **{key: value})
            run_dir = out / f"{args.param}={value!r}" / f"seed={seed}"
            c = _run_one(args, cfg, run_dir)
            s = c.summary()
            picks = c.telemetry["selections"]
            speedy = sum(1 for p in picks if p[1] & 1) / len(picks) if picks else 0.0
            m = s["objective_means"]
            rows.append([args.param, value, seed, m.get("speed", 0.0), m.get("stack", 0.0),
                         m.get("cmp", 0.0), speedy, s["good_seed_fraction"], s["nic_share"],
                         s["edges"]])
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_FIELDS)
        for r in rows:
            w.writerow(r)
        for value in args.values:
            group = [r for r in rows if r[1] == value]
            agg = [sum(r[k] for r in group) / len(group) for k in range(3, len(SWEEP_FIELDS))]
            w.writerow([args.param, value, "mean", *agg])
    print(f"{len(rows)} campaigns -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = report.render_report(args.src, args.out)
    except report.ReportError as exc:
        raise UsageError(str(exc)) from None
    print(report.text_summary(data), end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    results = oracles.run_all(seed=args.seed, perturb=args.perturb, rounds=args.rounds)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.ok]
    if failed:
        print(f"failing oracles: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_targets(args) -> int:
    if args.show:
        try:
            spec = load_target_spec(args.show)
        except (FileNotFoundError, TargetSpecError) as exc:
            raise UsageError(str(exc)) from None
        print(json.dumps(spec.to_dict(), indent=2))
        return EXIT_OK
    for name in BUILTIN_TARGETS:
        spec = load_target_spec(name)
        print(f"{name:26s} sites={len(spec.sites):2d} cmp_total={spec.cmp_total:3d} "
              f"seeds={len(spec.initial_seeds)}")
    return EXIT_OK


COMMANDS = {"fuzz": cmd_fuzz, "sweep": cmd_sweep, "report": cmd_report,
            "oracle": cmd_oracle, "targets": cmd_targets}


def main(argv=None) -> int:
    level = os.environ.get("MOBSCHED_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mobsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except engine.CampaignAborted as exc:
        where = f" (snapshot: {exc.snapshot})" if exc.snapshot else ""
        print(f"mobsched: campaign aborted: {exc}{where}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"mobsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
