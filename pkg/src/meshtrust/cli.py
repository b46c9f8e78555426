"""Command-line front end: single runs, sweeps, and transmission traces."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .experiments import (
    ConfigError,
    DEFAULT_BLACKHOLE_COUNTS,
    DEFAULT_TRUST_INTERVALS,
    MetricsReport,
    ScenarioConfig,
    SweepRow,
    emit_csv,
    emit_per_run_csv,
    load_config,
    run_scenario,
    sweep_blackhole,
    sweep_trust_interval,
)


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value scenario file")
    p.add_argument("--seed", type=int, help="base RNG seed")
    p.add_argument("--teds", choices=("on", "off"), help="enable or disable the trust layer")
    p.add_argument("--blackholes", type=int, metavar="N", help="number of blackhole nodes")
    p.add_argument("--trust-interval", type=float, metavar="S", help="trust interval in seconds")
    p.add_argument("--p-loss", type=float, metavar="P", help="independent per-delivery loss probability")


def _resolve_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.teds is not None:
        overrides["teds_enabled"] = args.teds == "on"
    if args.blackholes is not None:
        overrides["blackhole_count"] = args.blackholes
    if getattr(args, "trust_interval", None) is not None:
        overrides["trust_interval_s"] = args.trust_interval
    if getattr(args, "p_loss", None) is not None:
        overrides["p_loss"] = args.p_loss
    if overrides:
        cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _print_report(report: MetricsReport, out=sys.stdout) -> None:
    w = out.write
    w(f"pdr: {'n/a' if report.pdr is None else f'{report.pdr:.6g}'}\n")
    w(f"data_generated: {report.data_generated}\n")
    w(f"data_delivered: {report.data_delivered}\n")
    w(f"control_total: {report.control_total}\n")
    w(f"control_routing: {report.control_routing}\n")
    w(f"control_trust: {report.control_trust}\n")
    overhead = report.normalized_overhead
    w(f"normalized_overhead: {'n/a' if overhead is None else f'{overhead:.6g}'}\n")
    w(f"blacklist_final: {sorted(report.blacklist_final)}\n")
    detections = {k: report.first_detection_time_s[k] for k in sorted(report.first_detection_time_s)}
    w(f"first_detection_time_s: {detections}\n")
    w(f"drops: {dict(sorted(report.drops.items()))}\n")
    w(f"in_flight: {report.in_flight}\n")
    for i, f in enumerate(report.per_flow):
        w(
            f"flow {i}: {f.source}->{f.destination} start={f.start_time:.3f}"
            f" generated={f.generated} delivered={f.delivered}\n"
        )


def _parse_number_list(text: str, kind):
    try:
        return tuple(kind(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshsim",
        description="Trust-augmented mesh routing simulator under blackhole attack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single scenario and report metrics")
    _add_scenario_flags(p_run)
    p_run.add_argument("--out", metavar="CSV", help="also write a one-row aggregate CSV")

    p_bh = sub.add_parser("sweep-blackhole", help="sweep adversary counts for both schemes")
    _add_scenario_flags(p_bh)
    p_bh.add_argument("--reps", type=int, default=10, help="replications per cell (default 10)")
    p_bh.add_argument("--counts", metavar="LIST", help="adversary counts, e.g. 0,4,8,12,16")
    p_bh.add_argument("--out", metavar="CSV", required=True)
    p_bh.add_argument("--emit-per-run", action="store_true", help="also write <out>.runs.csv")

    p_ti = sub.add_parser("sweep-interval", help="sweep the trust interval with the trust layer on")
    _add_scenario_flags(p_ti)
    p_ti.add_argument("--reps", type=int, default=20, help="replications per cell (default 20)")
    p_ti.add_argument("--intervals", metavar="LIST", help="intervals in seconds, e.g. 10,20,30")
    p_ti.add_argument("--out", metavar="CSV", required=True)
    p_ti.add_argument("--emit-per-run", action="store_true", help="also write <out>.runs.csv")

    p_tr = sub.add_parser("trace", help="run one scenario and dump every transmission")
    _add_scenario_flags(p_tr)
    p_tr.add_argument("--out", metavar="PATH", help="trace file (default: stdout)")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = _resolve_config(args)
            report = run_scenario(cfg)
            _print_report(report)
            if args.out:
                scheme = "teds" if cfg.teds_enabled else "aodv"
                row = SweepRow(
                    scheme,
                    cfg.blackhole_count,
                    cfg.trust_interval_s,
                    1,
                    report.pdr if report.pdr is not None else float("nan"),
                    float("nan"),
                    report.normalized_overhead
                    if report.normalized_overhead is not None
                    else float("nan"),
                    float("nan"),
                    float(report.control_routing),
                    float(report.control_trust),
                    cfg.seed,
                )
                emit_csv([row], args.out)
        elif args.command == "sweep-blackhole":
            cfg = _resolve_config(args)
            counts = (
                _parse_number_list(args.counts, int)
                if args.counts
                else DEFAULT_BLACKHOLE_COUNTS
            )
            rows, per_run = sweep_blackhole(cfg, counts=counts, replications=args.reps)
            emit_csv(rows, args.out)
            if args.emit_per_run:
                emit_per_run_csv(per_run, args.out + ".runs.csv")
        elif args.command == "sweep-interval":
            cfg = _resolve_config(args)
            if args.blackholes is None:
                count = max(1, round(0.1 * cfg.rows * cfg.cols))
                cfg = replace(cfg, blackhole_count=count)
                cfg.validate()
            intervals = (
                _parse_number_list(args.intervals, float)
                if args.intervals
                else DEFAULT_TRUST_INTERVALS
            )
            rows, per_run = sweep_trust_interval(cfg, intervals=intervals, replications=args.reps)
            emit_csv(rows, args.out)
            if args.emit_per_run:
                emit_per_run_csv(per_run, args.out + ".runs.csv")
        elif args.command == "trace":
            cfg = _resolve_config(args)
            report, ctx = run_scenario(cfg, trace=True, keep_context=True)
            text = "\n".join(ctx.sim.trace) + "\n"
            if args.out:
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            _print_report(report, out=sys.stderr)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
