"""Command line: run, audit, report, scenarios."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .audit import AuditFailure, audit_trace
from .config import ConfigError, RunConfig, load_config
from .engine import run
from .report import build_report
from .scenarios import DESCRIPTIONS, SCENARIOS, get_scenario
from .trace import TraceError, emit_trace, load_trace


def _config_from(args) -> RunConfig:
    if args.config and args.scenario:
        raise ConfigError(["give either --config or --scenario, not both"])
    if args.scenario:
        kw = {}
        if args.stages is not None:
            kw["stages"] = args.stages
        if args.disable_use_lifting and args.scenario == "section25":
            kw["disable_use_lifting"] = True
        try:
            cfg = get_scenario(args.scenario, **kw)
        except KeyError as exc:
            raise ConfigError([str(exc.args[0])]) from None
    elif args.config:
        cfg = load_config(args.config)
        if args.stages is not None:
            cfg.stages = args.stages
    else:
        raise ConfigError(["one of --config or --scenario is required"])
    if args.disable_use_lifting:
        cfg.disable_use_lifting = True
    if args.strict:
        cfg.strict = True
    cfg.check()
    return cfg


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration JSON file")
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--stages", type=int, help="override the stage budget")
    p.add_argument("--out", help="write the JSONL trace here")
    p.add_argument("--strict", action="store_true", help="abort on the first per-stage violation")
    p.add_argument("--disable-use-lifting", action="store_true",
                   help="test only: skip T-use lifting when an R challenges")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="priority-sim", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)
    p_run = sub.add_parser("run", help="run a construction and audit it")
    _add_run_flags(p_run)
    p_rep = sub.add_parser("report", help="run (or load a trace) and print the full report")
    _add_run_flags(p_rep)
    p_rep.add_argument("--trace", help="report on an existing trace instead of running")
    p_aud = sub.add_parser("audit", help="audit an existing trace")
    p_aud.add_argument("trace", help="JSONL trace file")
    p_aud.add_argument("--summary", action="store_true", help="print only the machine summary")
    sub.add_parser("scenarios", help="list built-in scenarios")
    return parser


def _run(args):
    cfg = _config_from(args)
    construction = run(cfg)
    trace = construction.trace
    if args.out:
        emit_trace(trace, args.out)
    return trace


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "scenarios":
            for name in SCENARIOS:
                print(f"{name:18} {DESCRIPTIONS[name]}")
            return 0
        if args.verb == "audit":
            trace = load_trace(args.trace)
            report = audit_trace(trace)
            text, summary = build_report(trace, report)
            print("\n".join(summary) if args.summary else text + "\n".join(summary))
            return 0 if report.passed else 1
        if args.verb == "report" and args.trace:
            trace = load_trace(args.trace)
        else:
            trace = _run(args)
        report = audit_trace(trace)
        text, summary = build_report(trace, report)
        if args.verb == "report":
            print(text + "\n".join(summary))
        else:
            print(text.splitlines()[0])
            for line in summary:
                print(line)
            if args.out:
                print(f"trace written to {args.out}")
        return 0 if report.passed else 1
    except ConfigError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    except (TraceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AuditFailure as exc:
        print(f"strict audit failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
