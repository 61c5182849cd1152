"""Command line interface.

Verbs: run (full experiment), certify (stability certificate only),
monitor (inequality monitors only), replay (re-run a manifest and verify
byte-identical outputs). Exit codes: 0 ok, 2 config error, 3 ingestion
error, 4 divergence, 5 certificate inconsistency, 1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import SimulatorError
from .experiment import (
    ExperimentConfig,
    certificate_report,
    monitor_report_text,
    replay,
    run_experiment,
)


def _apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    from .errors import ConfigError

    text = cfg.to_text()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        prefix = f"{key} ="
        lines = text.splitlines()
        hits = [i for i, ln in enumerate(lines) if ln.startswith(prefix)]
        if not hits:
            raise ConfigError(f"override targets unknown key {key!r}")
        lines[hits[0]] = f"{key} = {value.strip()}"
        text = "\n".join(lines)
    return ExperimentConfig.from_text(text)


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if args.set:
        cfg = _apply_overrides(cfg, args.set)
    if args.outdir:
        cfg.outdir = args.outdir
        cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvhsgt",
        description="decentralized online stochastic optimization simulator",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, help_text in (
        ("run", "run every (method, beta, seed) cell of a config"),
        ("certify", "compute the stability certificate for a config"),
        ("monitor", "run the inequality monitors for a config"),
    ):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("config", help="experiment config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )
        p.add_argument("--outdir", default=None, help="override output directory")

    p = sub.add_parser("replay", help="re-run a manifest and compare hashes")
    p.add_argument("manifest", help="path to a manifest.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "run":
            outdir = run_experiment(_load(args))
            print(f"artifacts written to {outdir}")
        elif args.verb == "certify":
            cfg = _load(args)
            for beta in cfg.betas:
                text = certificate_report(cfg, beta)
                print(f"# beta = {format(beta, 'g')}")
                print(text)
        elif args.verb == "monitor":
            cfg = _load(args)
            for beta in cfg.betas:
                print(f"# beta = {format(beta, 'g')}")
                print(monitor_report_text(cfg, beta))
        elif args.verb == "replay":
            mismatches = replay(Path(args.manifest))
            if mismatches:
                print("outputs differ: " + ", ".join(mismatches))
                return 1
            print("all outputs reproduced byte-identically")
    except SimulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
