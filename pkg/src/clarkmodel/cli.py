"""Command line entry point."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import ConfigError, ScenarioConfig, run

SUBCOMMANDS = {
    "analyze": "analyze",
    "verify-hs-identity": "verify",
    "verify-eq4": "verify",
    "sweep": "sweep",
    "synthesize": "synthesize",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarkmodel",
        description="Schatten-class perturbations of the shift semigroup from atomic measures.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON file")
    common.add_argument("--out", type=Path, help="output directory for report files")
    common.add_argument("--tol", type=float, help="tolerance for unitarity checks")
    common.add_argument("--seed", type=int, help="seed for randomized cases")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="model checks, spectra and bounds")
    for name in ("verify-hs-identity", "verify-eq4"):
        p = sub.add_parser(name, parents=[common],
                           help="exact Hilbert-Schmidt identity for K")
        p.add_argument("--random-cases", type=int, default=None)
    sub.add_parser("sweep", parents=[common], help="Schatten norms over the t and p grids")
    ce = sub.add_parser("counterexample", parents=[common], help="the two counterexamples")
    ce.add_argument("which", choices=["integers", "sharp3"])
    sub.add_parser("synthesize", parents=[common],
                   help="block model with a prescribed unitary part")
    return parser


def config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    doc = json.loads(args.config.read_text()) if args.config else {}
    if args.command == "counterexample":
        kind = f"counterexample-{args.which}"
    else:
        kind = SUBCOMMANDS[args.command]
    if doc.get("kind", kind) != kind:
        raise ConfigError(f"config kind {doc['kind']!r} does not match command {kind!r}")
    doc["kind"] = kind
    if args.out is not None:
        doc["out"] = str(args.out)
    if args.tol is not None:
        doc["tol"] = args.tol
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "random_cases", None) is not None:
        doc["random_cases"] = args.random_cases
    if kind == "verify" and not doc.get("blocks") and not doc.get("random_cases"):
        doc["random_cases"] = 20
    if kind == "synthesize" and "target" not in doc:
        doc["target"] = [{"angle_over_pi": 1.0, "multiplicity": 2},
                         {"angle_over_pi": 0.5, "multiplicity": 1}]
    return ScenarioConfig.from_dict(doc)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        result = run(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    where = f" -> {cfg.out}" if cfg.out else ""
    print(f"{result.kind}: {'PASS' if result.passed else 'FAIL'}{where}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
