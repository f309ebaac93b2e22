"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 verification failure.
The default output root is ``$HYBRIDLGT_OUTPUT_ROOT`` (``./runs`` if unset).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import BACKEND, __version__
from . import config as CF

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

log = logging.getLogger("hybridlgt")


def _common(p: argparse.ArgumentParser, config: bool = False) -> None:
    if config:
        p.add_argument("--config", required=True,
                       help="YAML/JSON config file, a previous manifest.json, or a shipped experiment name")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for trajectory sampling (default: CPU count)")
    p.add_argument("--out", default=None,
                   help=f"output directory (default: ${CF.OUTPUT_ROOT_ENV}/<experiment>)")
    p.add_argument("--exact", action="store_true", help="evaluate expectation values exactly (no shot noise)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hybridlgt", description="Hybrid oscillator-qubit lattice gauge simulations")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("run", help="run an experiment from a config"), config=True)

    pv = sub.add_parser("verify", help="synthesized gates against closed-form targets")
    _common(pv)
    pv.add_argument("--suite", action="append", default=None,
                    help="suite to run (repeatable; default: all)")
    pv.add_argument("--draws", type=int, default=None, help="random parameter draws per check")
    pv.add_argument("--config", default=None, help="optional gate-verify config")

    pr = sub.add_parser("resources", help="entangling-gate counts and circuit fidelities")
    _common(pr)
    pr.add_argument("--config", default=None, help="optional resources config")

    pd = sub.add_parser("decay", help="effective <n^2> decay times, oscillator against Fock-binary")
    _common(pd)
    pd.add_argument("--config", default=None, help="optional decay config")
    pd.add_argument("--trajectories", type=int, default=None, help="also sample this many trajectories per N")

    sub.add_parser("list-experiments", help="list the shipped experiment configs")
    return ap


def _resolve(args, default_kind: str | None = None) -> CF.ExperimentConfig:
    if getattr(args, "config", None):
        cfg = CF.load_config(args.config)
        if default_kind and cfg.kind != default_kind:
            raise CF.ConfigError(f"{args.config}: kind {cfg.kind!r} cannot be used with '{args.command}'")
    else:
        cfg = CF.ExperimentConfig(name=default_kind, kind=default_kind)
    data = cfg.canonical()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.exact:
        data["shots"] = None
    if getattr(args, "draws", None) is not None:
        data.setdefault("verify", {})["draws"] = args.draws
    if getattr(args, "suite", None):
        data.setdefault("verify", {})["suites"] = args.suite
    if getattr(args, "trajectories", None) is not None:
        data.setdefault("decay", {})["trajectories"] = args.trajectories
    if args.out is not None:
        data["output_dir"] = args.out
    try:
        return CF.ExperimentConfig.model_validate(data)
    except Exception as exc:
        raise CF.ConfigError(f"invalid override: {exc}") from None


def _workers(args, cfg: CF.ExperimentConfig) -> int:
    w = args.workers if args.workers is not None else (cfg.workers or os.cpu_count() or 1)
    if w < 1:
        raise CF.ConfigError("--workers must be >= 1")
    return w


def _list() -> int:
    for name, cfg in CF.shipped_experiments():
        print(f"{name:28s} {cfg.kind:12s} {cfg.description}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list-experiments":
        return _list()
    from . import experiments as EX
    from .qsp import QSPError
    kind = {"run": None, "verify": "gate-verify", "resources": "resources", "decay": "decay"}[args.command]
    try:
        cfg = _resolve(args, kind)
        workers = _workers(args, cfg)
        path, outcome = EX.run_experiment(cfg, workers=workers)
    except CF.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QSPError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    report = outcome.summary.get("report")
    if report:
        print(report)
    else:
        print(json.dumps(EX._jsonable(outcome.summary), sort_keys=True, indent=2))
    print(f"outputs: {path}")
    if not outcome.passed:
        print("verification failure", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
