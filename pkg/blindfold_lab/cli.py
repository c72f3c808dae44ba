"""Command-line entry point: ``blindfold <command> [options]``.

Commands::

    simulate            random Δ-grid tree and characters
    reconstruct         run the reconstruction on a character matrix
    experiment-scaling  minimal k per n and its log-linear fit
    calibrate           write a calibration table for later runs
    oracle-check        closed-form and enumeration cross-checks

Every command prints one JSON document (sorted keys) on stdout; logs go to
stderr.  Failures print the error dict on stderr and exit with 2 (invalid
regime), 3 (audit violation), 4 (non-convergence) or 1 (anything else).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

from blindfold.bcp import MetricMode, RunOptions
from blindfold.errors import BlindfoldError
from blindfold.evolve import CharacterMatrix, ModelSpec, random_delta_bm_tree, simulate
from blindfold.params import CalibrationTable
from blindfold.treekit import newick_parse, newick_write, rf_distance
from blindfold_lab.errors import EXIT_FAILURE, EXIT_OK, LabError, UsageError, exit_code_for
from blindfold_lab.experiments import (
    DEFAULT_BUDGET,
    DEFAULT_K_MAX,
    DEFAULT_K_START,
    DEFAULT_TARGET,
    Regime,
    calibrate,
    reconstruct,
    scaling_experiment,
)
from blindfold_lab.oracle import oracle_check
from blindfold_lab.store import ResultStore

logger = logging.getLogger(__name__)

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


# -- argument parsing ------------------------------------------------------------------

def _ns(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("need at least one leaf count")
    return values


def _add_regime(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--f", default="0.02", help="shortest edge length (default 0.02)")
    parser.add_argument("--g", default="0.12", help="longest edge length (default 0.12)")
    parser.add_argument("--delta", default="0.02", help="length grid step (default 0.02)")
    parser.add_argument("--failure", type=float, default=0.1, help="failure budget δ")


def _add_experiment(parser: argparse.ArgumentParser) -> None:
    _add_regime(parser)
    parser.add_argument("--ns", type=_ns, default=[8, 16, 32], help="leaf counts, e.g. 8,16,32")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--target", type=float, default=DEFAULT_TARGET)
    parser.add_argument("--k-start", type=int, default=DEFAULT_K_START)
    parser.add_argument("--k-max", type=int, default=DEFAULT_K_MAX)
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                        help="success-rate evaluations allowed per n")
    parser.add_argument("--out", type=Path, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blindfold", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING", choices=_LOG_LEVELS)
    parser.add_argument("--workers", type=int, default=1, help="worker threads")
    parser.add_argument("--record-timing", action="store_true",
                        help="include wall time in the output")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="random tree and characters")
    _add_regime(sim)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--model", default="cfn", choices=("cfn", "jc"))
    sim.add_argument("--k", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out-tree", type=Path, required=True)
    sim.add_argument("--out-chars", type=Path, required=True)

    rec = sub.add_parser("reconstruct", help="reconstruct a tree from characters")
    _add_regime(rec)
    rec.add_argument("--chars", type=Path)
    rec.add_argument("--k-override", type=int,
                     help="use only the first K sites (K must not exceed the matrix)")
    rec.add_argument("--perfect", action="store_true", help="read the true tree metric")
    rec.add_argument("--audit", action="store_true", help="check every iteration")
    rec.add_argument("--true-tree", type=Path)
    rec.add_argument("--model", default="cfn", choices=("cfn", "jc"),
                     help="model of the true tree when no characters are given")
    rec.add_argument("--calibration", type=Path,
                     help="calibration table JSON; truncates to the calibrated k for n")
    rec.add_argument("--tie-seed", type=int, default=0)
    rec.add_argument("--max-iterations", type=int)
    rec.add_argument("--no-delta-rounding", action="store_true")
    rec.add_argument("--out", type=Path, required=True)

    scaling = sub.add_parser("experiment-scaling", help="minimal k versus n")
    _add_experiment(scaling)
    cal = sub.add_parser("calibrate", help="write a calibration table")
    _add_experiment(cal)

    oracle = sub.add_parser("oracle-check", help="closed-form cross-checks")
    oracle.add_argument("--g", type=float, default=0.12)
    oracle.add_argument("--levels", type=int, default=3)
    return parser


def _regime(args: argparse.Namespace, **extra: Any) -> Regime:
    return Regime(f=args.f, g=args.g, delta=args.delta, failure=args.failure, **extra)


# -- commands ----------------------------------------------------------------------------

def _simulate(args: argparse.Namespace) -> dict[str, Any]:
    regime = _regime(args, model=ModelSpec.parse(args.model))
    tree = random_delta_bm_tree(regime.tree_spec(args.n), args.seed)
    chars = simulate(tree, regime.model, args.k, args.seed)
    args.out_tree.write_text(newick_write(tree) + "\n")
    chars.write(args.out_chars)
    return {
        "command": "simulate",
        "seed": args.seed,
        "n": args.n,
        "k": args.k,
        "model": regime.model.value,
        "tree": str(args.out_tree),
        "chars": str(args.out_chars),
    }


def _reconstruct(args: argparse.Namespace) -> dict[str, Any]:
    if (args.perfect or args.audit) and args.true_tree is None:
        raise UsageError("--perfect and --audit need --true-tree.")
    if args.chars is None and not args.perfect:
        raise UsageError("--chars is required unless --perfect is given.")
    chars = CharacterMatrix.read(args.chars) if args.chars is not None else None
    true_tree = newick_parse(args.true_tree.read_text()) if args.true_tree else None
    calibration = CalibrationTable.load(args.calibration) if args.calibration else None
    regime = _regime(args, model=ModelSpec.parse(args.model))
    options = RunOptions(
        mode=MetricMode.PERFECT if args.perfect else MetricMode.STATISTICAL,
        audit=args.audit,
        delta_rounding=not args.no_delta_rounding,
        tie_seed=args.tie_seed,
        max_iterations=args.max_iterations,
        workers=args.workers,
    )
    done = reconstruct(
        chars, regime, options, true_tree=true_tree, k=args.k_override, calibration=calibration,
    )
    text = newick_write(done.tree)
    args.out.write_text(text + "\n")
    report: dict[str, Any] = {
        "command": "reconstruct",
        "tie_seed": args.tie_seed,
        "newick": text,
        "out": str(args.out),
        "iterations": done.result.iterations,
        "params": done.params.to_dict(),
        "certificate": done.params.certificate().to_dict(),
        "trace": [record.to_dict() for record in done.result.trace],
        "length_scale": done.scale,
    }
    if true_tree is not None:
        report["rf_distance"] = rf_distance(done.tree, true_tree)
    return report


def _experiment(args: argparse.Namespace, *, calibrating: bool) -> dict[str, Any]:
    regime = _regime(args, record_timing=args.record_timing)
    name = "calibrate" if calibrating else "experiment-scaling"
    if calibrating:
        store = ResultStore(name, args.out.with_suffix(".trials.json"))
        table = calibrate(
            args.ns, regime, target=args.target, trials=args.trials, k_max=args.k_max,
            budget=args.budget, workers=args.workers, store=store,
        )
        table.save(args.out)
        return {"command": name, "out": str(args.out), **table.to_dict()}
    store = ResultStore(name, args.out)
    result = scaling_experiment(
        args.ns, regime, target=args.target, trials=args.trials, k_start=args.k_start,
        k_max=args.k_max, budget=args.budget, workers=args.workers, store=store,
    )
    return {
        "command": name,
        "out": str(args.out),
        "aggregates": store.aggregates(),
        **result.to_dict(),
    }


def _oracle(args: argparse.Namespace) -> dict[str, Any]:
    checks = oracle_check(g=args.g, levels=args.levels)
    return {
        "command": "oracle-check",
        "ok": all(c.ok for c in checks),
        "checks": [c.to_dict() for c in checks],
    }


_COMMANDS: dict[str, Callable[[argparse.Namespace], dict[str, Any]]] = {
    "simulate": _simulate,
    "reconstruct": _reconstruct,
    "experiment-scaling": lambda args: _experiment(args, calibrating=False),
    "calibrate": lambda args: _experiment(args, calibrating=True),
    "oracle-check": _oracle,
}


def handle(args: argparse.Namespace) -> tuple[int, dict[str, Any]]:
    """Run one parsed command; returns ``(exit code, JSON-ready document)``."""
    command = _COMMANDS.get(args.command)
    if command is None:
        return EXIT_FAILURE, {
            "error": "INVALID_COMMAND",
            "message": f"Unknown command: {args.command!r}. Valid: {sorted(_COMMANDS)}",
        }
    started = time.perf_counter()
    try:
        document = command(args)
    except (BlindfoldError, LabError) as exc:
        return exit_code_for(exc), exc.to_dict()
    if args.record_timing:
        document["wall_time"] = time.perf_counter() - started
    if document.get("ok") is False:
        return EXIT_FAILURE, document
    return EXIT_OK, document


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    code, document = handle(args)
    text = json.dumps(document, indent=2, sort_keys=True)
    if "error" in document:
        print(text, file=sys.stderr)
    else:
        print(text)
    return code
