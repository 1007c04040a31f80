"""Command-line driver: ``run``, ``plan`` and ``validate``."""
from __future__ import annotations

import argparse
import os
import sys

from .engine import EngineError, bootstrap_view, run
from .saga import MODES, PlanError, plan
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_DIAG, EXIT_RUNTIME = 0, 1, 2


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed {text!r} is not an integer") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sagaqnet", description="Saga-based quantum network simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="simulate a scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--seed", type=_seed, default=None,
                   help="defaults to $SAGAQNET_SEED, then 0")
    r.add_argument("--mode", choices=MODES, default=None,
                   help="override every objective's execution mode")
    r.add_argument("--trace", help="trace output path (default: stdout)")
    r.add_argument("--metrics", help="metrics output path (default: stdout)")

    p = sub.add_parser("plan", help="print the saga planned for one objective")
    p.add_argument("--scenario", required=True)
    p.add_argument("--objective", required=True)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--json", action="store_true", help="print the serialized DAG instead")

    v = sub.add_parser("validate", help="parse and check a scenario")
    v.add_argument("--scenario", required=True)
    return ap


def _load(path: str):
    try:
        return load_scenario(path)
    except OSError as e:
        print(f"{path}: {e.strerror}", file=sys.stderr)
    except ScenarioError as e:
        for d in e.diagnostics:
            print(f"{path}:{d.line}: {d.message}", file=sys.stderr)
    return None


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sc = _load(args.scenario)
    if sc is None:
        return EXIT_DIAG
    if args.cmd == "validate":
        print(f"{args.scenario}: ok ({len(sc.nodes)} nodes, {len(sc.objectives)} objectives)")
        return EXIT_OK
    if args.cmd == "plan":
        try:
            o = sc.objective(args.objective)
        except KeyError:
            print(f"no objective {args.objective}", file=sys.stderr)
            return EXIT_DIAG
        try:
            s = plan(o, bootstrap_view(sc), sc.policy, o.arrival, mode=args.mode)
        except (PlanError, EngineError) as e:
            print(f"planning failed: {type(e).__name__}: {e}", file=sys.stderr)
            return EXIT_RUNTIME
        print(s.to_json() if args.json else s.describe())
        return EXIT_OK
    seed = args.seed
    if seed is None:
        try:
            seed = _seed(os.environ.get("SAGAQNET_SEED", "0"))
        except argparse.ArgumentTypeError as e:
            print(f"SAGAQNET_SEED: {e}", file=sys.stderr)
            return EXIT_DIAG
    try:
        res = run(sc, seed, args.mode)
    except EngineError as e:
        print(f"simulation failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    _write(args.trace, res.trace_text())
    _write(args.metrics, res.metrics_text())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
