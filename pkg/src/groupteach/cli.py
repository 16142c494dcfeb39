"""Command line entry point: ``simulate``, ``session`` and ``validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import StudyConfig, load_config, normalize_composition


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def _load(path) -> StudyConfig:
    return load_config(path) if path else StudyConfig()


def cmd_simulate(args) -> int:
    from .study import run_study

    config = _load(args.config)
    changes = {}
    if args.seed is not None:
        changes["master_seed"] = args.seed
    if args.strategies:
        changes["strategies"] = tuple(x for item in args.strategies for x in _csv_list(item))
    if args.compositions:
        changes["compositions"] = tuple(normalize_composition(c) for c in args.compositions)
    if args.replicates is not None:
        changes["replicates"] = args.replicates
    config = replace(config, **changes)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2, default=_profile_json) + "\n")
    records = run_study(config, out, parallel=args.parallel, snapshots=args.snapshots)
    groups = {}
    for r in records:
        groups.setdefault(r.strategy, []).append(r.n_interactions)
    for strat, ns in groups.items():
        print(f"{strat:16s} sessions={len(ns):3d} mean N_i={sum(ns) / len(ns):.2f}")
    print(f"wrote {len(records)} sessions to {out / 'study.csv'}")
    return 0


def _profile_json(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def cmd_session(args) -> int:
    from .study import build_domain, run_session

    config = _load(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    comp = normalize_composition(args.composition)
    domain = build_domain(config)
    rec = run_session(args.strategy, comp, args.replicate, domain, snapshots=not args.no_snapshots)
    for p in rec.periods:
        member = f" member {p['member']}" if "member" in p else ""
        print(f"period {p['period']:2d}{member} KC{p['kc']} area={p['demos']['area']:.4f} "
              f"correct={p['correct']} advanced={p['advanced']}")
    print(f"N_i={rec.n_interactions} team_knowledge={rec.team_knowledge:.4f} converged={rec.converged}"
          + (f" aborted: {rec.aborted}" if rec.aborted else ""))
    if args.trace:
        Path(args.trace).write_text(json.dumps(rec.to_dict()))
        print(f"trace written to {args.trace}")
    return 0


def cmd_validate(args) -> int:
    from .checks import run_checks

    return 0 if run_checks() else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groupteach", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the strategy x composition study")
    s.add_argument("--config", help="JSON or TOML config (defaults if omitted)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--parallel", type=int, default=1, help="worker processes")
    s.add_argument("--strategies", nargs="+", help="subset of strategies")
    s.add_argument("--compositions", nargs="+", help="compositions such as NNP or N,N,P")
    s.add_argument("--replicates", type=int, help="teams per cell")
    s.add_argument("--snapshots", action="store_true", help="store belief snapshots in session traces")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("session", help="run and trace a single session")
    s.add_argument("--config")
    s.add_argument("--strategy", required=True)
    s.add_argument("--composition", required=True, help="e.g. N,N,P")
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--replicate", type=int, default=0)
    s.add_argument("--trace", help="write the full session record as JSON")
    s.add_argument("--no-snapshots", action="store_true", help="omit per-period belief snapshots")
    s.set_defaults(func=cmd_session)

    s = sub.add_parser("validate", help="run the deterministic invariant checks")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
