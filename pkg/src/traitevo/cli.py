"""Command-line frontend: ``traitevo run|sweep|acceptance|audit|list-scenarios``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import (AssumptionViolation, AuditFailure, ConfigurationError, ContractViolation,
                     ExtinctionEvent, NumericalError, TraitEvoError, DegenerateStateError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_AUDIT = 3
EXIT_NUMERICAL = 4
EXIT_ACCEPTANCE = 5
EXIT_EXTINCTION = 6

log = logging.getLogger("traitevo")


def exit_code_for(exc):
    if isinstance(exc, (AuditFailure, AssumptionViolation)):
        return EXIT_AUDIT
    if isinstance(exc, (ConfigurationError, ContractViolation)):
        return EXIT_CONFIG
    if isinstance(exc, ExtinctionEvent):
        return EXIT_EXTINCTION
    if isinstance(exc, (NumericalError, DegenerateStateError)):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


def _status_code(status):
    return {"ok": EXIT_OK, "extinct": EXIT_EXTINCTION}.get(status, EXIT_NUMERICAL)


def _load(args):
    from .config import load_config

    if not args.config:
        raise ConfigurationError("--config is required")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.values["scenario"]["seed"] = args.seed
    return cfg


def cmd_run(args):
    from .experiments import execute
    from .output import write_run

    cfg = _load(args)
    out = Path(args.out or Path("runs") / cfg.name)
    res = execute(cfg, force=args.force)
    write_run(res, out)
    print(f"{cfg.name}: status {res.status}; wrote {out}")
    for k, v in res.summary.items():
        print(f"  {k} = {v}")
    return _status_code(res.status)


def _sweep_member(values, source, epsilon, out, force):
    """Run one sweep member in isolation; return its scaling row."""
    from .config import ScenarioConfig
    from .experiments import execute
    from .output import write_run

    cfg = ScenarioConfig(values, source).with_epsilon(epsilon)
    row = {"epsilon": float(epsilon), "directory": str(out)}
    try:
        res = execute(cfg, force=force)
        write_run(res, out)
        row.update(res.summary)
        row["status"] = res.status
    except TraitEvoError as exc:
        row["status"] = {EXIT_AUDIT: "audit_failed", EXIT_CONFIG: "config_error",
                         EXIT_EXTINCTION: "extinct"}.get(exit_code_for(exc), "numerical_error")
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(args):
    from .output import write_sweep

    cfg = _load(args)
    out = Path(args.out or Path("runs") / f"{cfg.name}_sweep")
    eps_list = cfg.epsilons
    for eps in eps_list:
        cfg.with_epsilon(eps).build()  # config errors abort before anything runs
    jobs = [(cfg.values, cfg.source, eps, out / f"eps_{eps:g}", args.force) for eps in eps_list]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_member, *zip(*jobs)))
    else:
        rows = [_sweep_member(*job) for job in jobs]
    manifest = write_sweep(cfg, rows, out)
    print(f"{cfg.name}: wrote {out}")
    for r in sorted(rows, key=lambda r: -r["epsilon"]):
        print(f"  eps={r['epsilon']:g}: {r['status']}" + (f" ({r['error']})" if "error" in r else ""))
    for k, v in manifest["slopes"].items():
        print(f"  slope {k} = {v:.4g}")
    failed = [r for r in rows if r["status"] != "ok"]
    if not failed:
        return EXIT_OK
    order = {"config_error": EXIT_CONFIG, "audit_failed": EXIT_AUDIT,
             "numerical_error": EXIT_NUMERICAL, "extinct": EXIT_EXTINCTION}
    return min(order.get(r["status"], EXIT_NUMERICAL) for r in failed)


def cmd_acceptance(args):
    from . import acceptance

    if args.list:
        for line in acceptance.inventory():
            print(line)
        return EXIT_OK
    seed = acceptance.SEED if args.seed is None else args.seed
    results = acceptance.run_suite(seed=seed)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def cmd_audit(args):
    from .audit import audit

    cfg = _load(args)
    built = cfg.build()
    rep = audit(built.spec, built.grid, built.scheme.horizon, built.scheme.k0)
    for c in rep.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: margin {c.margin:.6g}  {c.detail}")
    return EXIT_OK if rep.passed else EXIT_AUDIT


def cmd_list_scenarios(args):
    from .config import bundled_scenarios, load_config

    for name in bundled_scenarios():
        print(f"{name:24s} {load_config(name)['scenario.description']}")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "acceptance": cmd_acceptance,
    "audit": cmd_audit,
    "list-scenarios": cmd_list_scenarios,
}


def build_parser():
    p = argparse.ArgumentParser(prog="traitevo", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="scenario file or bundled scenario name")
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="run even if the hypothesis audit fails")
    p.add_argument("--threads", type=int, default=1, help="parallel sweep members")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized checks")
    p.add_argument("--list", action="store_true", help="list acceptance criteria without running")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except TraitEvoError as exc:
        code = exit_code_for(exc)
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
