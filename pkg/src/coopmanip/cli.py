"""Command-line front end.

    coopmanip run --scenario a1_mass_drop --out runs/ --plots
    coopmanip compare --scenario scenarios/a2_allocation.yaml --out runs/a2
    coopmanip selftest

``--scenario`` takes a YAML path or the name of a bundled scenario.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .export import export, write_csv
from .scenario import builtin_scenario, builtin_scenario_dir, load_scenario
from .sim import SimulationDiverged, run_scenario

EXIT_FAIL = 1
EXIT_DIVERGED = 3

SUMMARY_KEYS = ("rms_position_error", "final_position_error", "steady_position_error", "rms_yaw_error",
                "contact_losses", "saturation_duty", "max_allocation_residual")


def resolve_scenario(ref: str):
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") or path.exists():
        return load_scenario(path)
    try:
        return builtin_scenario(ref)
    except OSError:
        names = sorted(p.stem for p in builtin_scenario_dir().glob("*.yaml"))
        raise SystemExit(f"unknown scenario {ref!r}; bundled scenarios: {', '.join(names)}")


def _overrides(cfg, args):
    changes = {}
    for key in ("controller", "allocator", "duration", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    return cfg.replace(**changes) if changes else cfg


def _run_one(cfg, out_dir: Path, plots: bool, stem: str):
    try:
        log = run_scenario(cfg)
    except SimulationDiverged as exc:
        write_csv(exc.log, out_dir / f"{stem}_partial.csv")
        print(f"error: {exc}; partial log in {out_dir / (stem + '_partial.csv')}", file=sys.stderr)
        print(json.dumps(exc.diagnostic, indent=2), file=sys.stderr)
        raise SystemExit(EXIT_DIVERGED)
    files = export(log, out_dir, plots=plots, stem=stem)
    return log, files


def _fmt(v) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def cmd_run(args) -> int:
    cfg = _overrides(resolve_scenario(args.scenario), args)
    out = Path(args.out)
    log, files = _run_one(cfg, out, args.plots, cfg.name)
    for k in SUMMARY_KEYS:
        if k in log.summary:
            print(f"{k:24s} {_fmt(log.summary[k])}")
    print(f"wrote {files['csv']} and {files['summary']}")
    return 0


def cmd_compare(args) -> int:
    base = _overrides(resolve_scenario(args.scenario), args)
    out = Path(args.out)
    rows = {}
    for controller in ("adaptive", "pd"):
        for allocator in ("qp", "heuristic"):
            tag = f"{controller}_{allocator}"
            log, _ = _run_one(base.replace(controller=controller, allocator=allocator), out,
                              args.plots, f"{base.name}_{tag}")
            rows[tag] = {k: log.summary.get(k) for k in SUMMARY_KEYS}
    tags = list(rows)
    print(f"{'metric':24s}" + "".join(f"{t:>20s}" for t in tags))
    for k in SUMMARY_KEYS:
        print(f"{k:24s}" + "".join(f"{_fmt(rows[t][k]):>20s}" for t in tags))
    path = out / f"{base.name}_compare.json"
    try:
        path.write_text(json.dumps(rows, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    print(f"wrote {path}")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest(args.seed or 0) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopmanip", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="YAML file or bundled scenario name")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--duration", type=float, help="override the scenario duration [s]")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--plots", action="store_true", help="also write SVG plots")

    r = sub.add_parser("run", help="simulate one scenario")
    common(r)
    r.add_argument("--controller", choices=("adaptive", "pd"))
    r.add_argument("--allocator", choices=("qp", "heuristic"))
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="run every controller/allocator pairing side by side")
    common(c)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("selftest", help="run the built-in invariant checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
