"""Run every bundled scenario and write CSV, JSON summaries and plots under --out."""

import argparse
from pathlib import Path

from coopmanip.export import export
from coopmanip.scenario import builtin_scenario, builtin_scenario_dir
from coopmanip.sim import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/all")
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    for path in sorted(builtin_scenario_dir().glob("*.yaml")):
        log = run_scenario(builtin_scenario(path.stem))
        export(log, out, plots=not args.no_plots)
        s = log.summary
        print(f"{path.stem:16s} final {s['final_position_error']:.4f} m  rms {s['rms_position_error']:.4f} m  "
              f"losses {s['contact_losses']}")


if __name__ == "__main__":
    main()
