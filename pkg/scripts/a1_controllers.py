"""Mass-drop run: adaptive vs PD tracking error and the parameter estimates over time."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from coopmanip.export import export
from coopmanip.metrics import position_error
from coopmanip.scenario import builtin_scenario
from coopmanip.sim import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/a1")
    args = ap.parse_args()
    out = Path(args.out)
    base = builtin_scenario("a1_mass_drop")
    logs = {c: run_scenario(base.replace(controller=c)) for c in ("adaptive", "pd")}

    fig, (ax, bx) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for c, log in logs.items():
        export(log, out, stem=f"a1_{c}")
        ax.plot(log.t, position_error(log), label=c)
        print(f"{c:9s} steady {log.summary['steady_position_error']:.4f} m  "
              f"yaw rms {log.summary['rms_yaw_error']:.4f} rad")
    ad = logs["adaptive"]
    bx.plot(ad.t, ad["theta_hat_1"], label="estimated mass")
    bx.plot(ad.t, ad.extras["mass"], "k--", lw=1, label="true mass")
    ax.set_ylabel("position error [m]")
    bx.set_ylabel("mass [kg]")
    bx.set_xlabel("t [s]")
    ax.legend()
    bx.legend()
    fig.savefig(out / "a1_comparison.svg")
    print(f"wrote {out / 'a1_comparison.svg'}")


if __name__ == "__main__":
    main()
