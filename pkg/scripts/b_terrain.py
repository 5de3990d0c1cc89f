"""Friction step under the object and then under the pushers."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from coopmanip.export import export
from coopmanip.metrics import position_error
from coopmanip.scenario import builtin_scenario
from coopmanip.sim import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/b")
    args = ap.parse_args()
    out = Path(args.out)
    log = run_scenario(builtin_scenario("b_terrain"))
    export(log, out)
    t, e = log.t, position_error(log)
    mu_o, mu_a = log.extras["mu_object"], log.extras["mu_agents"]
    k0 = int(np.argmax(mu_o == mu_o.max()))
    k1 = int(np.argmax((mu_a == mu_o.max()).all(axis=1)))
    print(f"object crosses at {t[k0]:.2f} s, last agent at {t[k1]:.2f} s, peak error {e[k0:k1 + 1].max():.4f} m")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, e)
    ax.axvspan(t[k0], t[k1], color="0.9", label="object on high friction, agents not")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position error [m]")
    ax.legend()
    fig.savefig(out / "b_transition.svg")


if __name__ == "__main__":
    main()
