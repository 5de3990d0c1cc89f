"""Heavy object pushed by a saturated pair until a third agent joins."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from coopmanip.export import export
from coopmanip.metrics import position_error, window_mean
from coopmanip.scenario import builtin_scenario
from coopmanip.sim import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/c")
    args = ap.parse_args()
    out = Path(args.out)
    log = run_scenario(builtin_scenario("c_heavy_join"))
    export(log, out)
    join = next(e.time for e in log.config.events if e.kind == "agent_join")
    t, e = log.t, position_error(log)
    before, after = window_mean(t, e, join - 5, join), window_mean(t, e, join, join + 5)
    print(f"mean error 5 s before join {before:.3f} m, after {after:.3f} m")
    fig, (ax, bx) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax.plot(t, e)
    ax.axvline(join, color="0.6")
    ax.set_ylabel("position error [m]")
    for i in range(log.n_agents):
        bx.plot(t, log[f"Fr_{i}"], label=f"agent {i}")
    bx.set_ylabel("push force [N]")
    bx.set_xlabel("t [s]")
    bx.legend()
    fig.savefig(out / "c_forces.svg")


if __name__ == "__main__":
    main()
