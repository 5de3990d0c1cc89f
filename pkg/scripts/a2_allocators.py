"""Two pushers, straight line with a yaw change: QP allocation vs the slide heuristic."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from coopmanip.export import export
from coopmanip.scenario import builtin_scenario
from coopmanip.sim import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/a2")
    args = ap.parse_args()
    out = Path(args.out)
    base = builtin_scenario("a2_allocation")
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for ax, alloc in zip(axes, ("qp", "heuristic")):
        log = run_scenario(base.replace(allocator=alloc))
        export(log, out, stem=f"a2_{alloc}")
        for i, a in enumerate(log.config.agents):
            ax.plot(log.t, log[f"d_{i}"], label=f"agent {i}")
            ax.axhline(a.contact.d_max, color="0.6", lw=0.8)
            ax.axhline(a.contact.d_min, color="0.6", lw=0.8)
        ax.set_ylabel(f"{alloc}: slide d [m]")
        print(f"{alloc:9s} final {log.summary['final_position_error']:.4f} m  "
              f"contact losses {log.summary['contact_losses']}")
    axes[0].legend()
    axes[1].set_xlabel("t [s]")
    fig.savefig(out / "a2_slides.svg")


if __name__ == "__main__":
    main()
