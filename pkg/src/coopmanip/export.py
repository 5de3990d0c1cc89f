"""Writing run logs to disk: CSV telemetry, JSON summary and SVG plots."""

from __future__ import annotations

import csv
import json
import math
import subprocess
from pathlib import Path

import numpy as np

from .metrics import position_error, yaw_error

_FLAG_PREFIXES = ("contact_", "sat_")


def build_id() -> str:
    """``git describe`` of the source tree, or the package version outside a checkout."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__
    return f"coopmanip-{__version__}"


def _cell(name: str, value: float):
    if name.startswith(_FLAG_PREFIXES):
        return 1 if value > 0.5 else 0
    return repr(float(value))


def _open(path: Path, mode: str = "w"):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_csv(log, path) -> Path:
    path = Path(path)
    names = log.columns[:-1]
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log.columns)
        for row, ev in zip(log.data, log.events):
            w.writerow([_cell(n, v) for n, v in zip(names, row)] + [ev])
    return path


def read_csv(path) -> tuple[list, np.ndarray, list]:
    """Inverse of :func:`write_csv`: (header, numeric columns, event strings)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r[:-1]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    return header, data, [r[-1] for r in body]


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def summary_dict(log) -> dict:
    return {"scenario": log.config.name, "build": build_id(), "metrics": _jsonable(log.summary),
            "config": log.config.to_dict()}


def write_summary(log, path) -> Path:
    path = Path(path)
    with _open(path) as fh:
        json.dump(summary_dict(log), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_plots(log, out_dir) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t = log.t
    paths = []

    fig, ax = plt.subplots(figsize=(6, 5))
    ax.plot(log["xd_x"], log["xd_y"], "k--", lw=1, label="desired")
    ax.plot(log["xp_x"], log["xp_y"], lw=1.5, label="object")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend()
    ax.set_title(log.config.name)
    paths.append(out_dir / "trajectory.svg")
    _save(fig, paths[-1])

    fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    a1.plot(t, position_error(log))
    a1.set_ylabel("position error [m]")
    a2.plot(t, yaw_error(log))
    a2.set_ylabel("yaw error [rad]")
    a2.set_xlabel("t [s]")
    for k, ev in enumerate(log.events):
        if ev:
            for a in (a1, a2):
                a.axvline(t[k], color="0.7", lw=0.8)
    paths.append(out_dir / "error.svg")
    _save(fig, paths[-1])
    plt.close("all")
    return paths


def _save(fig, path: Path):
    try:
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export(log, out_dir, plots: bool = False, stem: str | None = None) -> dict:
    """Write ``<stem>.csv`` and ``<stem>_summary.json`` (plus SVGs) under ``out_dir``."""
    out_dir = Path(out_dir)
    stem = stem or log.config.name
    files = {"csv": write_csv(log, out_dir / f"{stem}.csv"),
             "summary": write_summary(log, out_dir / f"{stem}_summary.json")}
    if plots:
        files["plots"] = write_plots(log, out_dir / f"{stem}_plots")
    return files
