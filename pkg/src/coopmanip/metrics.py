"""Scalar summaries and error time series of a run."""

from __future__ import annotations

import numpy as np

STEADY_WINDOW = 2.0


def position_error(log) -> np.ndarray:
    return np.hypot(log["xp_x"] - log["xd_x"], log["xp_y"] - log["xd_y"])


def yaw_error(log) -> np.ndarray:
    e = log["theta"] - log["theta_d"]
    return np.arctan2(np.sin(e), np.cos(e))


def _joined(log) -> np.ndarray:
    j = log.extras.get("joined")
    if j is None or len(j) != len(log):
        return np.ones((len(log), log.n_agents), dtype=bool)
    return np.asarray(j, dtype=bool)


def contact_losses(log) -> int:
    """Number of times a team member drops out of contact while still in the team."""
    joined = _joined(log)
    count = 0
    for i in range(log.n_agents):
        c = log[f"contact_{i}"] > 0.5
        lost = c[:-1] & ~c[1:] & joined[:-1, i] & joined[1:, i]
        count += int(lost.sum())
    return count


def window_mean(t, x, t0: float, t1: float) -> float:
    m = (t >= t0) & (t <= t1)
    return float(np.mean(x[m])) if m.any() else float("nan")


def metrics(log) -> dict:
    if len(log) == 0:
        raise ValueError("empty log")
    t = log.t
    e = position_error(log)
    y = yaw_error(log)
    sat = np.zeros(len(log), dtype=bool)
    for i in range(log.n_agents):
        sat |= log[f"sat_{i}"] > 0.5
    th = np.stack([log[f"theta_hat_{k}"] for k in range(1, 5)], axis=1)
    ps = np.stack([log[f"psi_hat_{k}"] for k in range(1, 4)], axis=1)
    out = {
        "duration": float(t[-1]),
        "records": int(len(log)),
        "rms_position_error": float(np.sqrt(np.mean(e * e))),
        "max_position_error": float(e.max()),
        "final_position_error": float(e[-1]),
        "steady_position_error": window_mean(t, e, t[-1] - STEADY_WINDOW, t[-1]),
        "rms_yaw_error": float(np.sqrt(np.mean(y * y))),
        "max_yaw_error": float(np.abs(y).max()),
        "final_yaw_error": float(abs(y[-1])),
        "contact_losses": contact_losses(log),
        "saturation_duty": float(sat.mean()),
        "theta_hat_min": th.min(axis=0).tolist(),
        "theta_hat_max": th.max(axis=0).tolist(),
        "theta_hat_final": th[-1].tolist(),
        "psi_hat_min": ps.min(axis=0).tolist(),
        "psi_hat_max": ps.max(axis=0).tolist(),
        "psi_hat_final": ps[-1].tolist(),
    }
    res = log.extras.get("alloc_residual")
    if res is not None and len(res):
        out["max_allocation_residual"] = float(np.max(res))
    return out
