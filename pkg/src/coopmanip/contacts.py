"""Contact geometry shared by the physics and the force allocator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def cross2(a, b) -> float:
    """Planar cross product a x b (z component)."""
    return float(a[0] * b[1] - a[1] * b[0])


@dataclass(frozen=True)
class ContactSpec:
    """Where and how one agent touches the object.

    All vectors are in the object body frame, relative to the reference point p.
    The agent pushes along ``n_hat`` (pointing into the object) and slides along
    ``t_hat``; its contact point is ``r_0 + d * t_hat``.
    """

    r_0: np.ndarray
    n_hat: np.ndarray
    t_hat: np.ndarray
    d_min: float = -0.2
    d_max: float = 0.2
    active: bool = True

    def __post_init__(self):
        for name in ("r_0", "n_hat", "t_hat"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(2))
        if abs(np.linalg.norm(self.n_hat) - 1.0) > 1e-9 or abs(np.linalg.norm(self.t_hat) - 1.0) > 1e-9:
            raise ValueError("n_hat and t_hat must be unit vectors")
        if abs(float(self.n_hat @ self.t_hat)) > 1e-9:
            raise ValueError("n_hat and t_hat must be orthogonal")
        if not self.d_min <= 0.0 <= self.d_max:
            raise ValueError(f"slide bounds must bracket zero, got [{self.d_min}, {self.d_max}]")

    @property
    def moment_arm_force(self) -> float:
        """Moment about p per unit force at zero slide: r_0 x n_hat."""
        return cross2(self.r_0, self.n_hat)

    @property
    def moment_arm_slide(self) -> float:
        """Moment about p per unit (force * slide): t_hat x n_hat."""
        return cross2(self.t_hat, self.n_hat)

    def point(self, d: float) -> np.ndarray:
        return self.r_0 + d * self.t_hat


def face_interval(contact: ContactSpec, half_extents) -> tuple[float, float]:
    """Range of slide values keeping ``r_0 + d t_hat`` on the rectangle centred at p."""
    h = np.asarray(half_extents, dtype=float)
    lo, hi = -np.inf, np.inf
    for k in range(2):
        tk = contact.t_hat[k]
        if abs(tk) < 1e-12:
            continue
        a = (-h[k] - contact.r_0[k]) / tk
        b = (h[k] - contact.r_0[k]) / tk
        lo = max(lo, min(a, b))
        hi = min(hi, max(a, b))
    return float(lo), float(hi)
