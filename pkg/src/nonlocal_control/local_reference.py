"""Godunov reference solver for the local conservation law q_t + f(q)_x = 0.

f(q) = q V(q). For a strictly concave or convex flux on the state range the
exact Riemann (Godunov) interface flux has the usual closed form through the
sonic point; otherwise the solver falls back to a monotone Lax-Friedrichs
flux and flags the extra diffusion in the result metadata. This is the
entropy-solution comparison point for the vanishing-kernel-reach experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .mesh import Grid, Velocity

__all__ = ["LocalTrajectory", "solve_local"]


@dataclass(frozen=True)
class LocalTrajectory:
    q: np.ndarray
    dt: float
    n_steps: int
    flux_kind: str  # "godunov-concave", "godunov-convex", or "lax-friedrichs"

    def __post_init__(self):
        q = np.ascontiguousarray(self.q, dtype=np.float64)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def terminal(self) -> np.ndarray:
        return self.q[-1]


def _classify_flux(f, df, q_max: float, n_samples: int = 4001):
    """Detect strict concavity/convexity of f on [0, q_max] by sampling f'."""
    xs = np.linspace(0.0, q_max, n_samples)
    slopes = df(xs)
    d = np.diff(slopes)
    if np.all(d <= 1e-12 * max(1.0, np.max(np.abs(slopes)))):
        kind = "concave"
    elif np.all(d >= -1e-12 * max(1.0, np.max(np.abs(slopes)))):
        kind = "convex"
    else:
        return "general", None
    sign = -1.0 if kind == "concave" else 1.0
    res = minimize_scalar(lambda s: sign * f(np.float64(s)),
                          bounds=(0.0, q_max), method="bounded",
                          options={"xatol": 1e-14})
    return kind, float(res.x)


def solve_local(q0: np.ndarray, grid: Grid, V: Velocity, q_max: float,
                T: float | None = None,
                cfl_safety: float = 0.9) -> LocalTrajectory:
    """First-order monotone finite-volume solve with zero Dirichlet ghosts.

    The time step comes from the |f'| CFL on [0, q_max] and is snapped so the
    final step lands exactly on the horizon.
    """
    q0 = np.asarray(q0, dtype=np.float64)
    if q0.shape[0] != grid.n_cells:
        raise ValueError("initial datum does not match the grid")
    if np.any(q0 < -1e-14) or np.any(q0 > q_max + 1e-14):
        raise ValueError(f"initial datum leaves the box [0, {q_max}]")
    T = grid.T if T is None else T

    f = lambda s: np.asarray(s) * V.v(np.asarray(s))
    df = lambda s: V.v(np.asarray(s)) + np.asarray(s) * V.dv(np.asarray(s))

    kind, sonic = _classify_flux(f, df, q_max)
    xs = np.linspace(0.0, q_max, 4001)
    max_speed = float(np.max(np.abs(df(xs))))
    dt_target = cfl_safety * grid.dx / max(max_speed, 1e-14)
    n_steps = max(1, math.ceil(T / dt_target - 1e-12))
    dt = T / n_steps
    nu = dt / grid.dx

    if kind == "concave":
        def flux(a, b):
            # min over [a,b] at an endpoint; max over [b,a] at the clipped sonic point
            up = np.minimum(f(a), f(b))
            down = f(np.clip(sonic, np.minimum(a, b), np.maximum(a, b)))
            return np.where(a <= b, up, down)
        flux_kind = "godunov-concave"
    elif kind == "convex":
        def flux(a, b):
            up = f(np.clip(sonic, np.minimum(a, b), np.maximum(a, b)))
            down = np.maximum(f(a), f(b))
            return np.where(a <= b, up, down)
        flux_kind = "godunov-convex"
    else:
        def flux(a, b):
            return 0.5 * (f(a) + f(b)) - 0.5 * max_speed * (b - a)
        flux_kind = "lax-friedrichs"

    traj = np.empty((n_steps + 1, grid.n_cells))
    traj[0] = q0
    for n in range(n_steps):
        ext = np.concatenate(([0.0], traj[n], [0.0]))
        F = flux(ext[:-1], ext[1:])
        traj[n + 1] = traj[n] - nu * (F[1:] - F[:-1])
    return LocalTrajectory(q=traj, dt=dt, n_steps=n_steps, flux_kind=flux_kind)
