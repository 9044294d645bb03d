"""Explicit finite-volume scheme for the nonlocal conservation law.

Interior update (j = 1..P-1):

    q_j' = q_j + (alpha dt / 2dx) (q_{j-1} - 2 q_j + q_{j+1})
              + (dt / 2dx) (q_{j-1} V(W_{j-1}) - q_{j+1} V(W_{j+1}))

with W the discrete downstream convolution of the current row, and zero
Dirichlet values written into both boundary cells of every new row. The full
trajectory is stored; the adjoint sweep needs every row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convolution import nonlocal_fast
from .mesh import Grid, KernelWeights, SchemeParams, Velocity

__all__ = ["Control", "StateTrajectory", "step", "solve_forward", "mass"]

MAX_PRINCIPLE_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised when the explicit scheme leaves its stability envelope."""


@dataclass(frozen=True)
class Control:
    """Box-constrained initial datum."""

    q0: np.ndarray
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        q0 = np.ascontiguousarray(self.q0, dtype=np.float64)
        q0.setflags(write=False)
        object.__setattr__(self, "q0", q0)

    def is_feasible(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.q0 >= self.lower - tol)
                    and np.all(self.q0 <= self.upper + tol))


@dataclass(frozen=True)
class StateTrajectory:
    """Rows q[n] for n = 0..N; row 0 is the sampled initial datum."""

    q: np.ndarray
    grid: Grid
    kernel: KernelWeights
    params: SchemeParams

    def __post_init__(self):
        q = np.ascontiguousarray(self.q, dtype=np.float64)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def terminal(self) -> np.ndarray:
        return self.q[-1]


def step(q_row: np.ndarray, kernel: KernelWeights, params: SchemeParams,
         grid: Grid, V: Velocity) -> np.ndarray:
    """One explicit step; boundary entries of the output are zero."""
    q = np.asarray(q_row, dtype=np.float64)
    W = nonlocal_fast(q, kernel)
    vW = V.v(W)
    lam = grid.dt / (2.0 * grid.dx)
    lam_a = params.alpha * lam
    out = np.zeros_like(q)
    out[1:-1] = (
        q[1:-1]
        + lam_a * (q[:-2] - 2.0 * q[1:-1] + q[2:])
        + lam * (q[:-2] * vW[:-2] - q[2:] * vW[2:])
    )
    return out


def solve_forward(control: Control, grid: Grid, kernel: KernelWeights,
                  params: SchemeParams, V: Velocity,
                  validate: bool = True) -> StateTrajectory:
    """March N steps from the control vector, storing all rows.

    With validate=True every row is checked for finiteness and for the
    discrete max principle 0 <= q <= q_max (within MAX_PRINCIPLE_TOL); a
    violation aborts with the offending (n, j), since it signals that the
    time step is outside the stability region.
    """
    q0 = control.q0
    if q0.shape[0] != grid.n_cells:
        raise ValueError(
            f"control has {q0.shape[0]} entries, grid has {grid.n_cells} cells"
        )
    traj = np.empty((grid.N + 1, grid.n_cells))
    traj[0] = q0
    check_mp = validate and control.is_feasible() and control.lower == 0.0
    for n in range(grid.N):
        row = step(traj[n], kernel, params, grid, V)
        if validate:
            if not np.all(np.isfinite(row)):
                j = int(np.argmax(~np.isfinite(row)))
                raise SolverError(f"non-finite state at step n={n + 1}, cell j={j}")
            if check_mp:
                bad = (row < -MAX_PRINCIPLE_TOL) | (row > params.q_max + MAX_PRINCIPLE_TOL)
                if np.any(bad):
                    j = int(np.argmax(bad))
                    raise SolverError(
                        f"max principle violated at n={n + 1}, j={j}: "
                        f"q={row[j]!r} outside [0, {params.q_max}]"
                    )
        traj[n + 1] = row
    return StateTrajectory(q=traj, grid=grid, kernel=kernel, params=params)


def mass(q_row: np.ndarray, grid: Grid) -> float:
    """Total discrete mass dx * sum_j q_j."""
    return grid.dx * float(np.sum(np.asarray(q_row, dtype=np.float64)))


def indicator_datum(grid: Grid, lo: float = 0.0, hi: float = 1.0,
                    height: float = 1.0) -> np.ndarray:
    """height * chi_[lo, hi] sampled at cell centers (closed interval)."""
    x = grid.centers
    return np.where((x >= lo) & (x <= hi), height, 0.0)
