"""Tracking targets and the two terminal-time tracking objectives.

J_q penalizes the terminal state directly,

    J_q = (dx/2) sum_j (q_j^N - q_d(x_j))^2,

J_W penalizes its downstream convolution,

    J_W = (dx/2) sum_j (W_j[q^N] - W_j[q_d])^2.

Both expose their exact partial derivative with respect to the terminal row,
which seeds the backward adjoint sweep.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .convolution import nonlocal_fast
from .forward import Control, indicator_datum, solve_forward
from .mesh import Grid, KernelWeights, SchemeParams, Velocity

__all__ = [
    "Target",
    "ObjectiveSpec",
    "make_target",
    "load_custom_target",
    "eval_objective",
    "terminal_adjoint",
]

TARGET_KINDS = ("indicator", "nonlocal_solution", "ramp", "custom_csv")
OBJECTIVE_KINDS = ("J_W", "J_q")

# Terminal rows of the reference forward solve, keyed by configuration hash.
_nonlocal_target_cache: dict[str, np.ndarray] = {}


@dataclass(frozen=True)
class Target:
    kind: str
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError("target contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    target: Target
    kernel: KernelWeights | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == "J_W" and self.kernel is None:
            raise ValueError("J_W needs kernel weights")


def _config_hash(grid: Grid, kernel: KernelWeights, params: SchemeParams) -> str:
    key = (f"{grid.x_lo!r}|{grid.x_hi!r}|{grid.dx!r}|{grid.T!r}|{grid.dt!r}|"
           f"{kernel.eta!r}|{params.alpha!r}|{params.q_max!r}")
    return hashlib.sha256(key.encode()).hexdigest()


def make_target(kind: str, grid: Grid, kernel: KernelWeights | None = None,
                params: SchemeParams | None = None,
                V: Velocity | None = None) -> Target:
    """Build one of the canonical tracking profiles on the grid.

    indicator:          chi_[0,1](x_j)
    ramp:               (1 - x_j) chi_[0,1](x_j)
    nonlocal_solution:  terminal row of the forward solve started from
                        chi_[0,1] (depends on kernel reach and bounds, so the
                        result is cached per configuration hash).
    """
    x = grid.centers
    if kind == "indicator":
        return Target(kind, indicator_datum(grid))
    if kind == "ramp":
        return Target(kind, (1.0 - x) * indicator_datum(grid))
    if kind == "nonlocal_solution":
        if kernel is None or params is None or V is None:
            raise ValueError("nonlocal_solution target needs kernel, params, V")
        key = _config_hash(grid, kernel, params)
        if key not in _nonlocal_target_cache:
            ctrl = Control(q0=indicator_datum(grid), lower=0.0, upper=params.q_max)
            traj = solve_forward(ctrl, grid, kernel, params, V)
            _nonlocal_target_cache[key] = traj.terminal.copy()
        return Target(kind, _nonlocal_target_cache[key])
    raise ValueError(f"unknown target kind {kind!r}")


def load_custom_target(path: str | Path, grid: Grid) -> Target:
    """One value per line, optional non-numeric header line."""
    lines = Path(path).read_text().strip().splitlines()
    try:
        float(lines[0])
    except ValueError:
        lines = lines[1:]
    values = np.array([float(s) for s in lines])
    if values.shape[0] != grid.n_cells:
        raise ValueError(
            f"custom target has {values.shape[0]} rows, grid has "
            f"{grid.n_cells} cells"
        )
    return Target("custom_csv", values)


def eval_objective(spec: ObjectiveSpec, terminal_row: np.ndarray,
                   grid: Grid) -> float:
    q = np.asarray(terminal_row, dtype=np.float64)
    if q.shape != spec.target.values.shape:
        raise ValueError("terminal row and target have different shapes")
    if spec.kind == "J_q":
        d = q - spec.target.values
    else:
        d = (nonlocal_fast(q, spec.kernel)
             - nonlocal_fast(spec.target.values, spec.kernel))
    return 0.5 * grid.dx * float(np.dot(d, d))


def terminal_adjoint(spec: ObjectiveSpec, terminal_row: np.ndarray,
                     grid: Grid) -> np.ndarray:
    """Exact gradient of the objective with respect to the terminal row.

    For J_W the chain rule through the convolution gives
    dx * sum_{i<=j} gamma_{j-i} (W_i[q^N] - W_i[q_d]), evaluated in O(P) by
    the forward geometric recursion E_j = r E_{j-1} + gamma_0 D_j.
    """
    q = np.asarray(terminal_row, dtype=np.float64)
    if q.shape != spec.target.values.shape:
        raise ValueError("terminal row and target have different shapes")
    if spec.kind == "J_q":
        return grid.dx * (q - spec.target.values)
    kernel = spec.kernel
    D = (nonlocal_fast(q, kernel)
         - nonlocal_fast(spec.target.values, kernel))
    E = lfilter([kernel.gamma[0]], [1.0, -kernel.ratio], D)
    return grid.dx * E
