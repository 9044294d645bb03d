"""Projected gradient descent with Armijo backtracking on the initial datum.

The iterate is clamped to the box [0, q_max] after every trial step, and the
sufficient-decrease test is evaluated at the projected trial point so that it
stays meaningful when constraints are active:

    G(trial) <= G(q) - armijo_c * <g, q - trial>.

Stationarity is measured by ||q - project(q - g)||, not the raw gradient norm.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .adjoint import composed_objective, gradient
from .forward import Control
from .mesh import Grid, KernelWeights, SchemeParams, Velocity
from .objectives import ObjectiveSpec

__all__ = ["OptimizerConfig", "IterationLog", "project", "optimize"]


@dataclass(frozen=True)
class OptimizerConfig:
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    max_iters: int = 2000
    grad_tol: float | None = None  # default 1e-8 * sqrt(n_cells)
    obj_tol: float = 1e-12
    obj_tol_window: int = 5
    max_backtracks: int = 50
    # Start each line search from the previous accepted step grown by
    # 1/backtrack_factor. A fixed unit step stalls on objectives whose
    # curvature scales with dx; growth keeps the search scale-adaptive.
    step_warm_start: bool = True

    def __post_init__(self):
        if not (0 < self.armijo_c < 1):
            raise ValueError("armijo_c must lie in (0, 1)")
        if not (0 < self.backtrack_factor < 1):
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")


@dataclass
class IterationLog:
    records: list[dict] = field(default_factory=list)
    status: str = "running"
    csv_path: Path | None = None
    _writer: object = None

    def append(self, **rec):
        self.records.append(rec)
        if self.csv_path is not None:
            new = self._writer is None
            if new:
                self._fh = open(self.csv_path, "w", newline="")
                self._writer = csv.DictWriter(self._fh, fieldnames=list(rec))
                self._writer.writeheader()
            self._writer.writerow(
                {k: (f"{v:.17g}" if isinstance(v, float) else v)
                 for k, v in rec.items()})
            self._fh.flush()

    def close(self):
        if self._writer is not None:
            self._fh.close()
            self._writer = None

    @property
    def objectives(self) -> list[float]:
        return [r["objective"] for r in self.records]


def project(v: np.ndarray, lower: float, upper: float) -> np.ndarray:
    """Componentwise clamp to [lower, upper]."""
    if lower > upper:
        raise ValueError(f"empty box [{lower}, {upper}]")
    return np.clip(v, lower, upper)


def optimize(spec: ObjectiveSpec, config: OptimizerConfig, grid: Grid,
             kernel: KernelWeights, params: SchemeParams, V: Velocity,
             q0_init: Control | None = None,
             objective_fn: Callable[[np.ndarray], float] | None = None,
             gradient_fn: Callable[[np.ndarray], np.ndarray] | None = None,
             log_csv: Path | None = None) -> tuple[Control, IterationLog]:
    """Minimize the tracking objective over box-feasible initial data.

    objective_fn / gradient_fn default to the PDE-constrained composed map and
    its adjoint gradient; tests may swap in a plain quadratic harness.
    """
    lower, upper = 0.0, params.q_max
    if q0_init is None:
        q = np.zeros(grid.n_cells)
    else:
        if not q0_init.is_feasible():
            raise ValueError("initial control violates its box constraint")
        q = q0_init.q0.copy()

    if objective_fn is None:
        objective_fn = lambda x: composed_objective(x, spec, grid, kernel,
                                                    params, V)
    if gradient_fn is None:
        gradient_fn = lambda x: gradient(
            Control(q0=x, lower=lower, upper=upper), spec, grid, kernel,
            params, V).gradient

    grad_tol = (config.grad_tol if config.grad_tol is not None
                else 1e-8 * np.sqrt(grid.n_cells))
    log = IterationLog(csv_path=log_csv)
    t0 = time.perf_counter()
    obj = objective_fn(q)
    best_q, best_obj = q.copy(), obj

    g = gradient_fn(q)
    pg_norm = float(np.linalg.norm(q - project(q - g, lower, upper)))
    log.append(iter=0, objective=float(obj), step=0.0, backtracks=0,
               projected_grad_norm=pg_norm,
               wall_time=time.perf_counter() - t0)

    s_start = config.initial_step
    for it in range(1, config.max_iters + 1):
        if pg_norm <= grad_tol:
            log.status = "converged:grad_tol"
            break

        s = s_start
        accepted = False
        for bt in range(config.max_backtracks + 1):
            trial = project(q - s * g, lower, upper)
            trial_obj = objective_fn(trial)
            decrease = float(np.dot(g, q - trial))
            if (decrease > 0 and trial_obj < obj
                    and trial_obj <= obj - config.armijo_c * decrease):
                q, obj = trial, trial_obj
                accepted = True
                break
            s *= config.backtrack_factor
        if not accepted:
            log.status = ("no descent direction at initial point" if it == 1
                          else "stopped:line_search_failure")
            break
        if config.step_warm_start:
            s_start = s / config.backtrack_factor
        if obj < best_obj:
            best_obj, best_q = obj, q.copy()

        g = gradient_fn(q)
        pg_norm = float(np.linalg.norm(q - project(q - g, lower, upper)))
        log.append(iter=it, objective=float(obj), step=s, backtracks=bt,
                   projected_grad_norm=pg_norm,
                   wall_time=time.perf_counter() - t0)

        w = config.obj_tol_window
        objs = log.objectives
        if len(objs) > w and objs[-w - 1] > 0:
            if (objs[-w - 1] - objs[-1]) / objs[-w - 1] < config.obj_tol:
                log.status = "converged:obj_tol"
                break

    if log.status == "running":
        if pg_norm <= grad_tol:
            log.status = "converged:grad_tol"
        else:
            log.status = "stopped:max_iters"
    log.close()
    return Control(q0=best_q, lower=lower, upper=upper), log
