"""Backward sweep producing the exact gradient of the discrete objective.

The forward scheme is an explicit map q^n -> q^{n+1}; differentiating it and
transposing gives a backward recursion for p^n = dG/dq^n whose row 0 is the
gradient with respect to the initial datum. Two implementations are kept:

* solve_adjoint          -- O(P) per row; the two kernel-weighted sums are
                            geometric convolutions and collapse to first-order
                            recursions (evaluated with lfilter).
* solve_adjoint_reference -- literal loop transcription of the per-cell case
                            formulas (j = 0, 1, P-1, P, interior), O(P^2) per
                            row; retained as the test oracle.

Finite differences of the composed map q0 -> G(forward(q0)) arbitrate both.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .convolution import nonlocal_fast
from .forward import Control, StateTrajectory, solve_forward
from .mesh import Grid, KernelWeights, SchemeParams, Velocity
from .objectives import ObjectiveSpec, eval_objective, terminal_adjoint

__all__ = [
    "AdjointTrajectory",
    "GradientReport",
    "solve_adjoint",
    "solve_adjoint_reference",
    "gradient",
]


@dataclass(frozen=True)
class AdjointTrajectory:
    p: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.p, dtype=np.float64)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def grad_q0(self) -> np.ndarray:
        return self.p[0]


@dataclass(frozen=True)
class GradientReport:
    gradient: np.ndarray
    objective: float
    fd_gradient: np.ndarray | None = None
    checked_indices: list[int] = field(default_factory=list)
    max_rel_err: float = float("nan")


def _backward_row(p1: np.ndarray, qn: np.ndarray, grid: Grid,
                  kernel: KernelWeights, params: SchemeParams,
                  V: Velocity) -> np.ndarray:
    """One backward level: p^n from p^{n+1} and the stored state row q^n."""
    P = grid.P
    lam = grid.dt / (2.0 * grid.dx)
    lam_a = params.alpha * lam
    g0 = kernel.gamma[0]
    r = kernel.ratio

    W = nonlocal_fast(qn, kernel)
    vW = V.v(W)
    vpW = V.dv(W)

    # A_j = sum_{l<=min(j,P-2)} q_l V'(W_l) gamma_{j-l} p1_{l+1}
    c = np.zeros(P + 1)
    c[: P - 1] = qn[: P - 1] * vpW[: P - 1] * p1[1:P]
    A = lfilter([g0], [1.0, -r], c)
    # B_j = sum_{l<=min(j-2,P-2)} q_{l+2} V'(W_{l+2}) gamma_{j-2-l} p1_{l+1}
    d = np.zeros(P + 1)
    d[: P - 1] = qn[2: P + 1] * vpW[2: P + 1] * p1[1:P]
    B = np.zeros(P + 1)
    B[2:] = lfilter([g0], [1.0, -r], d)[: P - 1]

    p = np.empty(P + 1)
    p[2: P - 1] = (
        p1[2: P - 1]
        + lam_a * (p1[1: P - 2] - 2.0 * p1[2: P - 1] + p1[3:P])
        + lam * vW[2: P - 1] * (p1[3:P] - p1[1: P - 2])
        + lam * (A[2: P - 1] - B[2: P - 1])
    )
    p[0] = lam_a * p1[1] + lam * vW[0] * p1[1] + lam * A[0]
    p[1] = (p1[1] + lam_a * (-2.0 * p1[1] + p1[2]) + lam * vW[1] * p1[2]
            + lam * A[1])
    p[P - 1] = (p1[P - 1] + lam_a * (p1[P - 2] - 2.0 * p1[P - 1])
                - lam * vW[P - 1] * p1[P - 2]
                + lam * (A[P - 1] - B[P - 1]))
    p[P] = (lam_a * p1[P - 1] - lam * vW[P] * p1[P - 1]
            + lam * (A[P] - B[P]))
    return p


def solve_adjoint(traj: StateTrajectory, spec: ObjectiveSpec, grid: Grid,
                  kernel: KernelWeights, params: SchemeParams,
                  V: Velocity) -> AdjointTrajectory:
    """Full backward sweep from the terminal condition down to level 0."""
    if grid.P < 4:
        raise ValueError("adjoint sweep needs at least 5 cells")
    if traj.q.shape != (grid.N + 1, grid.n_cells):
        raise ValueError("trajectory shape does not match the grid")
    p = np.empty_like(traj.q)
    p[grid.N] = terminal_adjoint(spec, traj.q[grid.N], grid)
    for n in range(grid.N - 1, -1, -1):
        row = _backward_row(p[n + 1], traj.q[n], grid, kernel, params, V)
        if not np.all(np.isfinite(row)):
            j = int(np.argmax(~np.isfinite(row)))
            raise RuntimeError(f"non-finite adjoint value at n={n}, j={j}")
        p[n] = row
    return AdjointTrajectory(p=p)


def _backward_row_reference(p1: np.ndarray, qn: np.ndarray, grid: Grid,
                            kernel: KernelWeights, params: SchemeParams,
                            V: Velocity) -> np.ndarray:
    """Loop transcription of the per-cell case formulas; test oracle only.

    Sum limits that would address a state index beyond P are clamped, matching
    the forward scheme's zero ghost cells.
    """
    P = grid.P
    gamma = kernel.gamma
    lam = grid.dt / (2.0 * grid.dx)
    lam_a = params.alpha * lam
    v, dv = (lambda s: float(V.v(np.float64(s)))), (lambda s: float(V.dv(np.float64(s))))

    def S(l: int, m: int, rr: int) -> float:
        m = min(m, P - rr, P)
        return float(sum(gamma[k] * qn[k + rr] for k in range(l, m + 1)))

    p = np.empty(P + 1)
    p[0] = (lam_a * p1[1] + lam * v(S(0, P, 0)) * p1[1]
            + lam * dv(S(0, P, 0)) * gamma[0] * qn[0] * p1[1])
    p[1] = (p1[1] + lam_a * (-2.0 * p1[1] + p1[2]) + lam * v(S(0, P - 1, 1)) * p1[2]
            + lam * sum(qn[l] * dv(S(0, P - l, l)) * gamma[1 - l] * p1[l + 1]
                        for l in range(0, 2)))
    for j in range(2, P - 1):
        p[j] = (p1[j] + lam_a * (p1[j - 1] - 2.0 * p1[j] + p1[j + 1])
                + lam * v(S(0, P - j, j)) * (p1[j + 1] - p1[j - 1])
                + lam * (sum(qn[l] * dv(S(0, P - l, l)) * gamma[j - l] * p1[l + 1]
                             for l in range(0, j + 1) if l + 1 <= P - 1)
                         - sum(qn[2 + l] * dv(S(0, P - l - 2, 2 + l))
                               * gamma[j - 2 - l] * p1[l + 1]
                               for l in range(0, j - 1))))
    p[P - 1] = (p1[P - 1] + lam_a * (p1[P - 2] - 2.0 * p1[P - 1])
                - lam * v(S(0, 1, P - 1)) * p1[P - 2]
                + lam * (sum(qn[l] * dv(S(0, P - l, l)) * gamma[P - 1 - l] * p1[l + 1]
                             for l in range(0, P - 1))
                         - sum(qn[2 + l] * dv(S(0, P - l - 2, 2 + l))
                               * gamma[P - 3 - l] * p1[l + 1]
                               for l in range(0, P - 2))))
    p[P] = (lam_a * p1[P - 1] - lam * v(S(0, 0, P)) * p1[P - 1]
            + lam * (sum(qn[l] * dv(S(0, P - l, l)) * gamma[P - l] * p1[l + 1]
                         for l in range(0, P - 1))
                     - sum(qn[2 + l] * dv(S(0, P - l - 2, 2 + l))
                           * gamma[P - 2 - l] * p1[l + 1]
                           for l in range(0, P - 1))))
    return p


def solve_adjoint_reference(traj: StateTrajectory, spec: ObjectiveSpec,
                            grid: Grid, kernel: KernelWeights,
                            params: SchemeParams, V: Velocity) -> AdjointTrajectory:
    p = np.empty_like(traj.q)
    p[grid.N] = terminal_adjoint(spec, traj.q[grid.N], grid)
    for n in range(grid.N - 1, -1, -1):
        p[n] = _backward_row_reference(p[n + 1], traj.q[n], grid, kernel,
                                       params, V)
    return AdjointTrajectory(p=p)


def composed_objective(q0: np.ndarray, spec: ObjectiveSpec, grid: Grid,
                       kernel: KernelWeights, params: SchemeParams,
                       V: Velocity, upper: float | None = None) -> float:
    """G(forward(q0)); used by line search and finite-difference checks."""
    ctrl = Control(q0=q0, lower=0.0,
                   upper=params.q_max if upper is None else upper)
    traj = solve_forward(ctrl, grid, kernel, params, V, validate=False)
    return eval_objective(spec, traj.terminal, grid)


def fd_gradient(q0: np.ndarray, spec: ObjectiveSpec, grid: Grid,
                kernel: KernelWeights, params: SchemeParams, V: Velocity,
                indices: np.ndarray, base_step: float = 1e-6) -> np.ndarray:
    """Central finite differences of the composed map at selected coordinates."""
    out = np.empty(len(indices))
    for i, j in enumerate(indices):
        h = base_step * max(1.0, abs(q0[j]))
        qp = q0.copy()
        qp[j] += h
        qm = q0.copy()
        qm[j] -= h
        fp = composed_objective(qp, spec, grid, kernel, params, V)
        fm = composed_objective(qm, spec, grid, kernel, params, V)
        out[i] = (fp - fm) / (2.0 * h)
    return out


def gradient(control: Control, spec: ObjectiveSpec, grid: Grid,
             kernel: KernelWeights, params: SchemeParams, V: Velocity,
             fd_indices: np.ndarray | None = None,
             validate: bool = False) -> GradientReport:
    """Forward solve, backward sweep, and optional finite-difference audit."""
    traj = solve_forward(control, grid, kernel, params, V, validate=validate)
    adj = solve_adjoint(traj, spec, grid, kernel, params, V)
    g = adj.grad_q0.copy()
    obj = eval_objective(spec, traj.terminal, grid)
    if fd_indices is None:
        return GradientReport(gradient=g, objective=obj)
    idx = np.asarray(fd_indices, dtype=int)
    fd = fd_gradient(control.q0, spec, grid, kernel, params, V, idx)
    rel = np.abs(g[idx] - fd) / np.maximum(np.abs(fd), 1e-12)
    return GradientReport(gradient=g, objective=obj, fd_gradient=fd,
                          checked_indices=[int(i) for i in idx],
                          max_rel_err=float(np.max(rel)))
