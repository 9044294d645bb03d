"""Uniform space-time grid, exponential kernel weights, and scheme parameters.

The spatial interval is split into P+1 cells of width dx with states stored at
cell centers. The convolution kernel (1/eta)exp(-x/eta) is integrated over the
cells, which yields a geometric sequence of weights gamma_k; that structure is
what every fast evaluation path downstream relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "KernelWeights",
    "SchemeParams",
    "Velocity",
    "linear_velocity",
    "constant_velocity",
    "build_grid",
    "build_kernel",
    "scheme_params",
]


class MeshError(ValueError):
    """Raised for inconsistent grid or kernel construction requests."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform cells on [x_lo, x_hi] with centers x_j, plus the time grid.

    Cells are indexed j = 0..P; N time steps of size dt cover [0, T] exactly
    (dt is the representable rounding of T/N).
    """

    x_lo: float
    x_hi: float
    dx: float
    P: int
    centers: np.ndarray
    T: float
    dt: float
    N: int

    def __post_init__(self):
        object.__setattr__(self, "centers", _readonly(self.centers))

    @property
    def n_cells(self) -> int:
        return self.P + 1

    def to_dict(self) -> dict:
        return {
            "x_lo": self.x_lo,
            "x_hi": self.x_hi,
            "dx": self.dx,
            "T": self.T,
            "dt": self.dt,
        }


@dataclass(frozen=True)
class KernelWeights:
    """Cell-integrated exponential kernel weights.

    gamma[k] = exp(-k dx/eta) - exp(-(k+1) dx/eta), a geometric sequence with
    ratio r = exp(-dx/eta). tail_mass is the kernel mass beyond the grid,
    1 - sum(gamma).
    """

    eta: float
    gamma: np.ndarray
    ratio: float
    tail_mass: float

    def __post_init__(self):
        object.__setattr__(self, "gamma", _readonly(self.gamma))


@dataclass(frozen=True)
class Velocity:
    """Velocity closure V plus its derivative, both vectorized over numpy arrays."""

    v: Callable[[np.ndarray], np.ndarray]
    dv: Callable[[np.ndarray], np.ndarray]
    label: str = "custom"


def linear_velocity(intercept: float = 1.0, slope: float = -1.0) -> Velocity:
    """Affine velocity V(x) = intercept + slope*x (default 1 - x)."""
    return Velocity(
        v=lambda x: intercept + slope * np.asarray(x, dtype=np.float64),
        dv=lambda x: np.full_like(np.asarray(x, dtype=np.float64), slope),
        label=f"linear({intercept},{slope})",
    )


def constant_velocity(c: float = 1.0) -> Velocity:
    return Velocity(
        v=lambda x: np.full_like(np.asarray(x, dtype=np.float64), c),
        dv=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
        label=f"constant({c})",
    )


@dataclass(frozen=True)
class SchemeParams:
    """Artificial-diffusion coefficient and stability data for the explicit scheme.

    alpha is taken at its admissible lower bound
        alpha = v_inf + vp_inf * dx * (q_max + 1) / eta,
    where v_inf, vp_inf are sup norms of V, V' over [0, q_max + 1].
    """

    alpha: float
    q_max: float
    v_inf: float
    vp_inf: float
    cfl_safety: float
    dt_stable: float = field(default=math.nan)


def build_grid(x_lo: float, x_hi: float, dx: float, T: float,
               dt_hint: float = 1e-3) -> Grid:
    """Build the uniform grid; (x_hi - x_lo)/dx must be an integer to 1e-9.

    dt is chosen as T/ceil(T/dt_hint) so that N*dt lands on the horizon
    exactly. dt_hint >= T collapses to a single step.
    """
    if not (x_hi > x_lo):
        raise MeshError(f"need x_hi > x_lo, got [{x_lo}, {x_hi}]")
    if dx <= 0:
        raise MeshError(f"cell width must be positive, got dx={dx}")
    if T <= 0 or dt_hint <= 0:
        raise MeshError(f"need T > 0 and dt_hint > 0, got T={T}, dt_hint={dt_hint}")
    n_cells_f = (x_hi - x_lo) / dx
    n_cells = int(round(n_cells_f))
    if n_cells < 1 or abs(n_cells_f - n_cells) > 1e-9 * max(1.0, n_cells_f):
        raise MeshError(
            f"interval [{x_lo}, {x_hi}] is not commensurate with dx={dx} "
            f"((x_hi-x_lo)/dx = {n_cells_f})"
        )
    centers = x_lo + (np.arange(n_cells) + 0.5) * dx
    N = max(1, math.ceil(T / dt_hint - 1e-12))
    dt = T / N
    return Grid(x_lo=float(x_lo), x_hi=float(x_hi), dx=float(dx),
                P=n_cells - 1, centers=centers, T=float(T), dt=dt, N=N)


def build_kernel(grid: Grid, eta: float) -> KernelWeights:
    """Cell integrals of (1/eta)exp(-x/eta) for k = 0..P."""
    if eta <= 0:
        raise MeshError(f"kernel reach must be positive, got eta={eta}")
    ratio = math.exp(-grid.dx / eta)
    # The exact weights form a geometric sequence gamma_k = (1-r) r^k; the
    # cumulative product keeps the ratio identity to one rounding each,
    # whereas exp(-k dx/eta) drifts by ~k*eps for large k.
    powers = np.concatenate(([1.0], np.cumprod(np.full(grid.P, ratio))))
    gamma = (1.0 - ratio) * powers
    tail_mass = math.exp(-grid.n_cells * grid.dx / eta)
    return KernelWeights(eta=float(eta), gamma=gamma, ratio=ratio,
                         tail_mass=tail_mass)


def scheme_params(grid: Grid, kernel: KernelWeights, V: Velocity, q_max: float,
                  cfl_safety: float = 0.9,
                  n_samples: int = 20001) -> tuple[SchemeParams, Grid]:
    """Diffusion coefficient, sup norms, and the stability-respecting time step.

    v_inf and vp_inf are sup norms over [0, q_max+1] obtained by dense
    sampling. The returned grid carries the largest dt <= grid.dt satisfying
    dt <= cfl_safety * 2 dx / (2 alpha + vp_inf dx (q_max+1)/eta), re-snapped
    so that N*dt = T.
    """
    if q_max <= 0:
        raise MeshError(f"q_max must be positive, got {q_max}")
    if not (0 < cfl_safety <= 1):
        raise MeshError(f"cfl_safety must lie in (0, 1], got {cfl_safety}")
    xs = np.linspace(0.0, q_max + 1.0, n_samples)
    v_inf = float(np.max(np.abs(V.v(xs))))
    vp_inf = float(np.max(np.abs(V.dv(xs))))
    alpha = v_inf + vp_inf * grid.dx * (q_max + 1.0) / kernel.eta
    if not math.isfinite(alpha) or alpha <= 0:
        raise MeshError(f"diffusion coefficient is not admissible: alpha={alpha}")
    dt_stable = 2.0 * grid.dx / (
        2.0 * alpha + vp_inf * grid.dx * (q_max + 1.0) / kernel.eta
    )
    dt_target = min(grid.dt, cfl_safety * dt_stable)
    if dt_target <= 0:
        raise MeshError(f"admissible time step collapsed to {dt_target}")
    N = max(1, math.ceil(grid.T / dt_target - 1e-12))
    dt = grid.T / N
    adjusted = Grid(x_lo=grid.x_lo, x_hi=grid.x_hi, dx=grid.dx, P=grid.P,
                    centers=grid.centers, T=grid.T, dt=dt, N=N)
    params = SchemeParams(alpha=alpha, q_max=float(q_max), v_inf=v_inf,
                          vp_inf=vp_inf, cfl_safety=float(cfl_safety),
                          dt_stable=dt_stable)
    return params, adjusted
