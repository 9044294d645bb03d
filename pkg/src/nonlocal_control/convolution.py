"""One-sided discrete convolution with the cell-integrated exponential kernel.

W_j = sum_{k=0}^{P-j} gamma_k * q_{j+k} weights the cells downstream of j.
Two evaluation paths are kept on purpose: the direct double sum is the test
oracle, the backward geometric recursion is the O(P) production path.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .mesh import KernelWeights

__all__ = ["nonlocal_direct", "nonlocal_fast"]


def _check_row(q_row: np.ndarray, kernel: KernelWeights) -> np.ndarray:
    q = np.asarray(q_row, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != kernel.gamma.shape[0]:
        raise ValueError(
            f"state row has shape {q.shape}, kernel expects length "
            f"{kernel.gamma.shape[0]}"
        )
    return q


def nonlocal_direct(q_row: np.ndarray, kernel: KernelWeights) -> np.ndarray:
    """Direct summation, increasing k; O(P^2)."""
    q = _check_row(q_row, kernel)
    n = q.shape[0]
    gamma = kernel.gamma
    out = np.empty(n)
    for j in range(n):
        out[j] = float(np.dot(gamma[: n - j], q[j:]))
    return out


def nonlocal_fast(q_row: np.ndarray, kernel: KernelWeights) -> np.ndarray:
    """Backward recursion W_j = gamma_0 q_j + r W_{j+1}; O(P)."""
    q = _check_row(q_row, kernel)
    # lfilter realizes y_i = gamma_0 x_i + r y_{i-1} on the reversed row.
    y = lfilter([kernel.gamma[0]], [1.0, -kernel.ratio], q[::-1])
    return y[::-1]
