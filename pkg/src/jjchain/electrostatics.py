"""Capacitance matrix of an open chain of islands and its inverse.

Each island couples to its neighbours through a junction capacitance C and
to ground through C0. Everything is expressed in units of C0, so the only
input is the ratio ``c_ratio = C / C0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la


@dataclass(frozen=True)
class CapacitanceModel:
    length: int
    c_ratio: float
    matrix: np.ndarray
    inverse: np.ndarray


def capacitance_matrix(L: int, c_ratio: float) -> np.ndarray:
    """Tridiagonal capacitance matrix in units of C0 (open boundaries)."""
    neighbours = np.full(L, 2.0)
    neighbours[0] -= 1.0
    neighbours[-1] -= 1.0
    if L == 1:
        neighbours[0] = 0.0
    M = np.diag(1.0 + neighbours * c_ratio)
    idx = np.arange(L - 1)
    M[idx, idx + 1] = -c_ratio
    M[idx + 1, idx] = -c_ratio
    return M


def build_capacitance_model(L: int, c_ratio: float) -> CapacitanceModel:
    if not isinstance(L, (int, np.integer)) or L < 1:
        raise ValueError(f"L must be a positive integer (L >= 1), got {L!r}")
    c_ratio = float(c_ratio)
    if not math.isfinite(c_ratio) or c_ratio < 0:
        raise ValueError(f"c_ratio must be finite and >= 0, got {c_ratio!r}")

    M = capacitance_matrix(int(L), c_ratio)
    if c_ratio == 0.0:
        W = np.eye(L)
    else:
        # Cholesky solve; M is symmetric positive definite.
        W = la.cho_solve(la.cho_factor(M), np.eye(L))
        W = 0.5 * (W + W.T)
    M.setflags(write=False)
    W.setflags(write=False)
    return CapacitanceModel(length=int(L), c_ratio=c_ratio, matrix=M, inverse=W)


def interaction_range(model: CapacitanceModel) -> float:
    """Decay length of the screened interaction, in lattice spacings.

    Fits ``log W[mid, mid + k]`` linearly in ``k`` over the interior half of
    the chain to the right of the central island, so that the reflection off
    the open end barely biases the slope.
    """
    if model.c_ratio <= 0:
        raise ValueError("interaction range is undefined for c_ratio = 0 (on-site only)")
    L = model.length
    if L < 5:
        raise ValueError(f"need L >= 5 for a range fit, got L={L}")
    mid = (L - 1) // 2
    kmax = max(3, (L - 1 - mid) // 2)
    k = np.arange(1, kmax + 1)
    row = model.inverse[mid, mid + k]
    slope, _ = np.polyfit(k, np.log(np.abs(row)), 1)
    return -1.0 / slope
