"""Fixed-step classical RK4 for linear density-matrix equations.

The generators used here are time independent and linear, so one RK4 step
is a fixed matrix ``S = sum_k (h L)^k / k!, k <= 4`` acting on the
row-major vectorised density matrix. Output every ``stride`` steps uses
``S**stride``; the iterates are the RK4 iterates up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
POSITIVITY_TOL = -1e-9


class NumericalError(RuntimeError):
    """Integration produced a state outside the density-matrix tolerances."""


def superoperator(rhs: Callable[[np.ndarray], np.ndarray], n: int) -> np.ndarray:
    """Matrix of a linear map on n x n matrices, acting on ``rho.ravel()``."""
    S = np.empty((n * n, n * n), dtype=complex)
    E = np.zeros((n, n), dtype=complex)
    for k in range(n * n):
        E.flat[k] = 1.0
        S[:, k] = rhs(E).ravel()
        E.flat[k] = 0.0
    return S


def rk4_step_matrix(generator: np.ndarray, dt: float) -> np.ndarray:
    hL = dt * generator
    out = np.eye(len(generator), dtype=complex)
    term = out
    for k in range(1, 5):
        term = term @ hL / k
        out = out + term
    return out


def propagate(rho0: np.ndarray, generator: np.ndarray, dt: float, n_out: int, stride: int = 1) -> np.ndarray:
    """RK4 states at steps ``0, stride, 2*stride, ...``; shape ``(n_out, n, n)``."""
    n = rho0.shape[0]
    step = np.linalg.matrix_power(rk4_step_matrix(generator, dt), stride)
    out = np.empty((n_out, n * n), dtype=complex)
    v = np.asarray(rho0, dtype=complex).ravel().copy()
    out[0] = v
    for k in range(1, n_out):
        v = step @ v
        out[k] = v
    return out.reshape(n_out, n, n)


def time_grid(t_max: float, dt: float, dt_out: float | None):
    """Step count per output and number of outputs for ``[0, t_max]``."""
    if t_max <= 0 or dt <= 0:
        raise ValueError(f"t_max and dt must be positive, got t_max={t_max}, dt={dt}")
    dt_out = dt if dt_out is None else dt_out
    stride = max(1, int(round(dt_out / dt)))
    n_out = int(round(t_max / (stride * dt))) + 1
    return stride, n_out


@dataclass(frozen=True)
class StateDiagnostics:
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray

    def worst(self) -> dict:
        return {
            "trace_error": float(self.trace_error.max()),
            "hermiticity_error": float(self.hermiticity_error.max()),
            "min_eigenvalue": float(self.min_eigenvalue.min()),
        }

    def ok(self) -> bool:
        w = self.worst()
        return (
            w["trace_error"] <= TRACE_TOL
            and w["hermiticity_error"] <= HERMITIAN_TOL
            and w["min_eigenvalue"] >= POSITIVITY_TOL
        )


def diagnose(states: np.ndarray) -> StateDiagnostics:
    """Trace, Hermiticity and positivity errors for a stack of density matrices."""
    states = np.asarray(states)
    tr = np.abs(np.einsum("kii->k", states) - 1.0)
    herm = np.abs(states - np.conj(np.swapaxes(states, -1, -2))).max(axis=(-1, -2))
    sym = 0.5 * (states + np.conj(np.swapaxes(states, -1, -2)))
    mins = np.linalg.eigvalsh(sym)[:, 0]
    return StateDiagnostics(tr, herm, mins)


def check_states(states: np.ndarray) -> StateDiagnostics:
    diag = diagnose(states)
    if not diag.ok():
        raise NumericalError(f"density-matrix invariants violated: {diag.worst()}; reduce dt")
    return diag
