"""Gate-voltage noise: correlated dephasing of the one-pair sector.

White gate-charge noise, filtered through the inverse capacitance matrix,
dephases the charge basis with the pairwise rate matrix
``D = (gamma/2) W @ W``. The master equation on the basis
``{vac, 1..L}`` is

    drho/dt = -i[H, rho] - sum_ij D_ij (P_i P_j rho - 2 P_i rho P_j + rho P_i P_j)

with ``P_i = |i><i|``. The vacuum carries no charge and no energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .electrostatics import CapacitanceModel
from .hamiltonian import ChargeSectorHamiltonian
from .integrate import StateDiagnostics, check_states, propagate, superoperator, time_grid
from .transfer import FidelitySeries, channel_fidelity

PSD_TOL = 1e-12


@dataclass(frozen=True)
class DephasingRates:
    gamma: float
    D: np.ndarray


def build_dephasing_rates(gamma: float, model: CapacitanceModel) -> DephasingRates:
    if not gamma >= 0:
        raise ValueError(f"gamma must be >= 0, got {gamma!r}")
    W = model.inverse
    D = 0.5 * gamma * (W @ W)
    D = 0.5 * (D + D.T)
    if np.linalg.eigvalsh(D)[0] < -PSD_TOL:
        raise ValueError("dephasing rate matrix is not positive semidefinite")
    D.setflags(write=False)
    return DephasingRates(gamma=float(gamma), D=D)


def bloch_state(L: int, theta: float, phi: float, extra_levels: int = 0) -> np.ndarray:
    """Density matrix of ``cos(theta/2)|vac> + e^{i phi} sin(theta/2)|1>``.

    ``extra_levels`` inserts empty levels between the vacuum and site 1
    (the readout basis carries one quasiparticle level there).
    """
    n = L + 1 + extra_levels
    psi = np.zeros(n, dtype=complex)
    psi[0] = np.cos(theta / 2)
    psi[1 + extra_levels] = np.exp(1j * phi) * np.sin(theta / 2)
    return np.outer(psi, psi.conj())


def _full_hamiltonian(H: ChargeSectorHamiltonian) -> np.ndarray:
    L = H.L
    Hf = np.zeros((L + 1, L + 1))
    Hf[1:, 1:] = H.H2
    return Hf


def dephasing_rhs(rho: np.ndarray, H: ChargeSectorHamiltonian, rates: DephasingRates) -> np.ndarray:
    L = H.L
    if rho.shape != (L + 1, L + 1) or rates.D.shape != (L, L):
        raise ValueError(f"dimension mismatch: rho {rho.shape}, H {H.H2.shape}, D {rates.D.shape}")
    Hf = _full_hamiltonian(H)
    # P_i P_j = delta_ij P_i, so the dissipator acts entrywise:
    # rho_ab -> (2 D_ab - D_aa - D_bb) rho_ab, with D = 0 on the vacuum row/column.
    Df = np.zeros((L + 1, L + 1))
    Df[1:, 1:] = rates.D
    d = np.diag(Df)
    factor = 2 * Df - d[:, None] - d[None, :]
    return -1j * (Hf @ rho - rho @ Hf) + factor * rho


def dephasing_generator(H: ChargeSectorHamiltonian, rates: DephasingRates) -> np.ndarray:
    return superoperator(lambda r: dephasing_rhs(r, H, rates), H.L + 1)


@dataclass(frozen=True)
class DephasingResult:
    times: np.ndarray
    states: np.ndarray
    series: Optional[FidelitySeries]
    diagnostics: StateDiagnostics

    @property
    def site_populations(self) -> np.ndarray:
        return np.real(np.einsum("kii->ki", self.states[:, 1:, 1:]))


def transfer_channel(states: np.ndarray, rho0: np.ndarray):
    """Pair population ``p`` and vacuum coherence ``g`` carried to site L.

    ``rho0`` must be a Bloch input (weight only on vac and site 1) with
    both components nonzero; the charge block and the vacuum coherences
    evolve independently, so normalising by the initial site-1 entries
    gives the channel for every other input.
    """
    rho11, rho1v = rho0[1, 1].real, rho0[1, 0]
    rest = rho0.copy()
    rest[[0, 0, 1, 1], [0, 1, 0, 1]] = 0
    if np.abs(rest).max() > 1e-14 or rho11 <= 1e-12 or abs(rho1v) <= 1e-12:
        raise ValueError("fidelity needs a Bloch input with weight on both vac and site 1 only")
    p = states[:, -1, -1].real / rho11
    g = states[:, -1, 0] / rho1v
    return p, g


def evolve_dephasing(
    rho0: np.ndarray,
    H: ChargeSectorHamiltonian,
    rates: DephasingRates,
    t_max: float,
    dt: float = 1e-3,
    dt_out: Optional[float] = 0.01,
    with_fidelity: bool = True,
) -> DephasingResult:
    """Integrate the dephasing master equation with fixed-step RK4.

    States are stored every ``dt_out`` and checked against the density-matrix
    tolerances; a violation raises :class:`NumericalError`. The fidelity
    series is the Bloch-sphere average over inputs of the channel defined
    by ``rho0`` (see :func:`transfer_channel`).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    stride, n_out = time_grid(t_max, dt, dt_out)
    states = propagate(rho0, dephasing_generator(H, rates), dt, n_out, stride)
    diagnostics = check_states(states)
    times = np.arange(n_out) * stride * dt
    series = None
    if with_fidelity:
        p, g = transfer_channel(states, rho0)
        series = FidelitySeries(times=times, amplitude=g, fidelity=channel_fidelity(p, g), population=p)
    return DephasingResult(times=times, states=states, series=series, diagnostics=diagnostics)


def stationary_fidelity(L: int) -> float:
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    return 0.5 + 1.0 / (6.0 * L)
