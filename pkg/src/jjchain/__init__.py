"""Quantum state transfer through one-dimensional Josephson junction arrays.

Energies are in units of the nominal Josephson energy E_J and times in
units of 1/E_J (hbar = 1). Charges are in units of 2e and capacitances in
units of the ground capacitance C0.
"""

__version__ = "0.1.0"

from .electrostatics import CapacitanceModel, build_capacitance_model, interaction_range
from .hamiltonian import (
    ChainParams,
    ChargeSectorHamiltonian,
    DisorderSpec,
    build_hamiltonian,
    sample_disorder,
)
from .transfer import (
    FidelitySeries,
    PeakResult,
    PeakNotFoundError,
    fidelity_bloch_numeric,
    fidelity_closed_form,
    fidelity_series,
    find_first_above_threshold,
    find_first_maximum,
    transfer_amplitude,
)

__all__ = [
    "CapacitanceModel",
    "build_capacitance_model",
    "interaction_range",
    "ChainParams",
    "ChargeSectorHamiltonian",
    "DisorderSpec",
    "build_hamiltonian",
    "sample_disorder",
    "FidelitySeries",
    "PeakResult",
    "PeakNotFoundError",
    "fidelity_bloch_numeric",
    "fidelity_closed_form",
    "fidelity_series",
    "find_first_above_threshold",
    "find_first_maximum",
    "transfer_amplitude",
]
