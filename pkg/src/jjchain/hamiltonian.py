"""Single-Cooper-pair sector Hamiltonian of the chain and static disorder.

Total charge is conserved, so the dynamics of an initial state
``cos(theta/2)|vac> + e^{i phi} sin(theta/2)|1>`` lives in the vacuum plus
the L states ``|j>`` carrying one excess pair on island j. The vacuum
energy is the zero of energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .electrostatics import CapacitanceModel, build_capacitance_model


@dataclass(frozen=True)
class ChainParams:
    """Model parameters of a chain of ``L`` islands.

    ``u0`` is the charging ratio (2e)^2 / (E_J C0). ``qx`` holds the gate
    charges in units of 2e, ``ej_bonds`` the L-1 Josephson energies in units
    of the nominal E_J. Both default to a clean chain.
    """

    L: int
    u0: float
    c_ratio: float = 0.0
    qx: Optional[Sequence[float]] = None
    ej_bonds: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not isinstance(self.L, (int, np.integer)) or self.L < 1:
            raise ValueError(f"L must be a positive integer (L >= 1), got {self.L!r}")
        if not math.isfinite(self.u0) or self.u0 < 0:
            raise ValueError(f"u0 must be finite and >= 0, got {self.u0!r}")
        if not math.isfinite(self.c_ratio) or self.c_ratio < 0:
            raise ValueError(f"c_ratio must be finite and >= 0, got {self.c_ratio!r}")
        qx = np.zeros(self.L) if self.qx is None else np.array(self.qx, dtype=float)
        ej = np.ones(self.L - 1) if self.ej_bonds is None else np.array(self.ej_bonds, dtype=float)
        if qx.shape != (self.L,):
            raise ValueError(f"qx must have length L={self.L}, got shape {qx.shape}")
        if ej.shape != (self.L - 1,):
            raise ValueError(f"ej_bonds must have length L-1={self.L - 1}, got shape {ej.shape}")
        if not np.all(np.isfinite(qx)):
            raise ValueError("qx entries must be finite")
        if not np.all(np.isfinite(ej)) or np.any(ej <= 0):
            raise ValueError("ej_bonds entries must be finite and strictly positive")
        qx.setflags(write=False)
        ej.setflags(write=False)
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "u0", float(self.u0))
        object.__setattr__(self, "c_ratio", float(self.c_ratio))
        object.__setattr__(self, "qx", qx)
        object.__setattr__(self, "ej_bonds", ej)

    def capacitance(self) -> CapacitanceModel:
        return build_capacitance_model(self.L, self.c_ratio)

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "u0": self.u0,
            "c_ratio": self.c_ratio,
            "qx": [float(x) for x in self.qx],
            "ej_bonds": [float(x) for x in self.ej_bonds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChainParams":
        return cls(**d)

    def __eq__(self, other):
        if not isinstance(other, ChainParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.L, self.u0, self.c_ratio, tuple(self.qx), tuple(self.ej_bonds)))


@dataclass(frozen=True)
class ChargeSectorHamiltonian:
    """Hamiltonian restricted to the one-pair sector, vacuum energy 0.

    The eigendecomposition is computed lazily and cached; instances are
    immutable and can be shared between threads.
    """

    H2: np.ndarray
    vacuum_energy: float = 0.0
    _eig: list = field(default_factory=list, repr=False, compare=False)

    @property
    def L(self) -> int:
        return self.H2.shape[0]

    def eigh(self):
        if not self._eig:
            if not np.all(np.isfinite(self.H2)):
                raise np.linalg.LinAlgError("Hamiltonian has non-finite entries")
            self._eig.append(np.linalg.eigh(self.H2))
        return self._eig[0]

    def disconnected(self) -> "ChargeSectorHamiltonian":
        """Copy with the last bond (L-1, L) cut."""
        H = self.H2.copy()
        if self.L > 1:
            H[-1, -2] = H[-2, -1] = 0.0
        H.setflags(write=False)
        return ChargeSectorHamiltonian(H)


def build_hamiltonian(params: ChainParams, model: Optional[CapacitanceModel] = None) -> ChargeSectorHamiltonian:
    """Assemble the L x L one-pair Hamiltonian in units of E_J.

    Diagonal: ``(u0/2) (W_jj - 2 sum_i W_ij qx_i)``; hopping ``-ej/2``.
    """
    if model is None:
        model = params.capacitance()
    if model.length != params.L or model.c_ratio != params.c_ratio:
        raise ValueError(
            f"capacitance model (L={model.length}, c_ratio={model.c_ratio}) does not match "
            f"params (L={params.L}, c_ratio={params.c_ratio})"
        )
    W = model.inverse
    diag = 0.5 * params.u0 * (np.diag(W) - 2.0 * W @ params.qx)
    H = np.diag(diag)
    idx = np.arange(params.L - 1)
    H[idx, idx + 1] = -0.5 * params.ej_bonds
    H[idx + 1, idx] = -0.5 * params.ej_bonds
    H.setflags(write=False)
    return ChargeSectorHamiltonian(H)


@dataclass(frozen=True)
class DisorderSpec:
    """Gaussian static disorder.

    ``bond_sigma`` is the relative spread of the Josephson energies and
    ``charge_sigma`` the absolute spread of gate charges (units of 2e).
    """

    bond_sigma: float = 0.0
    charge_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("bond_sigma", "charge_sigma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


def realization_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Stable per-realization seed, independent of scheduling order."""
    return np.random.SeedSequence([int(master_seed), int(index)])


def sample_disorder(spec: DisorderSpec, base: ChainParams, realization_index: int) -> ChainParams:
    if realization_index < 0:
        raise ValueError("realization_index must be >= 0")
    if spec.bond_sigma == 0 and spec.charge_sigma == 0:
        return base
    bond_ss, charge_ss = realization_seed(spec.seed, realization_index).spawn(2)
    # separate streams so that bond redraws never shift the charge draws
    bond_rng = np.random.default_rng(bond_ss)
    charge_rng = np.random.default_rng(charge_ss)

    ej = np.array(base.ej_bonds, dtype=float)
    if spec.bond_sigma > 0:
        factor = 1.0 + spec.bond_sigma * bond_rng.standard_normal(ej.shape)
        bad = factor <= 0
        while np.any(bad):
            factor[bad] = 1.0 + spec.bond_sigma * bond_rng.standard_normal(int(bad.sum()))
            bad = factor <= 0
        ej = ej * factor
    qx = np.array(base.qx, dtype=float)
    if spec.charge_sigma > 0:
        qx = qx + spec.charge_sigma * charge_rng.standard_normal(qx.shape)
    return replace(base, qx=qx, ej_bonds=ej)
