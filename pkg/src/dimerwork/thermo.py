"""Gibbs states, populations and spectral gaps for 4x4 Hamiltonians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError, HermitianOperator

KT_PRESETS = (0.2, 2.0, 20.0)


@dataclass(frozen=True)
class ThermalState:
    """Gibbs state exp(-H/kT)/Z with populations ordered by ascending energy.

    `log_z` is log(Tr exp(-H/kT)) and stays finite where Z itself would
    overflow; `Z` is the exponentiated convenience view.  At kT = 0 (the
    ground-state constructor) the partition function is undefined and
    log_z is NaN.
    """

    rho: HermitianOperator
    kT: float
    log_z: float
    populations: np.ndarray

    @property
    def Z(self) -> float:
        return float(np.exp(self.log_z))


def boltzmann_populations(energies: np.ndarray, kT: float) -> tuple[np.ndarray, float]:
    """Populations and log Z, with the spectrum shifted by E0 for stability."""
    e = np.asarray(energies, dtype=float)
    shifted = e - e[0]
    weights = np.exp(-shifted / kT)
    z_shifted = weights.sum()
    log_z = float(np.log(z_shifted) - e[0] / kT)
    return weights / z_shifted, log_z


def thermal_state(H: HermitianOperator, kT: float) -> ThermalState:
    """Gibbs state of H at temperature kT > 0."""
    if kT <= 0:
        raise DomainError(f"kT must be positive, got {kT} (use ground_state for T=0)")
    pops, log_z = boltzmann_populations(H.eigenvalues, kT)
    v = H.eigenvectors
    rho = (v * pops) @ v.conj().T
    pops = pops.copy()
    pops.flags.writeable = False
    return ThermalState(rho=HermitianOperator(rho), kT=kT, log_z=log_z, populations=pops)


def ground_state(H: HermitianOperator) -> ThermalState:
    """T -> 0 limit: the projector onto the (deterministically ordered) ground state."""
    v0 = H.eigenvectors[:, 0]
    rho = np.outer(v0, v0.conj())
    pops = np.array([1.0, 0.0, 0.0, 0.0])
    pops.flags.writeable = False
    return ThermalState(rho=HermitianOperator(rho), kT=0.0, log_z=float("nan"), populations=pops)


def spectral_gap(H: HermitianOperator) -> float:
    """Energy difference between the first excited state and the ground state."""
    e = H.eigenvalues
    return float(e[1] - e[0])
