"""Two-point-measurement work statistics and fluctuation-theorem checks.

The protocol: projectively measure the energy at t=0 in a Gibbs state of
H(0), evolve unitarily, measure again in the eigenbasis of H(tau).  The
work value of one realization is w = E_m(tau) - E_n(0) and the extracted
work is W = -<w>.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError, HermitianOperator
from .thermo import boltzmann_populations

MERGE_TOL = 1e-9
# Transition probabilities below eigensolver roundoff are pure noise; dropping
# them perturbs normalization and the Jarzynski sum by < 16 * floor relative.
TRANSITION_FLOOR = 1e-14


@dataclass(frozen=True)
class WorkDistribution:
    """Discrete P(w): sorted work values, their probabilities, and the
    free-energy difference of the generating Hamiltonian family."""

    w: np.ndarray
    prob: np.ndarray
    beta: float
    delta_free_energy: float

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.w.tolist(), self.prob.tolist()))


def transition_matrix(H0: HermitianOperator, Htau: HermitianOperator, Uprop: np.ndarray) -> np.ndarray:
    """p[m, n] = |<psi_m(tau)| U |psi_n(0)>|^2; doubly stochastic for unitary U."""
    amp = Htau.eigenvectors.conj().T @ Uprop @ H0.eigenvectors
    return np.abs(amp) ** 2


def _merge_samples(w: np.ndarray, prob: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge entries whose successive gap is below the binning tolerance."""
    order = np.argsort(w, kind="stable")
    w, prob = w[order], prob[order]
    out_w, out_p = [], []
    k = 0
    n = len(w)
    while k < n:
        j = k + 1
        while j < n and (w[j] - w[j - 1]) < MERGE_TOL * max(scale, abs(w[j])):
            j += 1
        chunk_p = prob[k:j].sum()
        if chunk_p > 0:
            out_w.append(float(np.average(w[k:j], weights=prob[k:j])))
        else:
            out_w.append(float(w[k:j].mean()))
        out_p.append(float(chunk_p))
        k = j
    return np.array(out_w), np.array(out_p)


def work_distribution(
    H0: HermitianOperator,
    Htau: HermitianOperator,
    Uprop: np.ndarray,
    kT: float,
    j_scale: float = 1.0,
) -> WorkDistribution:
    """P(w) from the two-point measurement with a Gibbs source state at kT."""
    if kT <= 0:
        raise DomainError(f"kT must be positive, got {kT}")
    pops, log_z0 = boltzmann_populations(H0.eigenvalues, kT)
    _, log_ztau = boltzmann_populations(Htau.eigenvalues, kT)
    trans = transition_matrix(H0, Htau, Uprop)
    wvals = (Htau.eigenvalues[:, None] - H0.eigenvalues[None, :]).ravel()
    probs = (trans * pops[None, :]).ravel()
    keep = (trans.ravel() > TRANSITION_FLOOR) & (probs > 0.0)
    w, prob = _merge_samples(wvals[keep], probs[keep], scale=j_scale)
    w.flags.writeable = False
    prob.flags.writeable = False
    delta_f = -kT * (log_ztau - log_z0)
    return WorkDistribution(w=w, prob=prob, beta=1.0 / kT, delta_free_energy=delta_f)


def average_extracted_work(d: WorkDistribution) -> float:
    """W = -sum_i w_i p_i; positive when the drive draws energy out."""
    return float(-(d.w @ d.prob))


def mean_work(d: WorkDistribution) -> float:
    """<w>, the average work done on the system."""
    return float(d.w @ d.prob)


def jarzynski_residual(d: WorkDistribution) -> float:
    """Relative defect of <exp(-beta w)> against Z_tau/Z_0.

    Exactly zero (up to roundoff) for any unitary propagation started from
    the Gibbs state of the same Hamiltonian family that defines the
    measurement bases and the free-energy difference.
    """
    z_ratio = float(np.exp(-d.beta * d.delta_free_energy))
    estimate = float(d.prob @ np.exp(-d.beta * d.w))
    return abs(estimate - z_ratio) / z_ratio
