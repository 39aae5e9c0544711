"""The approximation ladder: exact dynamics and Kohn-Sham-style protocols.

Every protocol is a closed pipeline: pick a Hamiltonian family H(t), prepare
the Gibbs state of H(0), evolve unitarily, and read the two-point-measurement
work statistics in the eigenbases of H(0) and H(tau).  The families are

* exact            -- hopping + on-site repulsion + external drive;
* noninteracting   -- hopping + external drive (U dropped entirely);
* plda             -- hopping + drive + Hartree and cube-root
                      exchange-correlation potentials frozen at their t=0
                      values (static pseudo-LDA);
* alda             -- same functional forms evaluated on the instantaneous
                      density n_j(t), made self-consistent by iterating the
                      dynamics until the density trajectory stops moving
                      (adiabatic-LDA-inspired scheme).

The mean-field potentials are, per site,

    V_hartree(n) = U n / 2
    V_xc(n)      = -2**(-4/3) * (4/3) * U * n**(1/3)

and keeping the work evaluation inside a single family makes the Jarzynski
identity hold to roundoff for every protocol, converged or not.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import (
    TimeGrid,
    Trajectory,
    fold,
    half_step_frames,
    occupations_from_frames,
    step_unitaries,
)
from .model import (
    OCC_SITE1,
    OCC_SITE2,
    SIGN_NARRATIVE,
    DomainError,
    DriveParams,
    HermitianOperator,
    hamiltonian_matrix,
    hamiltonian_stack,
)
from .thermo import ThermalState, thermal_state
from .work import WorkDistribution, average_extracted_work, work_distribution

XC_PREFACTOR = -(2.0 ** (-4.0 / 3.0)) * (4.0 / 3.0)

SCF_T0_TOL = 1e-9
SCF_T0_MAX_ITER = 500
SCF_T0_MIXING = 0.5
ALDA_TOL = 1e-5
ALDA_MAX_ITER = 200


class ProtocolKind(str, Enum):
    EXACT = "exact"
    NONINTERACTING = "noninteracting"
    STATIC_PLDA = "plda"
    ALDA = "alda"


@dataclass(frozen=True)
class KSPotential:
    """Per-site decomposition of the mean-field potential."""

    v_ext: tuple[float, float]
    v_hartree: tuple[float, float]
    v_xc: tuple[float, float]

    @property
    def total(self) -> tuple[float, float]:
        return (
            self.v_ext[0] + self.v_hartree[0] + self.v_xc[0],
            self.v_ext[1] + self.v_hartree[1] + self.v_xc[1],
        )


@dataclass
class SCFReport:
    iterations: int
    residual_history: list[float]
    converged: bool
    mixing_used: float
    iterate_densities: list[np.ndarray] | None = None  # per-iteration n1(t), when recorded


@dataclass(frozen=True)
class ProtocolResult:
    work: float
    trajectory: Trajectory
    distribution: WorkDistribution
    scf: SCFReport | None = None


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(f"{message} (last residual {residual_history[-1]:.3e})")
        self.residual_history = residual_history


def hartree_potential(n_j: float, U: float) -> float:
    """Mean-field electrostatic potential U*n/2 on a site with occupation n."""
    if not -1e-12 <= n_j <= 2.0 + 1e-12:
        raise DomainError(f"occupation {n_j} outside [0, 2]")
    return 0.5 * U * n_j

def xc_potential_plda(n_j: float, U: float) -> float:
    """Cube-root exchange-correlation potential; non-positive, linear in U."""
    if n_j < -1e-12:
        raise DomainError(f"occupation {n_j} must be non-negative")
    return XC_PREFACTOR * U * max(float(n_j), 0.0) ** (1.0 / 3.0)


def _mean_field(n1, U):
    """Vectorized total Hartree + xc per site for site-1 occupation n1 (site 2 holds 2-n1)."""
    n1 = np.maximum(np.asarray(n1, dtype=float), 0.0)
    n2 = np.maximum(2.0 - n1, 0.0)
    w1 = 0.5 * U * n1 + XC_PREFACTOR * U * np.cbrt(n1)
    w2 = 0.5 * U * n2 + XC_PREFACTOR * U * np.cbrt(n2)
    return w1, w2


def drive_site_potentials(p: DriveParams, t) -> tuple[np.ndarray, np.ndarray]:
    """External (v1(t), v2(t)) for scalar or array t, honoring the sign convention."""
    f = p.drive_amplitude(t)
    if p.sign_convention == SIGN_NARRATIVE:
        return +f, -f
    return -f, +f


@dataclass(frozen=True)
class HamiltonianFamily:
    """A concrete H(t): endpoint operators plus the midpoint stack that evolves it."""

    H0: HermitianOperator
    Htau: HermitianOperator
    grid: TimeGrid
    h_mid: np.ndarray


@dataclass(frozen=True)
class PropagatedFamily:
    family: HamiltonianFamily
    Uprop: np.ndarray
    frames: np.ndarray | None


def exact_family(p: DriveParams, grid: TimeGrid) -> HamiltonianFamily:
    v1m, v2m = drive_site_potentials(p, grid.midpoints)
    v10, v20 = drive_site_potentials(p, 0.0)
    v1t, v2t = drive_site_potentials(p, p.tau)
    return HamiltonianFamily(
        H0=HermitianOperator(hamiltonian_matrix(p.U, v10, v20, p.J)),
        Htau=HermitianOperator(hamiltonian_matrix(p.U, v1t, v2t, p.J)),
        grid=grid,
        h_mid=hamiltonian_stack(p.U, v1m, v2m, p.J),
    )


def noninteracting_family(p: DriveParams, grid: TimeGrid) -> HamiltonianFamily:
    v1m, v2m = drive_site_potentials(p, grid.midpoints)
    v10, v20 = drive_site_potentials(p, 0.0)
    v1t, v2t = drive_site_potentials(p, p.tau)
    return HamiltonianFamily(
        H0=HermitianOperator(hamiltonian_matrix(0.0, v10, v20, p.J)),
        Htau=HermitianOperator(hamiltonian_matrix(0.0, v1t, v2t, p.J)),
        grid=grid,
        h_mid=hamiltonian_stack(0.0, v1m, v2m, p.J),
    )


def _density_site1(state: ThermalState) -> float:
    return float(np.real(np.diag(state.rho.matrix)) @ OCC_SITE1)


def scf_initial_density(
    p: DriveParams,
    kT: float,
    tol: float = SCF_T0_TOL,
    max_iter: int = SCF_T0_MAX_ITER,
    mixing: float = SCF_T0_MIXING,
) -> tuple[float, int]:
    """Self-consistent site-1 occupation of the mean-field thermal state at t=0.

    Fixed point of n -> density(Gibbs(H_ks[n](0))) with linear mixing; raises
    ConvergenceError if the loop does not settle.
    """
    v10, v20 = drive_site_potentials(p, 0.0)
    n1 = 1.0
    history: list[float] = []
    for it in range(1, max_iter + 1):
        w1, w2 = _mean_field(n1, p.U)
        h0 = HermitianOperator(hamiltonian_matrix(0.0, v10 + w1, v20 + w2, p.J))
        n1_new = _density_site1(thermal_state(h0, kT))
        residual = abs(n1_new - n1)
        history.append(residual)
        if residual <= tol:
            return n1_new, it
        n1 = (1.0 - mixing) * n1 + mixing * n1_new
    raise ConvergenceError(f"t=0 mean-field loop stuck after {max_iter} iterations", history)


def exact_initial_density(p: DriveParams, kT: float) -> float:
    fam_h0 = HermitianOperator(hamiltonian_matrix(p.U, *drive_site_potentials(p, 0.0), p.J))
    return _density_site1(thermal_state(fam_h0, kT))


def plda_family(
    p: DriveParams,
    kT: float,
    grid: TimeGrid,
    density_source: str = "scf",
) -> tuple[HamiltonianFamily, int]:
    """Mean-field family with Hartree and xc frozen at their t=0 values."""
    if density_source == "scf":
        n1_0, iterations = scf_initial_density(p, kT)
    elif density_source == "exact":
        n1_0, iterations = exact_initial_density(p, kT), 0
    else:
        raise DomainError(f"unknown p-LDA density source {density_source!r}")
    w1, w2 = _mean_field(n1_0, p.U)
    v1m, v2m = drive_site_potentials(p, grid.midpoints)
    v10, v20 = drive_site_potentials(p, 0.0)
    v1t, v2t = drive_site_potentials(p, p.tau)
    family = HamiltonianFamily(
        H0=HermitianOperator(hamiltonian_matrix(0.0, v10 + w1, v20 + w2, p.J)),
        Htau=HermitianOperator(hamiltonian_matrix(0.0, v1t + w1, v2t + w2, p.J)),
        grid=grid,
        h_mid=hamiltonian_stack(0.0, v1m + w1, v2m + w2, p.J),
    )
    return family, iterations


def propagate_family(family: HamiltonianFamily, record: bool = False) -> PropagatedFamily:
    steps = step_unitaries(family.h_mid, family.grid.dt)
    final, frames = fold(steps, np.eye(4, dtype=complex), record=record)
    return PropagatedFamily(family=family, Uprop=final, frames=frames)


def measure(pf: PropagatedFamily, kT: float) -> tuple[float, float, float, WorkDistribution]:
    """Work and final occupations of one propagated family at temperature kT."""
    init = thermal_state(pf.family.H0, kT)
    dist = work_distribution(pf.family.H0, pf.family.Htau, pf.Uprop, kT, j_scale=1.0)
    rho_tau = pf.Uprop @ init.rho.matrix @ pf.Uprop.conj().T
    diag = np.real(np.diag(rho_tau))
    return average_extracted_work(dist), float(diag @ OCC_SITE1), float(diag @ OCC_SITE2), dist


def _trajectory(pf: PropagatedFamily, init: ThermalState) -> Trajectory:
    n1, n2 = occupations_from_frames(pf.frames, init.rho.matrix)
    rho_tau = pf.Uprop @ init.rho.matrix @ pf.Uprop.conj().T
    return Trajectory(
        times=pf.family.grid.times, n1=n1, n2=n2, final_state=HermitianOperator(rho_tau)
    )


def _run(family: HamiltonianFamily, kT: float, scf: SCFReport | None = None) -> ProtocolResult:
    pf = propagate_family(family, record=True)
    w, _, _, dist = measure(pf, kT)
    traj = _trajectory(pf, thermal_state(family.H0, kT))
    return ProtocolResult(work=w, trajectory=traj, distribution=dist, scf=scf)


def _resolve_grid(p: DriveParams, grid: TimeGrid | None) -> TimeGrid:
    return grid if grid is not None else TimeGrid.for_duration(p.tau)


def exact_run(p: DriveParams, kT: float, grid: TimeGrid | None = None) -> ProtocolResult:
    """Interacting dynamics; the reference the approximations are judged against."""
    return _run(exact_family(p, _resolve_grid(p, grid)), kT)


def noninteracting_run(p: DriveParams, kT: float, grid: TimeGrid | None = None) -> ProtocolResult:
    """Bare hopping + drive; ignores p.U entirely."""
    return _run(noninteracting_family(p, _resolve_grid(p, grid)), kT)


def static_plda_run(
    p: DriveParams,
    kT: float,
    grid: TimeGrid | None = None,
    density_source: str = "scf",
) -> ProtocolResult:
    family, iterations = plda_family(p, kT, _resolve_grid(p, grid), density_source)
    report = SCFReport(
        iterations=iterations,
        residual_history=[],
        converged=True,
        mixing_used=SCF_T0_MIXING if density_source == "scf" else 0.0,
    )
    return _run(family, kT, scf=report)


def alda_run(
    p: DriveParams,
    kT: float,
    grid: TimeGrid | None = None,
    tol: float = ALDA_TOL,
    max_iter: int = ALDA_MAX_ITER,
    mixing: float = 1.0,
    record_iterates: bool = False,
) -> ProtocolResult:
    """Self-consistent time-dependent mean-field cycle.

    Seeds the density trajectory with the exact t=0 thermal occupation held
    constant in time, then alternates (build H(t) from the density; rebuild
    the t=0 Gibbs state; evolve; extract the new density) until the
    time-averaged density change per grid point drops to `tol`.  mixing=1 is
    plain iteration; smaller values damp the density update.  Running out of
    iterations returns the last iterate flagged unconverged instead of
    raising.
    """
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    if not 0.0 < mixing <= 1.0:
        raise DomainError(f"mixing must be in (0, 1], got {mixing}")
    grid = _resolve_grid(p, grid)
    m = grid.M
    dt = grid.dt

    v1m, v2m = drive_site_potentials(p, grid.midpoints)
    v10, v20 = drive_site_potentials(p, 0.0)
    v1t, v2t = drive_site_potentials(p, p.tau)

    n_exact0 = exact_initial_density(p, kT)
    n1_grid = np.full(m + 1, n_exact0)
    n1_mid = np.full(m, n_exact0)

    history: list[float] = []
    iterates: list[np.ndarray] = []
    converged = False
    last: tuple | None = None
    for it in range(1, max_iter + 1):
        w1m, w2m = _mean_field(n1_mid, p.U)
        w10, w20 = _mean_field(n1_grid[0], p.U)
        w1t, w2t = _mean_field(n1_grid[-1], p.U)
        family = HamiltonianFamily(
            H0=HermitianOperator(hamiltonian_matrix(0.0, v10 + w10, v20 + w20, p.J)),
            Htau=HermitianOperator(hamiltonian_matrix(0.0, v1t + w1t, v2t + w2t, p.J)),
            grid=grid,
            h_mid=hamiltonian_stack(0.0, v1m + w1m, v2m + w2m, p.J),
        )
        init = thermal_state(family.H0, kT)
        halves = step_unitaries(family.h_mid, 0.5 * dt)
        frames = half_step_frames(halves, np.eye(4, dtype=complex))
        final, grid_frames = frames[-1], frames[0::2]
        n1_all, _ = occupations_from_frames(frames, init.rho.matrix)
        new_grid, new_mid = n1_all[0::2], n1_all[1::2]

        residual = float(np.abs(new_grid[1:] - n1_grid[1:]).sum() / m)
        history.append(residual)
        if record_iterates:
            iterates.append(new_grid.copy())
        last = (family, init, final, grid_frames, new_grid)
        if residual <= tol:
            converged = True
            break
        n1_grid = (1.0 - mixing) * n1_grid + mixing * new_grid
        n1_mid = (1.0 - mixing) * n1_mid + mixing * new_mid

    family, init, final, grid_frames, new_grid = last
    pf = PropagatedFamily(family=family, Uprop=final, frames=grid_frames)
    w, _, _, dist = measure(pf, kT)
    traj = _trajectory(pf, init)
    report = SCFReport(
        iterations=len(history),
        residual_history=history,
        converged=converged,
        mixing_used=mixing,
        iterate_densities=iterates if record_iterates else None,
    )
    return ProtocolResult(work=w, trajectory=traj, distribution=dist, scf=report)


def run_protocol(
    kind: ProtocolKind,
    p: DriveParams,
    kT: float,
    grid: TimeGrid | None = None,
    plda_density_source: str = "scf",
    alda_tol: float = ALDA_TOL,
    alda_max_iter: int = ALDA_MAX_ITER,
    alda_mixing: float = 1.0,
) -> ProtocolResult:
    kind = ProtocolKind(kind)
    if kind is ProtocolKind.EXACT:
        return exact_run(p, kT, grid)
    if kind is ProtocolKind.NONINTERACTING:
        return noninteracting_run(p, kT, grid)
    if kind is ProtocolKind.STATIC_PLDA:
        return static_plda_run(p, kT, grid, density_source=plda_density_source)
    return alda_run(p, kT, grid, tol=alda_tol, max_iter=alda_max_iter, mixing=alda_mixing)


def run_with_auto_steps(
    kind: ProtocolKind,
    p: DriveParams,
    kT: float,
    n1_tol: float = 1e-7,
    max_doublings: int = 12,
    **kwargs,
) -> ProtocolResult:
    """Re-run a protocol with doubled step counts until n1(tau) settles below n1_tol."""
    m = TimeGrid.for_duration(p.tau).M
    prev = run_protocol(kind, p, kT, grid=TimeGrid(p.tau, m), **kwargs)
    for _ in range(max_doublings):
        m *= 2
        cur = run_protocol(kind, p, kT, grid=TimeGrid(p.tau, m), **kwargs)
        if abs(cur.trajectory.n1[-1] - prev.trajectory.n1[-1]) < n1_tol:
            return cur
        prev = cur
    raise ConvergenceError("step-doubling did not stabilize n1(tau)", [float("nan")])
