"""Half-filled two-site Hubbard model restricted to the Sz = 0 sector.

Basis order (fixed everywhere in this package):

    0: |updown, 0>    both electrons on site 1
    1: |0, updown>    both electrons on site 2
    2: |up, down>     up on site 1, down on site 2
    3: |down, up>     down on site 1, up on site 2

With fermionic modes ordered (1up, 1down, 2up, 2down), the hopping block in
this basis is

    K = -J * [[0, 0,  1, -1],
              [0, 0,  1, -1],
              [1, 1,  0,  0],
              [-1,-1, 0,  0]]

so the symmetric combination (|up,down> + |down,up>)/sqrt(2) is Pauli-blocked
and decouples with energy v1 + v2.

Units: hbar = 1, the hopping J is the energy unit, time in 1/J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SIGN_NARRATIVE = "narrative"
SIGN_LITERAL = "literal-eq5"
SIGN_CONVENTIONS = (SIGN_NARRATIVE, SIGN_LITERAL)

# per-site occupation of each basis state
OCCUPATIONS = np.array([[2.0, 0.0], [0.0, 2.0], [1.0, 1.0], [1.0, 1.0]])
OCC_SITE1 = OCCUPATIONS[:, 0].copy()
OCC_SITE2 = OCCUPATIONS[:, 1].copy()
OCC_SITE1.flags.writeable = False
OCC_SITE2.flags.writeable = False

N_SITE1 = np.diag(OCC_SITE1)
N_SITE2 = np.diag(OCC_SITE2)
NUMBER_TOTAL = N_SITE1 + N_SITE2

_HOP_PATTERN = np.array(
    [
        [0.0, 0.0, 1.0, -1.0],
        [0.0, 0.0, 1.0, -1.0],
        [1.0, 1.0, 0.0, 0.0],
        [-1.0, -1.0, 0.0, 0.0],
    ]
)
_DOUBLE_OCC = np.diag([1.0, 1.0, 0.0, 0.0])


class DomainError(ValueError):
    """Input outside the physically valid domain."""


@dataclass(frozen=True)
class ManyBodyBasis:
    """The four half-filled Sz = 0 states and their site occupations."""

    states: tuple[str, ...] = ("|ud,0>", "|0,ud>", "|u,d>", "|d,u>")

    def occ(self, site: int, state: int) -> int:
        if site not in (1, 2):
            raise DomainError(f"site must be 1 or 2, got {site}")
        return int(OCCUPATIONS[state, site - 1])

    def __len__(self) -> int:
        return len(self.states)


BASIS = ManyBodyBasis()


@dataclass(frozen=True)
class DriveParams:
    """Parameters of the sinusoidal quarter-period drive.

    The drive amplitude is A0 + Atau*sin(omega4tau * t) and the evolution
    runs over [0, tau] with tau = pi / (2 * omega4tau), i.e. the sine ramps
    monotonically from 0 to 1.  `sign_convention` picks which site the
    potential makes attractive: "narrative" puts the minimum on site 2
    (charge flows 1 -> 2), "literal-eq5" mirrors it.
    """

    tau: float
    U: float = 0.0
    J: float = 1.0
    A0: float = 1.0
    Atau: float = 7.0
    sign_convention: str = SIGN_NARRATIVE
    omega4tau: float = field(default=0.0)

    def __post_init__(self):
        if self.J <= 0:
            raise DomainError(f"J must be positive, got {self.J}")
        if self.U < 0:
            raise DomainError(f"U must be non-negative, got {self.U}")
        if self.tau <= 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise DomainError(f"unknown sign convention {self.sign_convention!r}")
        omega = math.pi / (2.0 * self.tau)
        if self.omega4tau:
            if abs(self.omega4tau - omega) > 1e-12 * omega:
                raise DomainError("omega4tau inconsistent with tau = pi/(2*omega4tau)")
        else:
            object.__setattr__(self, "omega4tau", omega)

    def drive_amplitude(self, t) -> float | np.ndarray:
        """A0 + Atau*sin(omega4tau * t); accepts scalars or arrays."""
        return self.A0 + self.Atau * np.sin(self.omega4tau * np.asarray(t))


class HermitianOperator:
    """A 4x4 Hermitian matrix with a deterministic eigendecomposition.

    Eigenvalues are ascending; each eigenvector is phase-fixed so that its
    largest-magnitude component is real and positive (first index wins ties),
    which makes transition-probability tables reproducible run to run.
    """

    __slots__ = ("matrix", "eigenvalues", "eigenvectors")

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (4, 4):
            raise DomainError(f"expected a 4x4 matrix, got shape {m.shape}")
        scale = max(np.abs(m).max(), 1.0)
        herm_defect = np.abs(m - m.conj().T).max()
        if herm_defect > 1e-12 * scale:
            raise DomainError(f"matrix is not Hermitian (defect {herm_defect:.3e})")
        m = 0.5 * (m + m.conj().T)
        m.flags.writeable = False
        vals, vecs = np.linalg.eigh(m)
        vecs = _fix_phases(vecs)
        vals.flags.writeable = False
        vecs.flags.writeable = False
        self.matrix = m
        self.eigenvalues = vals
        self.eigenvectors = vecs

    def expectation(self, observable: np.ndarray, state_index: int) -> float:
        v = self.eigenvectors[:, state_index]
        return float(np.real(v.conj() @ observable @ v))

    def __repr__(self):
        return f"HermitianOperator(eigenvalues={np.round(self.eigenvalues, 6)})"


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    out = np.array(vecs, dtype=complex)
    for n in range(out.shape[1]):
        col = out[:, n]
        j = int(np.argmax(np.abs(col)))
        pivot = col[j]
        if pivot != 0:
            out[:, n] = col * (pivot.conjugate() / abs(pivot))
    return out


def external_potential(t: float, p: DriveParams) -> tuple[float, float]:
    """Site potentials (v1, v2) of the drive at time t in [0, tau]."""
    if t < -1e-12 * p.tau or t > p.tau * (1.0 + 1e-12):
        raise DomainError(f"t={t} outside the drive window [0, {p.tau}]")
    f = float(p.drive_amplitude(t))
    if p.sign_convention == SIGN_NARRATIVE:
        return +f, -f
    return -f, +f


def hamiltonian_matrix(u: float, v1: float, v2: float, j: float = 1.0) -> np.ndarray:
    """Raw 4x4 array for hopping j, repulsion u and site potentials (v1, v2)."""
    h = -j * _HOP_PATTERN + u * _DOUBLE_OCC
    h[0, 0] += 2.0 * v1
    h[1, 1] += 2.0 * v2
    h[2, 2] += v1 + v2
    h[3, 3] += v1 + v2
    return h


def hamiltonian_stack(u: float, v1: np.ndarray, v2: np.ndarray, j: float = 1.0) -> np.ndarray:
    """Stack of Hamiltonians for site-potential arrays v1(t), v2(t); shape (len(t), 4, 4)."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    h = np.broadcast_to((-j * _HOP_PATTERN), (v1.size, 4, 4)).copy()
    h[:, 0, 0] = u + 2.0 * v1
    h[:, 1, 1] = u + 2.0 * v2
    h[:, 2, 2] = v1 + v2
    h[:, 3, 3] = v1 + v2
    return h


def hamiltonian(p: DriveParams, v: tuple[float, float]) -> HermitianOperator:
    """Interacting Hamiltonian at site potentials v = (v1, v2)."""
    return HermitianOperator(hamiltonian_matrix(p.U, v[0], v[1], p.J))


def ks_hamiltonian(p: DriveParams, vks: tuple[float, float]) -> HermitianOperator:
    """Formally non-interacting Hamiltonian with fully assembled site potentials.

    `vks` must already contain every mean-field contribution (external plus
    Hartree plus exchange-correlation); no interaction term is added.
    """
    return HermitianOperator(hamiltonian_matrix(0.0, vks[0], vks[1], p.J))
