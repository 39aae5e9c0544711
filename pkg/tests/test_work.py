import numpy as np
import pytest

import reference_values as ref
from dimerwork.dynamics import TimeGrid, propagator
from dimerwork.model import DomainError, DriveParams, external_potential, hamiltonian
from dimerwork.thermo import thermal_state
from dimerwork.work import (
    WorkDistribution,
    average_extracted_work,
    jarzynski_residual,
    mean_work,
    transition_matrix,
    work_distribution,
)

RNG = np.random.default_rng(31)


def endpoint_operators(p):
    return (
        hamiltonian(p, external_potential(0.0, p)),
        hamiltonian(p, external_potential(p.tau, p)),
    )


def drive_hamiltonian(p):
    return lambda t: hamiltonian(p, external_potential(t, p))


def test_identity_propagator_same_hamiltonian():
    p = DriveParams(tau=1.0, U=2.0)
    h0, _ = endpoint_operators(p)
    t = transition_matrix(h0, h0, np.eye(4, dtype=complex))
    assert np.abs(t - np.eye(4)).max() < 1e-12


def test_sudden_quench_is_pure_overlap():
    p = DriveParams(tau=1.0, U=2.0)
    h0, ht = endpoint_operators(p)
    t = transition_matrix(h0, ht, np.eye(4, dtype=complex))
    direct = np.abs(ht.eigenvectors.conj().T @ h0.eigenvectors) ** 2
    assert np.abs(t - direct).max() < 1e-14


def test_double_stochasticity_and_oracle_overlaps():
    p = DriveParams(tau=5.0, U=2.0)
    h0, ht = endpoint_operators(p)
    u = propagator(drive_hamiltonian(p), TimeGrid.for_duration(p.tau))
    t = transition_matrix(h0, ht, u)
    assert np.abs(t.sum(axis=0) - 1.0).max() < 1e-10
    assert np.abs(t.sum(axis=1) - 1.0).max() < 1e-10
    # independent dense-matrix overlap computation
    brute = np.empty((4, 4))
    for m in range(4):
        for n in range(4):
            amp = ht.eigenvectors[:, m].conj() @ u @ h0.eigenvectors[:, n]
            brute[m, n] = abs(amp) ** 2
    assert np.abs(t - brute).max() < 1e-14


def test_constant_hamiltonian_gives_trivial_distribution():
    p = DriveParams(tau=3.0, U=4.0, Atau=0.0)
    h0, ht = endpoint_operators(p)
    u = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 500))
    d = work_distribution(h0, ht, u, kT=2.0)
    assert len(d.w) == 1
    assert d.w[0] == pytest.approx(0.0, abs=1e-12)
    assert d.prob[0] == pytest.approx(1.0, abs=1e-12)
    assert average_extracted_work(d) == 0.0


def test_cold_source_keeps_at_most_four_samples():
    p = DriveParams(tau=1.0, U=2.0)
    h0, ht = endpoint_operators(p)
    d = work_distribution(h0, ht, np.eye(4, dtype=complex), kT=1e-3)
    assert len(d.w) <= 4


def test_distribution_shape_and_normalization():
    for _ in range(15):
        p = DriveParams(tau=float(RNG.uniform(0.3, 6.0)), U=float(RNG.uniform(0, 9)))
        h0, ht = endpoint_operators(p)
        u = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 400))
        d = work_distribution(h0, ht, u, kT=float(RNG.uniform(0.3, 20)))
        assert d.prob.sum() == pytest.approx(1.0, abs=1e-10)
        assert d.prob.min() >= 0.0
        assert np.all(np.diff(d.w) > 0)
        assert len(d.w) <= 16


def test_sudden_quench_average_work_identity():
    p = DriveParams(tau=0.7, U=3.0)
    h0, ht = endpoint_operators(p)
    kt = 2.0
    d = work_distribution(h0, ht, np.eye(4, dtype=complex), kt)
    rho0 = thermal_state(h0, kt).rho.matrix
    expected = -float(np.trace(rho0 @ (ht.matrix - h0.matrix)).real)
    assert average_extracted_work(d) == pytest.approx(expected, abs=1e-10)


def test_regression_point_against_oracle():
    p = DriveParams(tau=8.0, U=2.0)
    h0, ht = endpoint_operators(p)
    u = propagator(drive_hamiltonian(p), TimeGrid.for_duration(p.tau))
    d = work_distribution(h0, ht, u, kT=2.0)
    w = average_extracted_work(d)
    assert w == pytest.approx(ref.W_EXACT_U2_TAU8_KT2, rel=1e-6)


def test_jarzynski_identity_exact_pipeline():
    for kt in (0.2, 2.0, 20.0):
        for u in (0.0, 2.0, 9.0):
            p = DriveParams(tau=2.0, U=u)
            h0, ht = endpoint_operators(p)
            uprop = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 800))
            d = work_distribution(h0, ht, uprop, kt)
            assert jarzynski_residual(d) < 1e-9


def test_jarzynski_detects_broken_normalization():
    p = DriveParams(tau=2.0, U=2.0)
    h0, ht = endpoint_operators(p)
    uprop = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 400))
    d = work_distribution(h0, ht, uprop, kT=2.0)
    broken = WorkDistribution(
        w=d.w, prob=d.prob * 0.5, beta=d.beta, delta_free_energy=d.delta_free_energy
    )
    assert jarzynski_residual(broken) == pytest.approx(0.5, abs=1e-9)


def test_jensen_bound():
    for _ in range(10):
        p = DriveParams(tau=float(RNG.uniform(0.3, 8.0)), U=float(RNG.uniform(0, 9)))
        h0, ht = endpoint_operators(p)
        uprop = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 600))
        d = work_distribution(h0, ht, uprop, kT=float(RNG.uniform(0.3, 20)))
        assert mean_work(d) >= d.delta_free_energy - 1e-9


def test_merging_tolerates_degenerate_levels():
    p = DriveParams(tau=1.0, U=0.0)  # degenerate middle eigenvalues
    h0, ht = endpoint_operators(p)
    u = propagator(drive_hamiltonian(p), TimeGrid(p.tau, 400))
    d = work_distribution(h0, ht, u, kT=2.0)
    assert len(d.w) < 16  # duplicates collapsed
    assert d.prob.sum() == pytest.approx(1.0, abs=1e-10)


def test_samples_property_and_kt_validation():
    p = DriveParams(tau=1.0, U=1.0)
    h0, ht = endpoint_operators(p)
    d = work_distribution(h0, ht, np.eye(4, dtype=complex), kT=2.0)
    assert d.samples == list(zip(d.w.tolist(), d.prob.tolist()))
    with pytest.raises(DomainError):
        work_distribution(h0, ht, np.eye(4, dtype=complex), kT=0.0)
