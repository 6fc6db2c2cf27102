"""Collision-model tests: kernel normalization against the reduced
generator, Poisson resummation of the semigroup, trajectory sampling, and
reproducibility of the counter-based streams."""

import numpy as np
import pytest
from scipy.linalg import expm

from dilutegas.collision import build_kernel, ensemble_average, sample_trajectory
from dilutegas.generator import heisenberg_generator, unvec, vec
from dilutegas.model import EnergyGrid, FormFactorSet, GasState
from dilutegas.scattering import build_smatrix

from test_generator import random_state
from test_scattering import random_model


def build_fixture(rng, beta=1.0, fugacity=0.2, **kw):
    grid, ff, D = random_model(rng, **kw)
    data = build_smatrix(grid, ff, D)
    gas = GasState.gibbs(grid, beta=beta, fugacity=fugacity)
    return data, gas


def heis_one_collision(kernel, X):
    """Independent Heisenberg route: Tr_1[(1 (x) rho~_j) S^+ (X (x) 1) S],
    summed over bins with the unnormalized blocks."""
    dS = kernel.dim_system
    out = np.zeros((dS, dS), dtype=complex)
    for S, rho1 in zip(kernel.s_blocks, kernel.density_blocks):
        r = rho1.shape[0]
        S4 = S.reshape(dS, r, dS, r)
        out += kernel.rate * np.einsum(
            "qr,apcr,ab,bpdq->cd", rho1, S4.conj(), X, S4)
    return out


class TestBuildKernel:
    def test_generator_identity_complete_basis(self):
        rng = np.random.default_rng(7)
        for _ in range(4):
            data, gas = build_fixture(rng)
            kernel = build_kernel(data, gas)
            pair = heisenberg_generator(data, gas)
            dS = kernel.dim_system
            worst = 0.0
            for a in range(dS):
                for b in range(dS):
                    X = np.zeros((dS, dS), dtype=complex)
                    X[a, b] = 1.0
                    lhs = heis_one_collision(kernel, X) - kernel.rate * X
                    rhs = unvec(pair.heis @ vec(X))
                    worst = max(worst, np.max(np.abs(lhs - rhs)))
            assert worst <= 1e-8
            assert kernel.identity_defect <= 1e-8

    def test_single_bin_orthonormal_rate(self):
        # orthonormal channel vectors and scalar occupation c: each channel
        # contributes dE*c/(2 pi), so the total rate is dE*c/pi
        dE, c = 0.25, 0.7
        grid = EnergyGrid.uniform(1.0 - dE / 2, 1.0 + dE / 2, 1, multiplicity=2)
        ff = FormFactorSet((np.eye(2, dtype=complex),))
        gas = GasState(0.0, (c * np.eye(2),))
        D = np.array([[0.0, 0.4], [0.4, 0.0]], dtype=complex)
        kernel = build_kernel(build_smatrix(grid, ff, D), gas)
        assert kernel.rate == pytest.approx(dE * c / np.pi, rel=1e-12)
        assert np.allclose(kernel.particle_density, np.eye(2) / 2, atol=1e-12)
        assert kernel.bin_probabilities == pytest.approx([1.0])
        assert not kernel.empty_gas

    def test_empty_gas_null_kernel(self):
        rng = np.random.default_rng(11)
        grid, ff, D = random_model(rng)
        kernel = build_kernel(build_smatrix(grid, ff, D), GasState.empty(grid))
        assert kernel.empty_gas
        assert kernel.rate == 0.0
        assert np.array_equal(kernel.collision_map, np.eye(kernel.dim_system ** 2))
        rec = sample_trajectory(kernel, np.eye(kernel.dim_system) / kernel.dim_system,
                                5.0, [0.0, 2.5, 5.0], seed=3)
        assert rec.collision_times.size == 0
        assert np.array_equal(rec.snapshots[0], rec.snapshots[-1])

    def test_particle_density_normalized(self):
        rng = np.random.default_rng(13)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho1 = kernel.particle_density
        assert np.trace(rho1).real == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(rho1 - rho1.conj().T)) <= 1e-12
        assert np.linalg.eigvalsh(rho1).min() >= -1e-12
        assert kernel.bin_probabilities.sum() == pytest.approx(1.0, abs=1e-12)

    def test_collision_map_is_cptp(self):
        rng = np.random.default_rng(17)
        data, gas = build_fixture(rng, d_s=3)
        kernel = build_kernel(data, gas)
        dS = kernel.dim_system
        choi = np.zeros((dS * dS, dS * dS), dtype=complex)
        trace_defect = 0.0
        for a in range(dS):
            for b in range(dS):
                E = np.zeros((dS, dS), dtype=complex)
                E[a, b] = 1.0
                ME = kernel.apply_collision(E)
                choi += np.kron(E, ME)
                trace_defect = max(trace_defect, abs(np.trace(ME) - (a == b)))
        assert trace_defect <= 1e-12
        choi = 0.5 * (choi + choi.conj().T)
        assert np.linalg.eigvalsh(choi).min() >= -1e-10


class TestPoissonSeries:
    def test_series_matches_semigroup(self):
        rng = np.random.default_rng(23)
        data, gas = build_fixture(rng, d_s=2)
        kernel = build_kernel(data, gas)
        pair = heisenberg_generator(data, gas)
        t = 3.0 / kernel.rate
        lam_t = kernel.rate * t
        exact = expm(pair.schr * t)
        nv = kernel.dim_system ** 2
        series = np.zeros((nv, nv), dtype=complex)
        Mk = np.eye(nv, dtype=complex)
        weight = np.exp(-lam_t)
        covered = 0.0
        k = 0
        while covered < 1.0 - 1e-10:
            series += weight * Mk
            covered += weight
            k += 1
            weight *= lam_t / k
            Mk = kernel.collision_map @ Mk
            assert k < 500
        assert np.max(np.abs(series - exact)) <= 1e-8


class TestSampleTrajectory:
    def test_bitwise_reproducible(self):
        rng = np.random.default_rng(29)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, kernel.dim_system)
        t_end = 3.0 / kernel.rate
        outputs = np.linspace(0.0, t_end, 7)
        a = sample_trajectory(kernel, rho0, t_end, outputs, seed=424242)
        b = sample_trajectory(kernel, rho0, t_end, outputs, seed=424242)
        assert a.snapshots.tobytes() == b.snapshots.tobytes()
        assert a.collision_times.tobytes() == b.collision_times.tobytes()
        assert a.bin_labels.tobytes() == b.bin_labels.tobytes()
        c = sample_trajectory(kernel, rho0, t_end, outputs, seed=424243)
        assert c.collision_times.shape != a.collision_times.shape or \
            c.collision_times.tobytes() != a.collision_times.tobytes()

    def test_snapshots_are_states(self):
        rng = np.random.default_rng(31)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, kernel.dim_system)
        t_end = 5.0 / kernel.rate
        rec = sample_trajectory(kernel, rho0, t_end,
                                np.linspace(0.0, t_end, 11), seed=5)
        for snap in rec.snapshots:
            assert abs(np.trace(snap) - 1.0) <= 1e-8
            assert np.max(np.abs(snap - snap.conj().T)) <= 1e-8
            assert np.linalg.eigvalsh(0.5 * (snap + snap.conj().T)).min() >= -1e-8

    def test_trivial_scattering_leaves_state_fixed(self):
        rng = np.random.default_rng(37)
        grid, ff, _ = random_model(rng, d_s=2)
        data = build_smatrix(grid, ff, np.zeros((2, 2)))
        kernel = build_kernel(data, GasState.gibbs(grid, beta=1.0))
        assert kernel.rate > 0.0
        rho0 = random_state(rng, 2)
        t_end = 4.0 / kernel.rate
        rec = sample_trajectory(kernel, rho0, t_end, [t_end], seed=9)
        assert rec.collision_times.size > 0
        assert np.max(np.abs(rec.snapshots[0] - rho0)) <= 1e-12

    def test_collision_bookkeeping(self):
        rng = np.random.default_rng(41)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, kernel.dim_system)
        t_end = 6.0 / kernel.rate
        rec = sample_trajectory(kernel, rho0, t_end, [0.0, t_end], seed=12)
        assert rec.collision_times.size == rec.bin_labels.size
        assert np.all(np.diff(rec.collision_times) > 0)
        assert rec.collision_times.size == 0 or rec.collision_times[-1] <= t_end
        n_bins = len(kernel.density_blocks)
        assert np.all((rec.bin_labels >= 0) & (rec.bin_labels < n_bins))
        assert np.array_equal(rec.snapshots[0], rho0)

    def test_count_statistics(self):
        rng = np.random.default_rng(43)
        data, gas = build_fixture(rng, n_bins=3, d_s=2, mult=1)
        kernel = build_kernel(data, gas)
        t_end = 3.0 / kernel.rate
        lam_t = kernel.rate * t_end
        n = 2000
        counts = np.empty(n)
        labels = []
        for i in range(n):
            rec = sample_trajectory(kernel, np.eye(2) / 2, t_end, [], seed=900 + i)
            counts[i] = rec.collision_times.size
            labels.append(rec.bin_labels)
        assert abs(counts.mean() - lam_t) <= 4 * np.sqrt(lam_t / n)
        assert abs(counts.var() - lam_t) <= 10 * lam_t / np.sqrt(n)
        labels = np.concatenate(labels)
        freqs = np.bincount(labels, minlength=len(kernel.bin_probabilities)) / labels.size
        for f, p in zip(freqs, kernel.bin_probabilities):
            assert abs(f - p) <= 5 * np.sqrt(p * (1 - p) / labels.size) + 1e-12

    def test_output_validation(self):
        rng = np.random.default_rng(47)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho0 = np.eye(kernel.dim_system) / kernel.dim_system
        with pytest.raises(ValueError):
            sample_trajectory(kernel, rho0, 1.0, [0.5, 0.2], seed=1)
        with pytest.raises(ValueError):
            sample_trajectory(kernel, rho0, 1.0, [0.5, 1.5], seed=1)


class TestEnsembleAverage:
    def test_mean_tracks_semigroup(self):
        rng = np.random.default_rng(53)
        data, gas = build_fixture(rng, d_s=2)
        kernel = build_kernel(data, gas)
        pair = heisenberg_generator(data, gas)
        rho0 = random_state(rng, 2)
        t_grid = np.linspace(0.0, 2.5 / kernel.rate, 6)
        res = ensemble_average(kernel, rho0, t_grid, n_traj=400, master_seed=77)
        for ti, t in enumerate(t_grid):
            exact = unvec(expm(pair.schr * t) @ vec(rho0))
            err = np.abs(res.mean[ti] - exact)
            # 0 and 4 stderr floors: t=0 is deterministic
            assert np.all(err <= 4.0 * res.stderr[ti] + 1e-12)

    def test_matches_manual_xor_seeding(self):
        rng = np.random.default_rng(59)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, kernel.dim_system)
        t_grid = np.array([0.0, 1.0 / kernel.rate, 2.0 / kernel.rate])
        res = ensemble_average(kernel, rho0, t_grid, n_traj=3, master_seed=1000)
        stack = np.array([
            sample_trajectory(kernel, rho0, t_grid[-1], t_grid, 1000 ^ i).snapshots
            for i in range(3)])
        assert np.array_equal(res.mean, stack.mean(axis=0))

    def test_rejects_empty_ensemble(self):
        rng = np.random.default_rng(61)
        data, gas = build_fixture(rng)
        kernel = build_kernel(data, gas)
        with pytest.raises(ValueError):
            ensemble_average(kernel, np.eye(kernel.dim_system), [0.0], 0, 1)

    def test_thread_count_does_not_change_results(self):
        rng = np.random.default_rng(67)
        data, gas = build_fixture(rng, d_s=2)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, 2)
        t_grid = np.linspace(0.0, 2.0 / kernel.rate, 5)
        seq = ensemble_average(kernel, rho0, t_grid, n_traj=30, master_seed=4)
        par = ensemble_average(kernel, rho0, t_grid, n_traj=30, master_seed=4,
                               threads=3)
        assert np.array_equal(seq.mean, par.mean)
        assert np.array_equal(seq.stderr, par.stderr)

    def test_transform_applied_per_trajectory(self):
        rng = np.random.default_rng(71)
        data, gas = build_fixture(rng, d_s=2)
        kernel = build_kernel(data, gas)
        rho0 = random_state(rng, 2)
        t_grid = np.linspace(0.0, 1.0 / kernel.rate, 4)
        plain = ensemble_average(kernel, rho0, t_grid, n_traj=20, master_seed=9)
        # doubling is exact in binary floats, so the mean doubles exactly
        doubled = ensemble_average(kernel, rho0, t_grid, n_traj=20,
                                   master_seed=9, transform=lambda s: 2.0 * s)
        assert np.array_equal(doubled.mean, 2.0 * plain.mean)
