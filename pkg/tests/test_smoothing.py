import numpy as np
import pytest

from ofdm_isac import (ObservationTensor, SmoothingDims, Target,
                       composite_steering, derive_phases, sample_covariance,
                       smooth, synthesize_observation)
from ofdm_isac.model import PhaseTriple


def numerical_rank(matrix, rel_tol=1e-8):
    s = np.linalg.svd(matrix, compute_uv=False)
    return int(np.sum(s > rel_tol * s[0]))


class TestDims:
    def test_parse_order(self):
        dims = SmoothingDims.parse("7,15,15")
        assert (dims.p_tilde, dims.m_tilde, dims.n_tilde) == (7, 15, 15)

    def test_snapshot_arithmetic_full_preset(self):
        # window (7, 15, 15) over an (8, 112, 120) observation
        dims = SmoothingDims(m_tilde=15, n_tilde=15, p_tilde=7)
        assert dims.num_elements == 1575
        assert dims.num_snapshots_for((8, 112, 120)) == (120 - 15 + 1) \
            * (112 - 15 + 1) * (8 - 7 + 1)
        assert dims.num_snapshots_for((8, 112, 120)) == 20776

    def test_strict_inequalities_enforced(self):
        dims = SmoothingDims(m_tilde=4, n_tilde=4, p_tilde=2)
        with pytest.raises(ValueError):
            dims.validate_for((2, 4, 8))   # symbol window == axis
        with pytest.raises(ValueError):
            dims.validate_for((2, 8, 4))   # subcarrier window == axis
        with pytest.raises(ValueError):
            SmoothingDims(m_tilde=4, n_tilde=4, p_tilde=2).validate_for((1, 8, 8))

    def test_single_antenna_allows_unit_window(self):
        dims = SmoothingDims(m_tilde=2, n_tilde=2, p_tilde=1)
        dims.validate_for((1, 8, 8))

    def test_nonpositive_windows_rejected(self):
        with pytest.raises(ValueError):
            SmoothingDims(m_tilde=0, n_tilde=2, p_tilde=2)


class TestSmooth:
    def test_degenerate_window_enumerates_elements(self):
        data = (np.arange(8, dtype=float) + 1).reshape(2, 2, 2).astype(complex)
        obs = ObservationTensor(data=data, noise_var=0.0)
        snap = smooth(obs, SmoothingDims(m_tilde=1, n_tilde=1, p_tilde=1))
        assert snap.g.shape == (1, 8)
        for p in range(2):
            for m in range(2):
                for n in range(2):
                    col = snap.column_index(p, m, n)
                    assert snap.g[0, col] == data[p, m, n]

    def test_column_layout_matches_windowed_steering(self, desk_cfg, single_target):
        obs = synthesize_observation(desk_cfg, [single_target], 0.0, 0)
        dims = SmoothingDims(m_tilde=5, n_tilde=6, p_tilde=3)
        snap = smooth(obs, dims)
        ph = derive_phases(single_target, desk_cfg)
        a = composite_steering(ph, 3, 6, 5)
        col = snap.g[:, snap.column_index(2, 4, 3)]
        # single target: every column is the windowed steering vector scaled
        # by the window-origin phase
        x = single_target.amplitude * np.exp(1j * (4 * ph.phi - 3 * ph.varphi
                                                   + 2 * ph.psi))
        assert np.allclose(col, a * x, atol=1e-12)

    def test_single_target_columns_rank_one(self, desk_cfg, single_target):
        obs = synthesize_observation(desk_cfg, [single_target], 0.0, 0)
        snap = smooth(obs, SmoothingDims(m_tilde=4, n_tilde=4, p_tilde=2))
        assert numerical_rank(snap.g) == 1

    def test_shift_identities(self, desk_cfg, single_target):
        obs = synthesize_observation(desk_cfg, [single_target], 0.0, 0)
        dims = SmoothingDims(m_tilde=4, n_tilde=4, p_tilde=3)
        snap = smooth(obs, dims)
        ph = derive_phases(single_target, desk_cfg)
        base = snap.g[:, snap.column_index(1, 2, 3)]
        assert np.allclose(snap.g[:, snap.column_index(2, 2, 3)],
                           base * np.exp(1j * ph.psi), atol=1e-12)
        assert np.allclose(snap.g[:, snap.column_index(1, 3, 3)],
                           base * np.exp(1j * ph.phi), atol=1e-12)
        assert np.allclose(snap.g[:, snap.column_index(1, 2, 4)],
                           base * np.exp(-1j * ph.varphi), atol=1e-12)

    def test_out_buffer_reuse(self, desk_cfg, single_target):
        obs = synthesize_observation(desk_cfg, [single_target], 0.0, 0)
        dims = SmoothingDims(m_tilde=3, n_tilde=3, p_tilde=2)
        ref = smooth(obs, dims).g.copy()
        buf = np.empty_like(ref)
        out = smooth(obs, dims, out=buf)
        assert out.g is buf
        assert np.array_equal(out.g, ref)
        with pytest.raises(ValueError):
            smooth(obs, dims, out=np.empty((3, 3), dtype=complex))

    def test_brute_force_window_contents(self):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((3, 5, 6)) + 1j * rng.standard_normal((3, 5, 6))
        obs = ObservationTensor(data=data, noise_var=0.0)
        dims = SmoothingDims(m_tilde=2, n_tilde=3, p_tilde=2)
        snap = smooth(obs, dims)
        for p0 in range(2):
            for m0 in range(4):
                for n0 in range(4):
                    col = snap.g[:, snap.column_index(p0, m0, n0)]
                    expect = np.array([
                        data[p0 + l, m0 + a, n0 + b]
                        for l in range(2) for b in range(3) for a in range(2)
                    ])
                    assert np.array_equal(col, expect)


class TestSampleCovariance:
    def test_single_column_outer_product(self):
        rng = np.random.default_rng(1)
        g = rng.standard_normal((6, 1)) + 1j * rng.standard_normal((6, 1))
        snap_like = smooth(
            ObservationTensor(rng.standard_normal((2, 3, 3)) + 0j, 0.0),
            SmoothingDims(m_tilde=2, n_tilde=2, p_tilde=1))
        snap_like.g = g
        cov = sample_covariance(snap_like)
        assert np.allclose(cov.psi, g @ g.conj().T, atol=1e-14)
        assert numerical_rank(cov.psi) == 1

    def test_hermitian_and_psd(self, desk_cfg, three_targets):
        obs = synthesize_observation(desk_cfg, three_targets, 0.5, seed=2)
        cov = sample_covariance(smooth(
            obs, SmoothingDims(m_tilde=4, n_tilde=4, p_tilde=3)))
        assert np.allclose(cov.psi, cov.psi.conj().T, atol=1e-13)
        eigvals = np.linalg.eigvalsh(cov.psi)
        assert eigvals.min() >= -1e-10 * np.trace(cov.psi).real / cov.dim

    def test_noiseless_rank_equals_target_count(self, desk_cfg, three_targets):
        obs = synthesize_observation(desk_cfg, three_targets, 0.0, 0)
        cov = sample_covariance(smooth(
            obs, SmoothingDims(m_tilde=5, n_tilde=5, p_tilde=4)))
        assert numerical_rank(cov.psi) == 3

    def test_decoherence_restores_rank(self, desk_cfg, three_targets):
        # small enough that the full single-snapshot outer product is cheap
        from dataclasses import replace
        cfg = replace(desk_cfg, num_subcarriers=12, num_symbols=10,
                      num_rx_antennas=4)
        obs = synthesize_observation(cfg, three_targets, 0.0, 0)
        b = obs.vectorize()
        unsmoothed = np.outer(b, b.conj())
        assert numerical_rank(unsmoothed) == 1
        cov = sample_covariance(smooth(
            obs, SmoothingDims(m_tilde=5, n_tilde=5, p_tilde=3)))
        assert numerical_rank(cov.psi) == 3

    def test_noise_only_covariance_near_identity(self):
        # small window keeps the dimension-to-snapshot ratio low enough for
        # the 5/sqrt(N_s) spectral envelope despite window overlap
        rng = np.random.default_rng(12)
        data = (rng.standard_normal((2, 30, 30))
                + 1j * rng.standard_normal((2, 30, 30))) / np.sqrt(2)
        obs = ObservationTensor(data=data, noise_var=1.0)
        dims = SmoothingDims(m_tilde=2, n_tilde=2, p_tilde=1)
        cov = sample_covariance(smooth(obs, dims))
        n_s = dims.num_snapshots_for(obs.shape)
        err = np.linalg.norm(cov.psi - np.eye(cov.dim), 2)
        assert err < 5.0 / np.sqrt(n_s)
