import numpy as np
import pytest

from ofdm_isac import (FisherSingularError, SystemConfig, Target,
                       crb_parameter_domain, crb_phase_domain, crb_report,
                       get_preset)
from ofdm_isac.crb import _steering_and_derivatives, orthogonal_complement_projector


def oracle_steering(cfg, range_m, velocity, theta):
    """Independent forward model: steering vector built from raw loops over
    the three physical parameters (no shared code with the production path
    beyond the constants)."""
    c = 3e8
    varphi = 4 * np.pi * cfg.subcarrier_spacing_hz * range_m / c
    phi = 4 * np.pi * cfg.carrier_freq_hz * velocity \
        * cfg.total_symbol_duration_s / c
    psi = 2 * np.pi * cfg.antenna_spacing_m * np.sin(theta) / cfg.wavelength_m
    p = np.arange(cfg.num_rx_antennas)
    n = np.arange(cfg.num_subcarriers)
    m = np.arange(cfg.num_symbols)
    grid = (p[:, None, None] * psi + m[None, None, :] * phi
            - n[None, :, None] * varphi)
    return np.exp(1j * grid).ravel()


def small_cfg(n=16, m=8, p=4):
    lam = 3e8 / 27e9
    return SystemConfig(27e9, 120e3, n, m, p, lam / 2, 0.59e-6)


class TestPhaseDomain:
    def test_linear_scaling_in_noise_power(self):
        cfg = small_cfg()
        targets = [Target(30.0, 12.0, 0.3), Target(55.0, -40.0, -0.7)]
        low = crb_phase_domain(cfg, targets, 0.5)
        high = crb_phase_domain(cfg, targets, 5.0)
        assert np.allclose(high, 10.0 * low, rtol=1e-12)

    def test_symmetric_positive_definite(self):
        cfg = small_cfg()
        targets = [Target(30.0, 12.0, 0.3), Target(55.0, -40.0, -0.7),
                   Target(70.0, 100.0, 0.9)]
        bound = crb_phase_domain(cfg, targets, 1.0)
        assert np.allclose(bound, bound.T, atol=1e-14)
        assert np.linalg.eigvalsh(bound).min() > 0

    def test_derivatives_match_central_differences(self):
        cfg = small_cfg()
        tgt = Target(42.0, 33.0, 0.5)
        _, d_varphi, d_phi, d_theta = _steering_and_derivatives(cfg, tgt)

        c = 3e8
        h = 1e-6
        # vary each physical/phase parameter symmetrically
        r_step = h * c / (4 * np.pi * cfg.subcarrier_spacing_hz)
        fd_varphi = (oracle_steering(cfg, tgt.range_m + r_step, 33.0, 0.5)
                     - oracle_steering(cfg, tgt.range_m - r_step, 33.0, 0.5)) / (2 * h)
        v_step = h * c / (4 * np.pi * cfg.carrier_freq_hz
                          * cfg.total_symbol_duration_s)
        fd_phi = (oracle_steering(cfg, 42.0, 33.0 + v_step, 0.5)
                  - oracle_steering(cfg, 42.0, 33.0 - v_step, 0.5)) / (2 * h)
        fd_theta = (oracle_steering(cfg, 42.0, 33.0, 0.5 + h)
                    - oracle_steering(cfg, 42.0, 33.0, 0.5 - h)) / (2 * h)

        for got, ref in [(d_varphi, fd_varphi), (d_phi, fd_phi),
                         (d_theta, fd_theta)]:
            assert np.abs(got - ref).max() / np.abs(ref).max() < 1e-6

    def test_single_target_fisher_oracle(self):
        # brute-force expected log-likelihood curvature over the five
        # non-noise parameters (Re/Im amplitude plus the three phases of
        # interest), inverted and compared on the phase block
        cfg = small_cfg()
        tgt = Target(35.0, 15.0, np.deg2rad(20.0), amplitude=0.8 * np.exp(0.4j))
        noise_var = 0.7
        theta0 = np.array([tgt.amplitude.real, tgt.amplitude.imag,
                           tgt.range_m, tgt.velocity_mps, tgt.azimuth_rad])
        s0 = (theta0[0] + 1j * theta0[1]) * oracle_steering(
            cfg, theta0[2], theta0[3], theta0[4])

        c = 3e8
        scale = np.array([1.0, 1.0,
                          c / (4 * np.pi * cfg.subcarrier_spacing_hz),
                          c / (4 * np.pi * cfg.carrier_freq_hz
                               * cfg.total_symbol_duration_s),
                          1.0])

        def neg_expected_loglik(params):
            # curvature target: ||s0 - s(params)||^2 / noise_var (constant
            # terms vanish under differencing)
            s = (params[0] + 1j * params[1]) * oracle_steering(
                cfg, params[2], params[3], params[4])
            diff = s0 - s
            return np.vdot(diff, diff).real / noise_var

        h = 1e-5
        fisher = np.zeros((5, 5))
        for i in range(5):
            for j in range(i, 5):
                hi = np.zeros(5)
                hj = np.zeros(5)
                hi[i] = h * scale[i]
                hj[j] = h * scale[j]
                if i == j:
                    val = (neg_expected_loglik(theta0 + hi)
                           - 2 * neg_expected_loglik(theta0)
                           + neg_expected_loglik(theta0 - hi)) / (h * scale[i]) ** 2
                else:
                    val = (neg_expected_loglik(theta0 + hi + hj)
                           - neg_expected_loglik(theta0 + hi - hj)
                           - neg_expected_loglik(theta0 - hi + hj)
                           + neg_expected_loglik(theta0 - hi - hj)) \
                        / (4 * (h * scale[i]) * (h * scale[j]))
                fisher[i, j] = fisher[j, i] = val

        oracle_crb = np.linalg.inv(fisher)
        report = crb_report(cfg, [tgt], noise_var)
        assert report.crb_range_m2[0] == pytest.approx(oracle_crb[2, 2], rel=5e-3)
        assert report.crb_velocity_mps2[0] == pytest.approx(oracle_crb[3, 3],
                                                            rel=5e-3)
        assert report.crb_azimuth_rad2[0] == pytest.approx(oracle_crb[4, 4],
                                                           rel=5e-3)

    def test_coinciding_targets_named(self):
        cfg = small_cfg()
        targets = [Target(30.0, 12.0, 0.3), Target(30.0, 12.0, 0.3)]
        with pytest.raises(FisherSingularError, match="0 and 1"):
            crb_phase_domain(cfg, targets, 1.0)

    def test_nonpositive_noise_rejected(self):
        with pytest.raises(ValueError):
            crb_phase_domain(small_cfg(), [Target(30.0, 0.0, 0.0)], 0.0)


class TestProjector:
    def test_idempotent_and_annihilates(self):
        cfg = small_cfg(n=8, m=6, p=3)
        targets = [Target(30.0, 12.0, 0.3), Target(55.0, -40.0, -0.7)]
        from ofdm_isac.crb import steering_matrix
        a = steering_matrix(cfg, targets)
        proj = orthogonal_complement_projector(a)
        assert np.linalg.norm(proj @ proj - proj) < 1e-10
        assert np.linalg.norm(proj @ a) < 1e-10 * np.linalg.norm(a)
        assert np.linalg.norm(proj - proj.conj().T) < 1e-10


class TestParameterDomain:
    def test_constant_unit_slopes(self):
        cfg = get_preset("nr120")
        targets = [Target(35.0, 15.0, np.deg2rad(20.0)),
                   Target(60.0, 10.0, np.deg2rad(-20.0))]
        phase = crb_phase_domain(cfg, targets, 1.0)
        report = crb_parameter_domain(phase, cfg, targets)
        c = 3e8
        r_slope = (c / (4 * np.pi * cfg.subcarrier_spacing_hz)) ** 2
        v_slope = (cfg.wavelength_m / (4 * np.pi
                                       * cfg.total_symbol_duration_s)) ** 2
        for i in range(2):
            assert report.crb_range_m2[i] == phase[i, i] * r_slope
            assert report.crb_velocity_mps2[i] == phase[2 + i, 2 + i] * v_slope
            assert report.crb_azimuth_rad2[i] == phase[4 + i, 4 + i]
        assert np.allclose(report.rcrb_range_m,
                           np.sqrt(report.crb_range_m2))
        assert np.allclose(report.crb_azimuth_deg2,
                           report.crb_azimuth_rad2 * (180 / np.pi) ** 2)

    def test_three_target_sweep_monotone(self, three_targets):
        # exact -1 slope on a log-log axis: tenfold noise, sqrt(10) bound root
        cfg = get_preset("nr120")
        prev = None
        for snr_db in (-20, -10, 0):
            report = crb_report(cfg, three_targets, 10 ** (-snr_db / 10))
            assert np.all(report.rcrb_range_m > 0)
            assert np.all(np.isfinite(report.rcrb_range_m))
            if prev is not None:
                assert np.allclose(report.rcrb_range_m,
                                   prev.rcrb_range_m / np.sqrt(10), rtol=1e-10)
                assert np.allclose(report.rcrb_azimuth_deg,
                                   prev.rcrb_azimuth_deg / np.sqrt(10),
                                   rtol=1e-10)
            prev = report

    def test_separated_targets_approach_single_target_bound(self):
        # far-apart targets: mutual interference terms vanish, so each
        # diagonal approaches its isolated single-target value
        cfg = small_cfg(n=32, m=16, p=8)
        targets = [Target(20.0, -150.0, -1.0), Target(50.0, 0.0, 0.0),
                   Target(80.0, 150.0, 1.0)]
        joint = crb_report(cfg, targets, 1.0)
        for i, tgt in enumerate(targets):
            alone = crb_report(cfg, [tgt], 1.0)
            assert joint.crb_range_m2[i] == pytest.approx(
                alone.crb_range_m2[0], rel=0.05)
            assert joint.crb_velocity_mps2[i] == pytest.approx(
                alone.crb_velocity_mps2[0], rel=0.05)
            assert joint.crb_azimuth_rad2[i] == pytest.approx(
                alone.crb_azimuth_rad2[0], rel=0.05)

    def test_shape_mismatch_rejected(self):
        cfg = small_cfg()
        with pytest.raises(ValueError):
            crb_parameter_domain(np.eye(3), cfg,
                                 [Target(30.0, 0.0, 0.0),
                                  Target(40.0, 0.0, 0.0)])
