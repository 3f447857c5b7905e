import numpy as np
import pytest

from ofdm_isac import SystemConfig, Target


def subspace_gap(u, v):
    """Sine of the largest principal angle between two orthonormal spans,
    via the projector difference (stable down to machine precision, unlike
    sqrt(1 - cos^2))."""
    diff = u @ u.conj().T - v @ v.conj().T
    return float(np.linalg.norm(diff, 2))


def triple_loop_observation(cfg, targets):
    """Scalar-at-a-time reference synthesis, independent of the vectorized
    production path."""
    p, m, n = cfg.num_rx_antennas, cfg.num_symbols, cfg.num_subcarriers
    lam = cfg.wavelength_m
    out = np.zeros((p, m, n), dtype=complex)
    for tgt in targets:
        varphi = 4 * np.pi * cfg.subcarrier_spacing_hz * tgt.range_m / 3e8
        phi = 4 * np.pi * cfg.carrier_freq_hz * tgt.velocity_mps \
            * cfg.total_symbol_duration_s / 3e8
        psi = 2 * np.pi * cfg.antenna_spacing_m * np.sin(tgt.azimuth_rad) / lam
        for pi in range(p):
            for mi in range(m):
                for ni in range(n):
                    out[pi, mi, ni] += tgt.amplitude * np.exp(
                        1j * (pi * psi + mi * phi - ni * varphi))
    return out


@pytest.fixture
def desk_cfg():
    """Small configuration for fast module tests."""
    lam = 3e8 / 27e9
    return SystemConfig(
        carrier_freq_hz=27e9,
        subcarrier_spacing_hz=120e3,
        num_subcarriers=40,
        num_symbols=24,
        num_rx_antennas=8,
        antenna_spacing_m=lam / 2,
        cp_duration_s=0.59e-6,
        psk_order=4,
    )


@pytest.fixture
def single_target():
    return Target(range_m=35.0, velocity_mps=15.0, azimuth_rad=np.deg2rad(20.0))


@pytest.fixture
def three_targets():
    return [
        Target(35.0, 15.0, np.deg2rad(20.0)),
        Target(60.0, 10.0, np.deg2rad(-20.0)),
        Target(80.0, -10.0, np.deg2rad(50.0)),
    ]
