"""Estimation-variance lower bounds for the joint range/velocity/azimuth
problem.

The bound is assembled in the phase/azimuth domain (varphi, phi, theta) of
the full observation model, with the complex echo amplitudes and the noise
power treated as nuisance parameters: projecting the steering derivatives
onto the orthogonal complement of the steering span concentrates the
amplitudes out, and the noise power decouples exactly. Physical-unit bounds
follow from the constant phase-to-parameter slopes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import C, PhaseTriple, SystemConfig, Target, derive_phases, steering_vector


class FisherSingularError(ValueError):
    """The Fisher information is singular; two targets coincide."""


@dataclass
class CrbReport:
    """Per-target variance bounds plus their roots, one entry per target.

    Azimuth bounds are reported in both rad^2 and deg^2; the full
    phase-domain matrix is retained for diagnostics.
    """

    crb_range_m2: np.ndarray
    crb_velocity_mps2: np.ndarray
    crb_azimuth_rad2: np.ndarray
    crb_azimuth_deg2: np.ndarray
    rcrb_range_m: np.ndarray
    rcrb_velocity_mps: np.ndarray
    rcrb_azimuth_rad: np.ndarray
    rcrb_azimuth_deg: np.ndarray
    phase_domain: np.ndarray


def _steering_and_derivatives(cfg: SystemConfig, target: Target):
    """Full-size steering vector and its three parameter derivatives.

    The azimuth derivative chains through the spatial phase:
    d(psi)/d(theta) = 2*pi*d*cos(theta)/lambda.
    """
    ph: PhaseTriple = derive_phases(target, cfg)
    p, m, n = cfg.num_rx_antennas, cfg.num_symbols, cfg.num_subcarriers
    p_idx, n_idx, m_idx = np.arange(p), np.arange(n), np.arange(m)
    a_s = steering_vector("space", ph.psi, p)
    a_r = steering_vector("range", ph.varphi, n)
    a_d = steering_vector("doppler", ph.phi, m)

    a = np.einsum("p,n,m->pnm", a_s, a_r, a_d).ravel()
    d_varphi = np.einsum("p,n,m->pnm", a_s, -1j * n_idx * a_r, a_d).ravel()
    d_phi = np.einsum("p,n,m->pnm", a_s, a_r, 1j * m_idx * a_d).ravel()
    psi_slope = 2.0 * np.pi * cfg.antenna_spacing_m * np.cos(target.azimuth_rad) \
        / cfg.wavelength_m
    d_theta = psi_slope * np.einsum("p,n,m->pnm", 1j * p_idx * a_s, a_r, a_d).ravel()
    return a, d_varphi, d_phi, d_theta


def steering_matrix(cfg: SystemConfig, targets) -> np.ndarray:
    """Stack the full-size steering vectors of all targets as columns."""
    return np.stack([_steering_and_derivatives(cfg, t)[0] for t in targets], axis=1)


def orthogonal_complement_projector(a: np.ndarray) -> np.ndarray:
    """Materialized projector I - A (A^H A)^{-1} A^H onto the complement of
    span(A). Quadratic in the observation size; meant for small problems and
    property tests, the bound assembly below never forms it."""
    gram = a.conj().T @ a
    return np.eye(a.shape[0]) - a @ np.linalg.solve(gram, a.conj().T)


def crb_phase_domain(cfg: SystemConfig, targets, noise_var: float) -> np.ndarray:
    """3K x 3K bound on (varphi_0..K-1, phi_0..K-1, theta_0..K-1).

    Scales exactly linearly in the noise power. Raises FisherSingularError
    when two targets share all three phase parameters, and falls back to a
    trace-scaled jitter (with a warning) if the Fisher matrix is numerically
    indefinite for any other reason.
    """
    k = len(targets)
    if k < 1:
        raise ValueError("need at least one target")
    if noise_var <= 0:
        raise ValueError("noise variance must be positive for a finite bound")

    phases = [derive_phases(t, cfg) for t in targets]
    for i in range(k):
        for j in range(i + 1, k):
            di = (phases[i].varphi - phases[j].varphi,
                  phases[i].phi - phases[j].phi,
                  phases[i].psi - phases[j].psi)
            if max(abs(x) for x in di) < 1e-12:
                raise FisherSingularError(
                    f"targets {i} and {j} coincide in all three phase "
                    "parameters; the Fisher information is singular"
                )

    cols = [_steering_and_derivatives(cfg, t) for t in targets]
    a = np.stack([c[0] for c in cols], axis=1)
    deriv = np.stack([c[1] for c in cols] + [c[2] for c in cols]
                     + [c[3] for c in cols], axis=1)

    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise FisherSingularError(
            f"steering matrix is rank deficient (singular values "
            f"{sv[0]:.3e} .. {sv[-1]:.3e}); targets are not separable"
        )

    # deriv^H P_A^perp deriv without materializing the projector
    gram_dd = deriv.conj().T @ deriv
    gram_da = deriv.conj().T @ a
    gram_aa = a.conj().T @ a
    projected = gram_dd - gram_da @ np.linalg.solve(gram_aa, gram_da.conj().T)

    beta = np.array([t.amplitude for t in targets], dtype=complex)
    outer = np.outer(beta, beta.conj())
    # the elementwise weight is the blockwise-tiled transpose of beta beta^H;
    # transpose equals conjugate for a Hermitian rank-one block
    weight = np.tile(outer.conj(), (3, 3))
    fisher = (2.0 / noise_var) * np.real(projected * weight)

    try:
        factor = cho_factor(fisher)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.trace(fisher)
        warnings.warn(
            f"Fisher matrix nearly singular; stabilizing with jitter {jitter:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
        try:
            factor = cho_factor(fisher + jitter * np.eye(3 * k))
        except np.linalg.LinAlgError as exc:
            raise FisherSingularError(
                "Fisher matrix is singular even after jitter; targets are "
                "too close to separate"
            ) from exc
    bound = cho_solve(factor, np.eye(3 * k))
    return 0.5 * (bound + bound.T)


def crb_parameter_domain(crb_phase: np.ndarray, cfg: SystemConfig,
                         targets) -> CrbReport:
    """Convert phase-domain variances to physical units.

    range variance = (c / (4*pi*spacing))^2 * varphi variance,
    velocity variance = (lambda / (4*pi*Tbar))^2 * phi variance,
    azimuth variance passes through (already in rad^2).
    """
    k = len(targets)
    if crb_phase.shape != (3 * k, 3 * k):
        raise ValueError(
            f"phase-domain matrix shape {crb_phase.shape} does not match "
            f"{k} targets"
        )
    diag = np.diag(crb_phase)
    var_varphi = diag[:k]
    var_phi = diag[k:2 * k]
    var_theta = diag[2 * k:]

    range_slope = C / (4.0 * np.pi * cfg.subcarrier_spacing_hz)
    velocity_slope = cfg.wavelength_m / (4.0 * np.pi * cfg.total_symbol_duration_s)
    crb_range = range_slope ** 2 * var_varphi
    crb_velocity = velocity_slope ** 2 * var_phi
    deg_per_rad2 = np.degrees(1.0) ** 2
    return CrbReport(
        crb_range_m2=crb_range,
        crb_velocity_mps2=crb_velocity,
        crb_azimuth_rad2=var_theta.copy(),
        crb_azimuth_deg2=var_theta * deg_per_rad2,
        rcrb_range_m=np.sqrt(crb_range),
        rcrb_velocity_mps=np.sqrt(crb_velocity),
        rcrb_azimuth_rad=np.sqrt(var_theta),
        rcrb_azimuth_deg=np.sqrt(var_theta * deg_per_rad2),
        phase_domain=crb_phase,
    )


def crb_report(cfg: SystemConfig, targets, noise_var: float) -> CrbReport:
    """Convenience wrapper: phase-domain bound plus unit conversion."""
    return crb_parameter_domain(crb_phase_domain(cfg, targets, noise_var),
                                cfg, targets)
