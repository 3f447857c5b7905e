"""Auto-paired joint range/velocity/azimuth estimation.

Shifting the smoothing window by one subcarrier, one symbol or one antenna
multiplies every target's contribution by a unit-modulus phase. Selecting
the matching row subsets of the signal subspace therefore yields three
shift operators that share one eigenvector matrix; diagonalizing the
range operator and reusing its eigenvectors on the other two recovers all
three parameters of each target as a consistent triple, with no separate
pairing search.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .model import C, ObservationTensor, SystemConfig
from .smoothing import SmoothingDims, sample_covariance, smooth
from .subspace import SignalSubspace, evd_signal_subspace, fsd_signal_subspace


class DegenerateGeometryError(ValueError):
    """A selected subspace block lost column rank; the shift systems are
    unsolvable (typically coinciding targets or too-small windows)."""


@dataclass(frozen=True)
class SelectionOperators:
    """Row-index maps realizing the six window-shift selections.

    Applying a (j1, j2) pair to a windowed steering vector satisfies
    j2-rows = j1-rows times the per-target shift phase: exp(-j*varphi) on
    the subcarrier axis, exp(+j*phi) on the symbol axis, exp(+j*psi) on the
    antenna axis.
    """

    dims: SmoothingDims
    j1_range: np.ndarray
    j2_range: np.ndarray
    j1_velocity: np.ndarray
    j2_velocity: np.ndarray
    j1_azimuth: np.ndarray
    j2_azimuth: np.ndarray

    @property
    def row_counts(self) -> dict:
        return {
            "range": self.j1_range.size,
            "velocity": self.j1_velocity.size,
            "azimuth": self.j1_azimuth.size,
        }


def build_selection_operators(dims: SmoothingDims) -> SelectionOperators:
    """Construct the shift selections for the given window sizes.

    Every axis needs window length >= 2, otherwise there is no pair of
    shifted sub-windows to compare along it.
    """
    for name, value in (("symbol", dims.m_tilde), ("subcarrier", dims.n_tilde),
                        ("antenna", dims.p_tilde)):
        if value < 2:
            raise ValueError(
                f"{name} window must be >= 2 to expose a shift along that axis"
            )
    idx = np.arange(dims.num_elements).reshape(
        dims.p_tilde, dims.n_tilde, dims.m_tilde)
    return SelectionOperators(
        dims=dims,
        j1_range=idx[:, :-1, :].ravel(),
        j2_range=idx[:, 1:, :].ravel(),
        j1_velocity=idx[:, :, :-1].ravel(),
        j2_velocity=idx[:, :, 1:].ravel(),
        j1_azimuth=idx[:-1, :, :].ravel(),
        j2_azimuth=idx[1:, :, :].ravel(),
    )


@dataclass
class EstimateSet:
    """Auto-paired estimates, sorted by range; row i of every field belongs
    to the same target.

    The raw operator eigenvalues are kept for diagnostics: under good SNR
    they sit close to the unit circle. cond_eigvecs is the condition number
    of the shared eigenvector matrix, and the diag_residual fields measure
    how far the velocity/azimuth operators are from being diagonalized by
    it (exactly zero only for the noiseless covariance).
    """

    range_m: np.ndarray
    velocity_mps: np.ndarray
    azimuth_rad: np.ndarray
    eigvals_range: np.ndarray
    eigvals_velocity: np.ndarray
    eigvals_azimuth: np.ndarray
    cond_eigvecs: float
    diag_residual_velocity: float
    diag_residual_azimuth: float
    azimuth_clamped: np.ndarray = field(default_factory=lambda: np.zeros(0, bool))

    @property
    def azimuth_deg(self) -> np.ndarray:
        return np.degrees(self.azimuth_rad)

    def triples(self) -> np.ndarray:
        """(K, 3) array of (range_m, velocity_mps, azimuth_rad) rows."""
        return np.column_stack([self.range_m, self.velocity_mps, self.azimuth_rad])


def _shift_operator(u1: np.ndarray, u2: np.ndarray, axis: str) -> np.ndarray:
    """Least-squares solve of u1 @ T = u2 with an explicit rank guard."""
    sv = np.linalg.svd(u1, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise DegenerateGeometryError(
            f"rank-deficient {axis} selection block (singular values "
            f"{sv[0]:.3e} .. {sv[-1]:.3e}); cannot solve the shift system"
        )
    solution, _, _, _ = np.linalg.lstsq(u1, u2, rcond=None)
    return solution


def _normalize_eigvecs(vecs: np.ndarray) -> np.ndarray:
    """Unit-length columns with the first significant entry real-positive,
    making the eigenbasis deterministic up to eigenvalue ordering."""
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    out = vecs.copy()
    for col in range(vecs.shape[1]):
        v = vecs[:, col]
        nz = np.flatnonzero(np.abs(v) > 1e-12 * np.abs(v).max())
        anchor = v[nz[0]] if nz.size else 1.0
        out[:, col] = v * (np.abs(anchor) / anchor)
    return out


def estimate(subspace: SignalSubspace, ops: SelectionOperators,
             cfg: SystemConfig, k: int) -> EstimateSet:
    """Turn a signal subspace into auto-paired parameter triples.

    Solves the three shift systems on the selected subspace rows,
    eigendecomposes the range operator, reuses its eigenvectors to read off
    the velocity and azimuth eigenvalues, and maps eigenvalue angles to
    physical units. Output is sorted by ascending range.
    """
    u_s = subspace.u_s
    if u_s.shape[1] != k:
        raise ValueError(f"subspace has {u_s.shape[1]} columns, expected k={k}")
    min_rows = min(ops.row_counts.values())
    if k > min_rows:
        raise ValueError(
            f"k={k} exceeds the smallest selection row count {min_rows}; "
            "enlarge the smoothing windows"
        )

    t_range = _shift_operator(u_s[ops.j1_range], u_s[ops.j2_range], "range")
    t_velocity = _shift_operator(u_s[ops.j1_velocity], u_s[ops.j2_velocity],
                                 "velocity")
    t_azimuth = _shift_operator(u_s[ops.j1_azimuth], u_s[ops.j2_azimuth],
                                "azimuth")

    lam_range, vecs = np.linalg.eig(t_range)
    vecs = _normalize_eigvecs(vecs)
    sv = np.linalg.svd(vecs, compute_uv=False)
    cond_eigvecs = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf

    # same eigenvectors diagonalize the other two operators; off-diagonal
    # leakage is pure estimation noise and is reported, not used
    similar_v = np.linalg.solve(vecs, t_velocity @ vecs)
    similar_a = np.linalg.solve(vecs, t_azimuth @ vecs)
    lam_velocity = np.diag(similar_v).copy()
    lam_azimuth = np.diag(similar_a).copy()
    resid_v = float(np.linalg.norm(similar_v - np.diag(lam_velocity)))
    resid_a = float(np.linalg.norm(similar_a - np.diag(lam_azimuth)))

    ranges = -np.angle(lam_range) * C / (4.0 * np.pi * cfg.subcarrier_spacing_hz)
    velocities = np.angle(lam_velocity) * C / (
        4.0 * np.pi * cfg.carrier_freq_hz * cfg.total_symbol_duration_s)
    sin_arg = cfg.wavelength_m * np.angle(lam_azimuth) / (
        2.0 * np.pi * cfg.antenna_spacing_m)
    clamped = np.abs(sin_arg) > 1.0
    azimuths = np.arcsin(np.clip(sin_arg, -1.0, 1.0))

    order = np.argsort(ranges)
    return EstimateSet(
        range_m=ranges[order],
        velocity_mps=velocities[order],
        azimuth_rad=azimuths[order],
        eigvals_range=lam_range[order],
        eigvals_velocity=lam_velocity[order],
        eigvals_azimuth=lam_azimuth[order],
        cond_eigvecs=cond_eigvecs,
        diag_residual_velocity=resid_v,
        diag_residual_azimuth=resid_a,
        azimuth_clamped=clamped[order],
    )


_workspaces = threading.local()


def _scratch(shape) -> np.ndarray:
    """Thread-local snapshot buffer; avoids refaulting hundreds of MB per
    Monte Carlo trial."""
    buf = getattr(_workspaces, "buf", None)
    if buf is None or buf.shape != shape:
        buf = np.empty(shape, dtype=np.complex128)
        _workspaces.buf = buf
    return buf


def run_3dje(obs: ObservationTensor, cfg: SystemConfig, dims: SmoothingDims,
             k: int, subspace_method: str = "evd",
             fsd_iters: int | None = None, seed=0) -> EstimateSet:
    """Full pipeline: smooth, covariance, subspace, auto-paired estimates.

    Args:
        obs: observation tensor.
        cfg: waveform constants, needed to map phases to physical units.
        dims: smoothing window sizes (all >= 2).
        k: number of targets (assumed known).
        subspace_method: "evd" or "fsd".
        fsd_iters: recursion depth for the fsd route (default max(4k, k+2)).
        seed: seeds the fsd start vector; the evd route ignores it.
    """
    if subspace_method not in ("evd", "fsd"):
        raise ValueError(f"unknown subspace method {subspace_method!r}")
    dims.validate_for(obs.shape)
    ops = build_selection_operators(dims)
    n_s = dims.num_snapshots_for(obs.shape)
    if k > min(min(ops.row_counts.values()), n_s):
        raise ValueError(
            f"k={k} exceeds what windows {dims} support on observation shape "
            f"{obs.shape} (selection rows {ops.row_counts}, snapshots {n_s})"
        )
    snap = smooth(obs, dims, out=_scratch((dims.num_elements, n_s)))
    cov = sample_covariance(snap)
    if subspace_method == "evd":
        sub = evd_signal_subspace(cov, k)
    else:
        sub = fsd_signal_subspace(cov, k, num_iters=fsd_iters, seed=seed)
    return estimate(sub, ops, cfg, k)
