"""Sub-signal smoothing and sample covariance.

A single observation tensor gives one snapshot of the equivalent array
model, so echoes from different targets are fully coherent. Sliding a
(p_tilde, m_tilde, n_tilde) window over the (antenna, symbol, subcarrier)
axes manufactures many overlapping sub-observations; stacking each window
into a column restores a rank-K covariance and enables subspace estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import blas

from .model import ObservationTensor


@dataclass(frozen=True)
class SmoothingDims:
    """Window lengths along the symbol (m_tilde), subcarrier (n_tilde) and
    antenna (p_tilde) axes."""

    m_tilde: int
    n_tilde: int
    p_tilde: int

    def __post_init__(self):
        if min(self.m_tilde, self.n_tilde, self.p_tilde) < 1:
            raise ValueError("window lengths must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "SmoothingDims":
        """Parse the CLI form 'P,M,N' (antenna, symbol, subcarrier windows)."""
        parts = [int(v) for v in text.split(",")]
        if len(parts) != 3:
            raise ValueError("window spec must be three comma-separated integers")
        p, m, n = parts
        return cls(m_tilde=m, n_tilde=n, p_tilde=p)

    @property
    def num_elements(self) -> int:
        """Rows of the snapshot matrix (N_L)."""
        return self.m_tilde * self.n_tilde * self.p_tilde

    def validate_for(self, shape) -> None:
        p, m, n = shape
        if not self.m_tilde < m:
            raise ValueError(f"symbol window {self.m_tilde} must be < {m}")
        if not self.n_tilde < n:
            raise ValueError(f"subcarrier window {self.n_tilde} must be < {n}")
        if p > 1:
            if not self.p_tilde < p:
                raise ValueError(f"antenna window {self.p_tilde} must be < {p}")
        elif self.p_tilde != 1:
            raise ValueError("antenna window must be 1 for a single-antenna observation")

    def num_snapshots_for(self, shape) -> int:
        p, m, n = shape
        return (n - self.n_tilde + 1) * (m - self.m_tilde + 1) * (p - self.p_tilde + 1)


@dataclass
class SnapshotMatrix:
    """Smoothed sub-signals, one window per column.

    Within a column the symbol offset runs fastest, then the subcarrier
    offset, then the antenna offset (row = l*n_tilde*m_tilde + b*m_tilde + a).
    column_index gives the fixed enumeration order of the columns.
    """

    g: np.ndarray
    dims: SmoothingDims
    obs_shape: tuple

    @property
    def num_snapshots(self) -> int:
        return self.g.shape[1]

    def column_index(self, p_origin: int, m_origin: int, n_origin: int) -> int:
        """Column holding the window whose origin is (p_origin, m_origin,
        n_origin); origins are enumerated with the symbol origin fastest,
        then subcarrier, then antenna."""
        p, m, n = self.obs_shape
        m_span = m - self.dims.m_tilde + 1
        n_span = n - self.dims.n_tilde + 1
        if not (0 <= p_origin < p - self.dims.p_tilde + 1
                and 0 <= m_origin < m_span and 0 <= n_origin < n_span):
            raise IndexError("window origin out of range")
        return (p_origin * n_span + n_origin) * m_span + m_origin


@dataclass
class Covariance:
    """Hermitian sample covariance of the smoothed snapshots."""

    psi: np.ndarray

    @property
    def dim(self) -> int:
        return self.psi.shape[0]


def smooth(obs: ObservationTensor, dims: SmoothingDims,
           out: np.ndarray | None = None) -> SnapshotMatrix:
    """Reconstruct the observation into overlapping windowed snapshots.

    Args:
        obs: (P, M, N) observation tensor.
        dims: window lengths; each must be strictly smaller than its axis
            (the antenna window may equal 1 when P == 1).
        out: optional preallocated (num_elements, num_snapshots) complex
            buffer; reusing one across calls avoids repeated large
            allocations in Monte Carlo loops.

    Returns:
        SnapshotMatrix whose columns satisfy the windowed steering model.
    """
    dims.validate_for(obs.shape)
    p, m, n = obs.shape
    n_l = dims.num_elements
    n_s = dims.num_snapshots_for(obs.shape)

    # With axes reordered to (antenna, subcarrier, symbol), windows and
    # window origins swap roles: sliding a window of *origin-span* size
    # enumerates, per window-offset, the values at every origin. This yields
    # the (N_L, N_s) matrix in one contiguous-inner-loop copy.
    y = np.ascontiguousarray(obs.data.transpose(0, 2, 1))
    span = (p - dims.p_tilde + 1, n - dims.n_tilde + 1, m - dims.m_tilde + 1)
    view = sliding_window_view(y, span).reshape(n_l, n_s)
    if out is None:
        g = np.ascontiguousarray(view)
    else:
        if out.shape != (n_l, n_s) or out.dtype != np.complex128:
            raise ValueError(f"out buffer must be complex128 with shape {(n_l, n_s)}")
        np.copyto(out, view)
        g = out
    return SnapshotMatrix(g=g, dims=dims, obs_shape=obs.shape)


def sample_covariance(snap: SnapshotMatrix) -> Covariance:
    """Average the outer products of all snapshot columns and symmetrize.

    The accumulation is a single rank-N_s Hermitian update with a fixed
    internal order, so repeated runs are bit-identical.
    """
    g = snap.g
    n_s = g.shape[1]
    if n_s < 1:
        raise ValueError("need at least one snapshot")
    if g.flags.c_contiguous and g.dtype == np.complex128:
        # g.T is Fortran-order, so BLAS consumes it without a copy;
        # herk('C') returns conj(g @ g^H) in one triangle.
        half = blas.zherk(1.0 / n_s, g.T, trans=2, lower=1)
        psi = np.conj(half + np.tril(half, -1).conj().T)
    else:
        psi = (g @ g.conj().T) / n_s
    psi = 0.5 * (psi + psi.conj().T)
    return Covariance(psi=psi)
