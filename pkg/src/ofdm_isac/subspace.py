"""Signal-subspace extraction from the snapshot covariance.

Two interchangeable routes: a dense Hermitian eigendecomposition, and a
Lanczos-based fast subspace decomposition that touches the covariance only
through d matrix-vector-style products (O(d*n^2) instead of O(n^3)).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .smoothing import Covariance


class SubspaceSeparationWarning(UserWarning):
    """Signal and noise eigenvalues are too close to split reliably."""


@dataclass
class SignalSubspace:
    """Orthonormal basis of the dominant eigenspace.

    u_s has orthonormal columns; sigma_s holds the matching eigenvalues in
    descending order.
    """

    u_s: np.ndarray
    sigma_s: np.ndarray


def evd_signal_subspace(cov: Covariance, k: int) -> SignalSubspace:
    """Dense route: eigenvectors of the k largest eigenvalues.

    Warns (without failing) when eigenvalues k and k+1 coincide to within
    1e-12 of the trace, since the returned span is then ill-determined.
    """
    n = cov.dim
    if not 0 < k < n:
        raise ValueError(f"subspace dimension k={k} must satisfy 0 < k < {n}")
    psi = 0.5 * (cov.psi + cov.psi.conj().T)
    eigvals, eigvecs = np.linalg.eigh(psi)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    gap = eigvals[k - 1] - eigvals[k]
    if gap <= 1e-12 * abs(np.trace(psi).real):
        warnings.warn(
            f"eigenvalues {k} and {k + 1} differ by only {gap:.3e}; "
            "the signal subspace is ill-separated",
            SubspaceSeparationWarning,
            stacklevel=2,
        )
    return SignalSubspace(u_s=np.ascontiguousarray(eigvecs[:, :k]),
                          sigma_s=eigvals[:k].copy())


def _default_iterations(k: int) -> int:
    return max(4 * k, k + 2)


def _lanczos(psi: np.ndarray, d: int, seed):
    """Three-term recursion with full reorthogonalization.

    The start vector is a seeded random unit vector pushed once through the
    matrix: starting inside range(Psi) drops the null-space component, so a
    covariance of exact rank k is captured in k steps instead of k+1. Stops
    early once the residual norm collapses (Krylov space exhausted). Returns
    the orthonormal basis, the recursion coefficients, and the final
    residual.
    """
    n = psi.shape[0]
    # residual-collapse threshold, scaled so it tracks the matrix magnitude
    b_tol = 1e-14 * max(1.0, float(np.linalg.norm(psi, "fro")))

    rng = np.random.default_rng(seed)
    start = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    start /= np.linalg.norm(start)
    r = psi @ start
    norm_r = np.linalg.norm(r)
    if norm_r < b_tol:
        raise ValueError("covariance is numerically zero; no signal subspace")
    r /= norm_r

    basis = np.zeros((n, d), dtype=np.complex128)
    alphas = np.zeros(d)
    betas = np.zeros(d)
    b_prev = 1.0
    q_prev = np.zeros(n, dtype=np.complex128)
    steps = 0
    for j in range(d):
        q = r / b_prev
        basis[:, j] = q
        steps = j + 1
        w = psi @ q
        alphas[j] = np.vdot(q, w).real
        r = w - alphas[j] * q - b_prev * q_prev
        # reorthogonalize twice; the plain recursion loses orthogonality in
        # floating point once eigenvalues cluster
        for _ in range(2):
            r -= basis[:, :steps] @ (basis[:, :steps].conj().T @ r)
        b_prev = np.linalg.norm(r)
        betas[j] = b_prev
        q_prev = q
        if b_prev < b_tol:
            break
    return basis[:, :steps], alphas[:steps], betas[:steps], r, b_tol


def fsd_signal_subspace(cov: Covariance, k: int, num_iters: int | None = None,
                        seed=0) -> SignalSubspace:
    """Fast route: Lanczos recursion, then a small dense eigenproblem.

    Runs num_iters (default max(4k, k+2)) recursion steps, projects the
    covariance onto the resulting basis G, and lifts the dominant
    eigenvectors of G^H Psi G back through G. Early Krylov exhaustion is
    accepted as long as at least k basis vectors were produced (the
    invariant subspace is then already captured); fewer is an error.
    """
    n = cov.dim
    d = _default_iterations(k) if num_iters is None else num_iters
    if k < 1:
        raise ValueError("subspace dimension must be >= 1")
    if not k <= d <= n:
        raise ValueError(f"iteration count d={d} must satisfy k <= d <= {n}")
    g, _, _, _, _ = _lanczos(cov.psi, d, seed)
    if g.shape[1] < k:
        raise ValueError(
            f"Krylov space exhausted after {g.shape[1]} iterations (< k={k}); "
            "the covariance rank is smaller than the requested subspace"
        )
    projected = g.conj().T @ (cov.psi @ g)
    projected = 0.5 * (projected + projected.conj().T)
    eigvals, eigvecs = np.linalg.eigh(projected)
    top = eigvecs[:, ::-1][:, :k]
    return SignalSubspace(u_s=np.ascontiguousarray(g @ top),
                          sigma_s=eigvals[::-1][:k].copy())


def lanczos_diagnostics(cov: Covariance, k: int, num_iters: int | None = None,
                        seed=0) -> dict:
    """Report how well the produced basis tridiagonalizes the covariance."""
    d = _default_iterations(k) if num_iters is None else num_iters
    g, alphas, betas, r, b_tol = _lanczos(cov.psi, d, seed)
    steps = g.shape[1]
    tri = np.diag(alphas).astype(complex)
    tri += np.diag(betas[:-1], 1) + np.diag(betas[:-1], -1)
    resid = cov.psi @ g - g @ tri
    if steps > 0 and betas[-1] >= b_tol:
        # unconverged tail: the recursion leaves b_d * q_{d+1} on column d
        resid[:, -1] -= r
    return {
        "steps": steps,
        "recurrence_residual": float(np.linalg.norm(resid)),
        "basis_orthonormality": float(
            np.linalg.norm(g.conj().T @ g - np.eye(steps))),
        "matrix_norm": float(np.linalg.norm(cov.psi, 2)),
    }
