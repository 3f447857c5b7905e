"""Grid-based reference estimators.

Classic periodogram processing: transform the observation onto an
oversampled range/Doppler (and optionally angle) grid, pick the strongest
well-separated peaks, and refine each by parabolic interpolation. Accuracy
is limited by the grid cell, so these serve as the non-super-resolution
comparison floor for the subspace estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .model import C, ObservationTensor, SystemConfig


@dataclass
class PeriodogramGrid:
    """Magnitude grid with its bin-to-parameter calibration.

    Axes are (doppler, range) for the two-dimensional grid and
    (angle, doppler, range) for the three-dimensional one. parseval_factor
    is the constant by which total grid energy exceeds input energy for the
    complex transform underlying this grid.
    """

    magnitude: np.ndarray
    cfg: SystemConfig
    oversample: int
    n_fft_range: int
    n_fft_doppler: int
    n_fft_angle: int | None = None

    @property
    def parseval_factor(self) -> float:
        f = self.n_fft_doppler / self.n_fft_range
        if self.n_fft_angle is not None:
            f *= self.n_fft_angle
        return f

    def range_of_bin(self, b: float) -> float:
        # range phase is non-negative, so no signed wrap
        return (b % self.n_fft_range) * C / (
            2.0 * self.n_fft_range * self.cfg.subcarrier_spacing_hz)

    def velocity_of_bin(self, b: float) -> float:
        frac = (b / self.n_fft_doppler + 0.5) % 1.0 - 0.5
        phase = 2.0 * np.pi * frac
        return phase * C / (4.0 * np.pi * self.cfg.carrier_freq_hz
                            * self.cfg.total_symbol_duration_s)

    def azimuth_of_bin(self, b: float) -> float:
        if self.n_fft_angle is None:
            raise ValueError("grid has no angle axis")
        frac = (b / self.n_fft_angle + 0.5) % 1.0 - 0.5
        psi = 2.0 * np.pi * frac
        arg = self.cfg.wavelength_m * psi / (2.0 * np.pi * self.cfg.antenna_spacing_m)
        return float(np.arcsin(np.clip(arg, -1.0, 1.0)))


@dataclass
class GridEstimate:
    """Peaks found on a periodogram grid, sorted by ascending range.

    azimuth_rad is NaN-filled when the grid has no angle axis. shortfall is
    set when fewer than the requested number of separable peaks exist.
    """

    range_m: np.ndarray
    velocity_mps: np.ndarray
    azimuth_rad: np.ndarray
    shortfall: bool
    grid: PeriodogramGrid

    def triples(self) -> np.ndarray:
        return np.column_stack([self.range_m, self.velocity_mps, self.azimuth_rad])


def range_doppler_transform(z: np.ndarray, oversample: int) -> np.ndarray:
    """Complex (doppler, range) grid for one antenna's (symbol, subcarrier)
    slab: forward transform along symbols, inverse along subcarriers, both
    zero-padded by the oversampling factor."""
    m, n = z.shape
    return np.fft.fft(np.fft.ifft(z, n=oversample * n, axis=1),
                      n=oversample * m, axis=0)


def _find_peaks(mag: np.ndarray, k: int, min_sep_bins: int):
    """Strongest local maxima (periodic boundary), greedily thinned so kept
    peaks are at least one nominal resolution cell apart in some dimension."""
    footprint = np.ones((3,) * mag.ndim, dtype=bool)
    local_max = mag >= maximum_filter(mag, footprint=footprint, mode="wrap")
    cand = np.argwhere(local_max)
    order = np.argsort(mag[tuple(cand.T)])[::-1]
    cand = cand[order]

    kept = []
    dims = np.array(mag.shape)
    for point in cand:
        ok = True
        for other in kept:
            delta = np.abs(point - other)
            delta = np.minimum(delta, dims - delta)  # circular distance
            if not np.any(delta >= min_sep_bins):
                ok = False
                break
        if ok:
            kept.append(point)
        if len(kept) == k:
            break
    return kept


def _parabolic_refine(mag: np.ndarray, point: np.ndarray) -> np.ndarray:
    """Per-axis three-point parabolic vertex around a local maximum."""
    refined = point.astype(float)
    for ax in range(mag.ndim):
        if mag.shape[ax] < 3:
            continue
        lo = np.take(mag, (point[ax] - 1) % mag.shape[ax], axis=ax)
        hi = np.take(mag, (point[ax] + 1) % mag.shape[ax], axis=ax)
        mid = np.take(mag, point[ax], axis=ax)
        rest = tuple(np.delete(point, ax))
        y_left, y_mid, y_right = lo[rest], mid[rest], hi[rest]
        denom = y_left - 2.0 * y_mid + y_right
        if abs(denom) > 1e-300:
            refined[ax] += 0.5 * (y_left - y_right) / denom
    return refined


def dft2d_estimate(obs: ObservationTensor, cfg: SystemConfig, k: int,
                   oversample: int = 4) -> GridEstimate:
    """Range/velocity estimates from the antenna-averaged 2-D periodogram.

    Per-antenna complex grids are reduced by averaging magnitudes (no phase
    alignment across the array), then the k strongest separable peaks are
    read off. No azimuth is produced on this route.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    p, m, n = obs.shape
    mag = np.zeros((oversample * m, oversample * n))
    for ant in range(p):
        mag += np.abs(range_doppler_transform(obs.data[ant], oversample))
    mag /= p
    grid = PeriodogramGrid(magnitude=mag, cfg=cfg, oversample=oversample,
                           n_fft_range=oversample * n, n_fft_doppler=oversample * m)
    peaks = _find_peaks(mag, k, min_sep_bins=oversample)
    ranges, velocities = [], []
    for point in peaks:
        refined = _parabolic_refine(mag, np.asarray(point))
        velocities.append(grid.velocity_of_bin(refined[0]))
        ranges.append(grid.range_of_bin(refined[1]))
    order = np.argsort(ranges)
    ranges = np.asarray(ranges)[order]
    velocities = np.asarray(velocities)[order]
    return GridEstimate(
        range_m=ranges,
        velocity_mps=velocities,
        azimuth_rad=np.full(len(peaks), np.nan),
        shortfall=len(peaks) < k,
        grid=grid,
    )


def dft3d_estimate(obs: ObservationTensor, cfg: SystemConfig, k: int,
                   oversample: int = 4) -> GridEstimate:
    """Range/velocity/azimuth estimates from the 3-D periodogram (adds a
    forward transform along the antenna axis)."""
    if k < 1:
        raise ValueError("need k >= 1")
    p, m, n = obs.shape
    spec = np.fft.fft(np.fft.ifft(obs.data, n=oversample * n, axis=2),
                      n=oversample * m, axis=1)
    spec = np.fft.fft(spec, n=oversample * p, axis=0)
    mag = np.abs(spec)
    grid = PeriodogramGrid(magnitude=mag, cfg=cfg, oversample=oversample,
                           n_fft_range=oversample * n,
                           n_fft_doppler=oversample * m,
                           n_fft_angle=oversample * p)
    peaks = _find_peaks(mag, k, min_sep_bins=oversample)
    ranges, velocities, azimuths = [], [], []
    for point in peaks:
        refined = _parabolic_refine(mag, np.asarray(point))
        azimuths.append(grid.azimuth_of_bin(refined[0]))
        velocities.append(grid.velocity_of_bin(refined[1]))
        ranges.append(grid.range_of_bin(refined[2]))
    order = np.argsort(ranges)
    return GridEstimate(
        range_m=np.asarray(ranges)[order],
        velocity_mps=np.asarray(velocities)[order],
        azimuth_rad=np.asarray(azimuths)[order],
        shortfall=len(peaks) < k,
        grid=grid,
    )
