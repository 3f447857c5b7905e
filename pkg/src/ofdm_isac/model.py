"""Waveform/array configuration and synthesis of the sensing observation.

An OFDM transmitter illuminates K point targets; a uniform linear array
receives the echoes. After data-symbol division, each receive antenna p,
symbol m and subcarrier n carries

    z[p, m, n] = sum_i beta_i * exp(j*p*psi_i) * exp(j*m*phi_i)
                        * exp(-j*n*varphi_i) + noise,

where the three phases encode range (varphi), velocity (phi) and azimuth
(psi). This module holds the system constants, the target description, the
phase mapping, and two synthesis paths: the frequency-domain generator used
by the estimation pipeline, and a sample-level time-domain generator plus
demodulator used to validate the frequency-domain shortcut.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

C = 3.0e8  # propagation speed, m/s


def wrap_angle(x):
    """Wrap angle(s) to the principal interval (-pi, pi]."""
    w = (-x + np.pi) % (2.0 * np.pi) - np.pi
    return -w


@dataclass(frozen=True)
class SystemConfig:
    """Waveform, array and sampling constants.

    Attributes:
        carrier_freq_hz: carrier frequency f_c.
        subcarrier_spacing_hz: subcarrier spacing.
        num_subcarriers: subcarriers per symbol (N).
        num_symbols: symbols per coherent processing interval (M).
        num_rx_antennas: receive antennas (P).
        antenna_spacing_m: inter-antenna spacing d.
        cp_duration_s: cyclic-prefix duration.
        psk_order: PSK modulation order for the data symbols.
    """

    carrier_freq_hz: float
    subcarrier_spacing_hz: float
    num_subcarriers: int
    num_symbols: int
    num_rx_antennas: int
    antenna_spacing_m: float
    cp_duration_s: float
    psk_order: int = 4

    def __post_init__(self):
        if self.num_subcarriers < 1 or self.num_symbols < 1 or self.num_rx_antennas < 1:
            raise ValueError("subcarrier, symbol and antenna counts must all be >= 1")
        if self.subcarrier_spacing_hz <= 0 or self.carrier_freq_hz <= 0:
            raise ValueError("carrier frequency and subcarrier spacing must be positive")
        if self.cp_duration_s < 0:
            raise ValueError("cyclic-prefix duration must be non-negative")
        if self.psk_order < 2:
            raise ValueError("PSK order must be >= 2")
        if self.antenna_spacing_m > self.wavelength_m / 2 * (1 + 1e-12):
            warnings.warn(
                f"antenna spacing {self.antenna_spacing_m:.4g} m exceeds half a "
                f"wavelength ({self.wavelength_m / 2:.4g} m); spatial phases can "
                "alias (grating lobes)",
                UserWarning,
                stacklevel=2,
            )

    @property
    def symbol_duration_s(self) -> float:
        """Elementary symbol duration T = 1/spacing."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def total_symbol_duration_s(self) -> float:
        """CP-extended symbol duration."""
        return self.symbol_duration_s + self.cp_duration_s

    @property
    def wavelength_m(self) -> float:
        return C / self.carrier_freq_hz

    @property
    def sample_period_s(self) -> float:
        return 1.0 / (self.num_subcarriers * self.subcarrier_spacing_hz)

    @property
    def bandwidth_hz(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing_hz

    @property
    def max_unambiguous_velocity_mps(self) -> float:
        """Largest |velocity| whose Doppler phase stays inside (-pi, pi]."""
        return self.wavelength_m / (4.0 * self.total_symbol_duration_s)

    @property
    def range_resolution_m(self) -> float:
        """Nominal range cell of bandwidth-limited processing."""
        return C / (2.0 * self.bandwidth_hz)

    @property
    def velocity_resolution_mps(self) -> float:
        """Nominal velocity cell of the coherent processing interval."""
        return self.wavelength_m / (2.0 * self.num_symbols * self.total_symbol_duration_s)


def max_detectable_range(cfg: SystemConfig) -> float:
    """Largest target range whose round-trip delay fits inside the CP."""
    return C * cfg.cp_duration_s / 2.0


# 5G NR-style presets, one per subcarrier-spacing numerology. Both occupy
# 14.4 MHz at 27 GHz with an 8-element half-wavelength array.
_NR_CARRIER = 27e9
_NR_SPACING = (C / _NR_CARRIER) / 2.0

PRESETS = {
    "nr60": SystemConfig(
        carrier_freq_hz=_NR_CARRIER,
        subcarrier_spacing_hz=60e3,
        num_subcarriers=240,
        num_symbols=56,
        num_rx_antennas=8,
        antenna_spacing_m=_NR_SPACING,
        cp_duration_s=1.2e-6,
        psk_order=4,
    ),
    "nr120": SystemConfig(
        carrier_freq_hz=_NR_CARRIER,
        subcarrier_spacing_hz=120e3,
        num_subcarriers=120,
        num_symbols=112,
        num_rx_antennas=8,
        antenna_spacing_m=_NR_SPACING,
        cp_duration_s=0.59e-6,
        psk_order=4,
    ),
}


def get_preset(name: str, **overrides) -> SystemConfig:
    """Look up a named preset, optionally replacing individual fields."""
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


@dataclass(frozen=True)
class Target:
    """Ground-truth point target: range (m), radial velocity (m/s, positive
    closing), azimuth (rad) and complex echo amplitude."""

    range_m: float
    velocity_mps: float
    azimuth_rad: float
    amplitude: complex = 1.0 + 0.0j

    @property
    def delay_s(self) -> float:
        return 2.0 * self.range_m / C

    def doppler_hz(self, cfg: SystemConfig) -> float:
        return 2.0 * cfg.carrier_freq_hz * self.velocity_mps / C

    def validate(self, cfg: SystemConfig) -> None:
        r_max = max_detectable_range(cfg)
        if not 0.0 < self.range_m <= r_max:
            raise ValueError(
                f"target range {self.range_m:g} m outside (0, c*T_cp/2] = "
                f"(0, {r_max:g}] m; the round-trip delay must fit in the CP"
            )
        v_max = cfg.max_unambiguous_velocity_mps
        if abs(self.velocity_mps) > v_max * (1 + 1e-12):
            raise ValueError(
                f"target velocity {self.velocity_mps:g} m/s exceeds the "
                f"unambiguous limit +/-{v_max:g} m/s"
            )
        if abs(self.azimuth_rad) >= np.pi / 2:
            raise ValueError(
                f"target azimuth {self.azimuth_rad:g} rad must satisfy |azimuth| < pi/2"
            )


@dataclass(frozen=True)
class PhaseTriple:
    """Per-target phase progressions along subcarrier, symbol and antenna axes."""

    varphi: float  # range-induced, rad per subcarrier step
    phi: float     # velocity-induced, rad per symbol step
    psi: float     # azimuth-induced, rad per antenna step


def derive_phases(target: Target, cfg: SystemConfig) -> PhaseTriple:
    """Map a physical target to its (varphi, phi, psi) phase triple.

    varphi = 4*pi*spacing*R/c, phi = 4*pi*f_c*v*Tbar/c, psi = 2*pi*d*sin(az)/lambda.
    phi and psi are reduced to (-pi, pi]; varphi is non-negative and bounded by
    the CP constraint, so it needs no reduction.
    """
    target.validate(cfg)
    varphi = 4.0 * np.pi * cfg.subcarrier_spacing_hz * target.range_m / C
    phi = 4.0 * np.pi * cfg.carrier_freq_hz * target.velocity_mps \
        * cfg.total_symbol_duration_s / C
    psi = 2.0 * np.pi * cfg.antenna_spacing_m * np.sin(target.azimuth_rad) \
        / cfg.wavelength_m
    return PhaseTriple(varphi=varphi, phi=float(wrap_angle(phi)), psi=float(wrap_angle(psi)))


def steering_vector(kind: str, phase: float, length: int) -> np.ndarray:
    """Unit-modulus phase progression along one observation axis.

    Args:
        kind: "doppler" (symbol axis, exp(+j*m*phase)), "range" (subcarrier
            axis, exp(-j*n*phase)) or "space" (antenna axis, exp(+j*p*phase)).
            The range axis is the only one with a negative exponent.
        phase: per-step phase in radians.
        length: number of elements, >= 1.
    """
    if length < 1:
        raise ValueError("steering vector length must be >= 1")
    idx = np.arange(length)
    if kind == "range":
        return np.exp(-1j * idx * phase)
    if kind in ("doppler", "space"):
        return np.exp(1j * idx * phase)
    raise ValueError(f"unknown steering kind {kind!r}")


def composite_steering(phases: PhaseTriple, num_space: int, num_range: int,
                       num_doppler: int) -> np.ndarray:
    """Kronecker steering vector over (antenna, subcarrier, symbol), symbol
    index fastest. Length num_space*num_range*num_doppler."""
    a_s = steering_vector("space", phases.psi, num_space)
    a_r = steering_vector("range", phases.varphi, num_range)
    a_d = steering_vector("doppler", phases.phi, num_doppler)
    return np.einsum("p,n,m->pnm", a_s, a_r, a_d).ravel()


def generate_psk_symbols(cfg: SystemConfig, seed) -> np.ndarray:
    """Draw an (M, N) matrix of uniform random PSK data symbols.

    Entries are exp(j*2*pi*q/order) with q uniform on {0, ..., order-1};
    every entry has unit modulus.
    """
    rng = np.random.default_rng(seed)
    q = rng.integers(0, cfg.psk_order, size=(cfg.num_symbols, cfg.num_subcarriers))
    return np.exp(2j * np.pi * q / cfg.psk_order)


@dataclass
class ObservationTensor:
    """Post-division observation, indexed [antenna, symbol, subcarrier].

    noise_var is the per-element complex noise power of `data`.
    """

    data: np.ndarray
    noise_var: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ValueError("observation data must be a (P, M, N) array")
        if self.noise_var < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def shape(self):
        return self.data.shape

    def vectorize(self) -> np.ndarray:
        """Stack into a single vector: symbol index fastest, then subcarrier,
        then antenna (matching the Kronecker order of composite_steering)."""
        p, m, n = self.data.shape
        return np.ascontiguousarray(self.data.transpose(0, 2, 1)).reshape(p * n * m)


def synthesize_observation(cfg: SystemConfig, targets, noise_var: float,
                           seed) -> ObservationTensor:
    """Generate the frequency-domain observation with noise injected directly
    at the post-division level.

    Noise is drawn as circular complex Gaussian with per-element variance
    noise_var, which matches the post-DFT, post-division statistics of
    white time-domain noise divided by PSK symbols (see
    synthesize_time_domain for the long way around).
    """
    if noise_var < 0:
        raise ValueError("noise variance must be non-negative")
    p, m, n = cfg.num_rx_antennas, cfg.num_symbols, cfg.num_subcarriers
    data = np.zeros((p, m, n), dtype=np.complex128)
    for tgt in targets:
        ph = derive_phases(tgt, cfg)
        a_s = steering_vector("space", ph.psi, p)
        a_d = steering_vector("doppler", ph.phi, m)
        a_r = steering_vector("range", ph.varphi, n)
        data += tgt.amplitude * np.einsum("p,m,n->pmn", a_s, a_d, a_r)
    if noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(noise_var / 2.0)
        data += scale * (rng.standard_normal((p, m, n))
                         + 1j * rng.standard_normal((p, m, n)))
    return ObservationTensor(data=data, noise_var=float(noise_var))


@dataclass
class TimeDomainStream:
    """Per-antenna sample blocks, one block per symbol including CP samples.

    samples[p, m, k] is taken at t = m*Tbar + (k - num_cp)*Ts; the first
    num_cp samples of each block belong to the cyclic prefix and are
    discarded by demodulate().
    """

    samples: np.ndarray
    num_cp: int
    noise_var: float


def synthesize_time_domain(cfg: SystemConfig, targets, symbols: np.ndarray,
                           noise_var: float, seed,
                           doppler_model: str = "per_symbol") -> TimeDomainStream:
    """Sample-level receive chain for cross-validating the frequency-domain path.

    Args:
        symbols: (M, N) transmitted data symbols.
        noise_var: per-sample complex noise power added in the time domain.
        doppler_model: "per_symbol" freezes the Doppler rotation within each
            symbol (the standard narrowband approximation the frequency-domain
            model relies on); "per_sample" applies exp(j*2*pi*f_d*t) exactly
            and is meant for stress-testing that approximation.

    Samples are evaluated from the continuous-time model, so fractional
    CP-to-sample ratios only affect the discarded prefix samples.
    """
    if doppler_model not in ("per_symbol", "per_sample"):
        raise ValueError(f"unknown doppler model {doppler_model!r}")
    symbols = np.asarray(symbols)
    m_cnt, n_cnt = cfg.num_symbols, cfg.num_subcarriers
    if symbols.shape != (m_cnt, n_cnt):
        raise ValueError(f"symbol matrix must have shape {(m_cnt, n_cnt)}")
    t_sym = cfg.symbol_duration_s
    t_cp = cfg.cp_duration_s
    t_bar = cfg.total_symbol_duration_s
    ts = cfg.sample_period_s
    num_cp = int(round(t_cp / ts))
    block = num_cp + n_cnt
    p_cnt = cfg.num_rx_antennas

    # time of each in-block sample relative to its symbol start
    t_in = (np.arange(block) - num_cp) * ts
    m_idx = np.arange(m_cnt)
    n_idx = np.arange(n_cnt)

    out = np.zeros((p_cnt, m_cnt, block), dtype=np.complex128)
    for tgt in targets:
        ph = derive_phases(tgt, cfg)  # also enforces delay <= CP duration
        tau = tgt.delay_s
        f_d = tgt.doppler_hz(cfg)
        alpha = tgt.amplitude / n_cnt  # post-DFT gain N is folded into amplitude
        a_s = steering_vector("space", ph.psi, p_cnt)

        # own-symbol contribution: window position is symbol-independent
        u = t_in - tau
        mask = (u >= -t_cp) & (u < t_sym)
        env = np.exp(2j * np.pi * cfg.subcarrier_spacing_hz * np.outer(n_idx, u))
        env *= mask
        own = symbols @ env  # (M, block)

        # spill-over from the previous symbol into early CP samples
        u_prev = u + t_bar
        mask_prev = (u_prev >= -t_cp) & (u_prev < t_sym)
        spill = None
        if mask_prev.any():
            env_prev = np.exp(2j * np.pi * cfg.subcarrier_spacing_hz
                              * np.outer(n_idx, u_prev))
            env_prev *= mask_prev
            spill = symbols @ env_prev  # indexed by source symbol

        if doppler_model == "per_symbol":
            dop = np.exp(2j * np.pi * f_d * t_bar * m_idx)
            contrib = own * dop[:, None]
            if spill is not None:
                contrib[1:] += spill[:-1] * dop[:-1, None]
        else:
            t_abs = m_idx[:, None] * t_bar + t_in[None, :]
            dop = np.exp(2j * np.pi * f_d * t_abs)
            contrib = own.copy()
            if spill is not None:
                contrib[1:] += spill[:-1]
            contrib *= dop

        out += alpha * a_s[:, None, None] * contrib[None, :, :]

    if noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(noise_var / 2.0)
        out += scale * (rng.standard_normal(out.shape)
                        + 1j * rng.standard_normal(out.shape))
    return TimeDomainStream(samples=out, num_cp=num_cp, noise_var=float(noise_var))


def demodulate(stream: TimeDomainStream, cfg: SystemConfig,
               symbols: np.ndarray) -> ObservationTensor:
    """CP removal, unnormalized forward DFT, and data-symbol division.

    The unnormalized DFT makes the post-division noise variance exactly
    N times the time-domain noise variance.
    """
    useful = stream.samples[:, :, stream.num_cp:]
    if useful.shape[2] != cfg.num_subcarriers:
        raise ValueError("stream block length inconsistent with configuration")
    spectrum = np.fft.fft(useful, axis=2)
    data = spectrum / np.asarray(symbols)[None, :, :]
    return ObservationTensor(data=data,
                             noise_var=cfg.num_subcarriers * stream.noise_var)
