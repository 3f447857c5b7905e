"""Monte Carlo experiment driver.

Runs SNR sweeps of the registered estimators over independent noisy draws,
matches estimates to ground truth by minimum-cost assignment, aggregates
per-dimension RMSE across trials, and attaches the matching variance-bound
roots so the output CSV plots directly as RMSE-vs-SNR with its bound
overlay.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import baselines, estimator
from .crb import crb_report
from .model import (SystemConfig, Target, get_preset, max_detectable_range,
                    synthesize_observation)
from .smoothing import SmoothingDims

log = logging.getLogger(__name__)

METHOD_NAMES = ("3dje-evd", "3dje-fsd", "dft2", "dft3")

RESULT_COLUMNS = (
    "snr_db", "method", "rmse_range_m", "rmse_velocity_mps",
    "rmse_azimuth_deg", "rcrb_range_m", "rcrb_velocity_mps",
    "rcrb_azimuth_deg", "trials", "wall_time_s", "seed",
)


@dataclass(frozen=True)
class Scenario:
    """One reproducible experiment: preset, truth, SNR grid and methods.

    config_overrides lets desk-scale runs shrink the preset (fewer
    subcarriers/symbols) without defining a new preset. Targets carry no
    amplitude; each trial draws a fresh unit-modulus amplitude with uniform
    random phase per target.
    """

    preset: str
    targets: tuple
    snr_db: tuple
    trials: int
    methods: tuple
    dims: SmoothingDims
    seed: int
    fsd_iters: int | None = None
    oversample: int = 4
    noiseless: bool = False
    config_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not all(np.isfinite(self.snr_db)):
            raise ValueError("SNR grid must be finite")
        unknown = set(self.methods) - set(METHOD_NAMES)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; "
                             f"registered: {METHOD_NAMES}")

    def config(self) -> SystemConfig:
        return get_preset(self.preset, **self.config_overrides)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        targets = tuple(
            Target(range_m=t["range_m"], velocity_mps=t["velocity_mps"],
                   azimuth_rad=np.deg2rad(t["azimuth_deg"]))
            for t in doc["targets"]
        )
        dims = doc["dims"]
        return cls(
            preset=doc["preset"],
            targets=targets,
            snr_db=tuple(float(s) for s in doc["snr_db"]),
            trials=int(doc["trials"]),
            methods=tuple(doc["methods"]),
            dims=SmoothingDims(p_tilde=dims[0], m_tilde=dims[1], n_tilde=dims[2]),
            seed=int(doc["seed"]),
            fsd_iters=doc.get("fsd_iters"),
            oversample=int(doc.get("oversample", 4)),
            noiseless=bool(doc.get("noiseless", False)),
            config_overrides=dict(doc.get("config_overrides", {})),
        )

    def to_json(self) -> str:
        return json.dumps({
            "preset": self.preset,
            "targets": [
                {"range_m": t.range_m, "velocity_mps": t.velocity_mps,
                 "azimuth_deg": float(np.degrees(t.azimuth_rad))}
                for t in self.targets
            ],
            "snr_db": list(self.snr_db),
            "trials": self.trials,
            "methods": list(self.methods),
            "dims": [self.dims.p_tilde, self.dims.m_tilde, self.dims.n_tilde],
            "seed": self.seed,
            "fsd_iters": self.fsd_iters,
            "oversample": self.oversample,
            "noiseless": self.noiseless,
            "config_overrides": self.config_overrides,
        }, indent=2)


@dataclass
class ResultRow:
    snr_db: float
    method: str
    rmse_range_m: float
    rmse_velocity_mps: float
    rmse_azimuth_deg: float
    rcrb_range_m: float
    rcrb_velocity_mps: float
    rcrb_azimuth_deg: float
    trials: int
    wall_time_s: float
    seed: int


def snr_to_noise_var(snr_db: float) -> float:
    """Per-element noise power for unit-power echo amplitudes."""
    return 10.0 ** (-snr_db / 10.0)


def match_estimates(truth: np.ndarray, estimates: np.ndarray,
                    normalizers, use_azimuth: bool = True):
    """Assign estimate rows to truth rows by minimum normalized distance.

    Args:
        truth: (K, 3) triples (range, velocity, azimuth-rad).
        estimates: (K', 3) triples, K' <= K allowed (shortfall).
        normalizers: per-dimension scales for the matching cost.
        use_azimuth: drop the azimuth term for estimators that do not
            produce one.

    Returns:
        List of (truth_index, estimate_index) pairs, one per matched truth.
    """
    truth = np.atleast_2d(truth)
    estimates = np.atleast_2d(estimates) if len(estimates) else np.zeros((0, 3))
    k_truth, k_est = len(truth), len(estimates)
    if k_est == 0:
        return []
    dims = 3 if use_azimuth else 2
    cost = np.zeros((k_truth, k_est))
    for d in range(dims):
        diff = (truth[:, d, None] - estimates[None, :, d]) / normalizers[d]
        cost += diff ** 2

    if max(k_truth, k_est) <= 4:
        best, best_cost = None, np.inf
        source = range(k_truth)
        for perm in itertools.permutations(source, min(k_truth, k_est)):
            total = sum(cost[t, e] for e, t in enumerate(perm))
            if total < best_cost:
                best_cost, best = total, perm
        return [(t, e) for e, t in enumerate(best)]
    rows, cols = linear_sum_assignment(cost)
    return list(zip(rows.tolist(), cols.tolist()))


def squared_errors(truth: np.ndarray, estimates: np.ndarray, normalizers,
                   penalties, use_azimuth: bool = True) -> np.ndarray:
    """(K, 3) per-target squared errors after assignment; unmatched truth
    rows receive the worst-case penalty in every dimension."""
    truth = np.atleast_2d(truth)
    out = np.tile(np.asarray(penalties, dtype=float) ** 2, (len(truth), 1))
    pairs = match_estimates(truth, estimates, normalizers, use_azimuth)
    for t_idx, e_idx in pairs:
        err = truth[t_idx] - estimates[e_idx]
        out[t_idx] = err ** 2
    return out


def rmse(truth, estimates, normalizers, use_azimuth: bool = True) -> np.ndarray:
    """Per-dimension root mean square error over assignment-matched triples."""
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if truth.shape != estimates.shape:
        raise ValueError("truth and estimate counts must match")
    pairs = match_estimates(truth, estimates, normalizers, use_azimuth)
    sq = np.zeros((len(truth), 3))
    for t_idx, e_idx in pairs:
        sq[t_idx] = (truth[t_idx] - estimates[e_idx]) ** 2
    return np.sqrt(sq.mean(axis=0))


def _run_method(method: str, obs, cfg, scenario: Scenario, k: int,
                method_seed) -> np.ndarray:
    if method == "3dje-evd":
        est = estimator.run_3dje(obs, cfg, scenario.dims, k,
                                 subspace_method="evd")
        return est.triples()
    if method == "3dje-fsd":
        est = estimator.run_3dje(obs, cfg, scenario.dims, k,
                                 subspace_method="fsd",
                                 fsd_iters=scenario.fsd_iters, seed=method_seed)
        return est.triples()
    if method == "dft2":
        return baselines.dft2d_estimate(obs, cfg, k, scenario.oversample).triples()
    if method == "dft3":
        return baselines.dft3d_estimate(obs, cfg, k, scenario.oversample).triples()
    raise ValueError(f"unknown method {method!r}")


def _method_stream_key(method: str) -> int:
    return zlib.crc32(method.encode())


def _run_trial(scenario: Scenario, cfg: SystemConfig, truth: np.ndarray,
               snr_index: int, trial: int, noise_var: float, normalizers,
               penalties):
    """One independent draw: every method sees the identical observation."""
    obs_seed = np.random.SeedSequence(entropy=scenario.seed,
                                      spawn_key=(snr_index, trial))
    rng = np.random.default_rng(obs_seed)
    k = len(scenario.targets)
    amplitudes = np.exp(1j * rng.uniform(-np.pi, np.pi, size=k))
    targets = [replace(t, amplitude=amplitudes[i])
               for i, t in enumerate(scenario.targets)]
    obs = synthesize_observation(cfg, targets, noise_var, rng)

    result = {}
    for method in scenario.methods:
        method_seed = np.random.SeedSequence(
            entropy=scenario.seed,
            spawn_key=(snr_index, trial, _method_stream_key(method)))
        use_azimuth = method != "dft2"
        start = time.perf_counter()
        try:
            triples = _run_method(method, obs, cfg, scenario, k, method_seed)
            sq = squared_errors(truth, triples, normalizers, penalties,
                                use_azimuth)
            failed = False
        except Exception as exc:  # estimator failure: penalize, keep sweeping
            log.warning("trial %d method %s failed: %s", trial, method, exc)
            sq = np.tile(np.asarray(penalties) ** 2, (k, 1))
            failed = True
        elapsed = time.perf_counter() - start
        if not use_azimuth:
            sq[:, 2] = np.nan
        result[method] = (sq, elapsed, failed)
    return result


def run_sweep(scenario: Scenario, workers: int = 1) -> list:
    """Execute the full (SNR x method x trial) grid.

    Per-trial seeds derive from (master seed, SNR index, trial), so every
    method compares against the identical noise realization; method-specific
    randomness (the fsd start vector) uses a stream that additionally hashes
    the method name. Trials may fan out across threads; aggregation is in
    trial order either way, so serial and parallel runs emit identical
    bytes.
    """
    cfg = scenario.config()
    for t in scenario.targets:
        t.validate(cfg)
    truth = np.array([[t.range_m, t.velocity_mps, t.azimuth_rad]
                      for t in scenario.targets])
    normalizers = (cfg.range_resolution_m, cfg.velocity_resolution_mps, 1.0)
    penalties = (max_detectable_range(cfg),
                 2.0 * cfg.max_unambiguous_velocity_mps, np.pi)
    k = len(scenario.targets)

    rows = []
    for snr_index, snr_db in enumerate(scenario.snr_db):
        noise_var = 0.0 if scenario.noiseless else snr_to_noise_var(snr_db)
        bound = crb_report(cfg, scenario.targets, noise_var) \
            if noise_var > 0 else None

        def trial_task(t, _si=snr_index, _nv=noise_var):
            return _run_trial(scenario, cfg, truth, _si, t, _nv,
                              normalizers, penalties)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                trial_results = list(pool.map(trial_task,
                                              range(scenario.trials)))
        else:
            trial_results = [trial_task(t) for t in range(scenario.trials)]

        for method in scenario.methods:
            sq_sum = np.zeros(3)
            wall = 0.0
            failures = 0
            for per_trial in trial_results:
                sq, elapsed, failed = per_trial[method]
                sq_sum += np.nan_to_num(sq.sum(axis=0))
                wall += elapsed
                failures += failed
            count = scenario.trials * k
            rmse_r, rmse_v, rmse_a = np.sqrt(sq_sum / count)
            if method == "dft2":
                rmse_a = np.nan
            if failures:
                log.warning("snr %.1f dB method %s: %d/%d trials failed "
                            "(penalized)", snr_db, method, failures,
                            scenario.trials)
            rows.append(ResultRow(
                snr_db=float(snr_db),
                method=method,
                rmse_range_m=float(rmse_r),
                rmse_velocity_mps=float(rmse_v),
                rmse_azimuth_deg=float(np.degrees(rmse_a)),
                rcrb_range_m=float(np.sqrt(np.mean(bound.crb_range_m2)))
                if bound else 0.0,
                rcrb_velocity_mps=float(np.sqrt(np.mean(bound.crb_velocity_mps2)))
                if bound else 0.0,
                rcrb_azimuth_deg=float(np.sqrt(np.mean(bound.crb_azimuth_deg2)))
                if bound else 0.0,
                trials=scenario.trials,
                wall_time_s=wall,
                seed=scenario.seed,
            ))
    return rows


def write_results_csv(rows, fh, include_timing: bool = False) -> None:
    """Serialize result rows with a fixed column order and '.'-decimal float
    formatting.

    Measured wall time is excluded by default so that a fixed (scenario,
    seed) pair always produces byte-identical output; pass
    include_timing=True to embed the measured seconds instead.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([
            repr(row.snr_db),
            row.method,
            repr(row.rmse_range_m),
            repr(row.rmse_velocity_mps),
            repr(row.rmse_azimuth_deg),
            repr(row.rcrb_range_m),
            repr(row.rcrb_velocity_mps),
            repr(row.rcrb_azimuth_deg),
            row.trials,
            repr(row.wall_time_s) if include_timing else "",
            row.seed,
        ])


def results_csv_text(rows, include_timing: bool = False) -> str:
    buf = io.StringIO()
    write_results_csv(rows, buf, include_timing=include_timing)
    return buf.getvalue()
