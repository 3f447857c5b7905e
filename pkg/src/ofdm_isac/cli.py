"""Command-line front end.

Subcommands: presets, simulate, estimate, crb, mc. Values with a leading
minus sign (SNR specs) must use the --flag=value form.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from . import baselines, estimator
from .crb import crb_report
from .harness import (Scenario, results_csv_text, run_sweep, snr_to_noise_var)
from .model import (PRESETS, Target, get_preset, max_detectable_range,
                    synthesize_observation)
from .obsio import read_observation, write_observation
from .smoothing import SmoothingDims


def _parse_snr_spec(text: str):
    """Either a single value ("0") or an inclusive sweep "start:stop:step"."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ValueError("SNR sweep step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(text)]


def _load_targets(path) -> list:
    with open(path) as fh:
        doc = json.load(fh)
    return [
        Target(range_m=t["range_m"], velocity_mps=t["velocity_mps"],
               azimuth_rad=np.deg2rad(t["azimuth_deg"]))
        for t in doc
    ]


def _cmd_presets(_args) -> int:
    for name, cfg in PRESETS.items():
        print(f"{name}:")
        print(f"  carrier frequency      {cfg.carrier_freq_hz / 1e9:.3g} GHz")
        print(f"  subcarrier spacing     {cfg.subcarrier_spacing_hz / 1e3:.3g} kHz")
        print(f"  subcarriers / symbols  {cfg.num_subcarriers} / {cfg.num_symbols}")
        print(f"  bandwidth              {cfg.bandwidth_hz / 1e6:.3g} MHz")
        print(f"  rx antennas, spacing   {cfg.num_rx_antennas}, "
              f"{cfg.antenna_spacing_m * 1e3:.4g} mm")
        print(f"  CP duration            {cfg.cp_duration_s * 1e6:.3g} us")
        print(f"  max range              {max_detectable_range(cfg):.4g} m")
        print(f"  unambiguous velocity   +/-{cfg.max_unambiguous_velocity_mps:.4g} m/s")
        print(f"  range resolution       {cfg.range_resolution_m:.4g} m")
        print(f"  velocity resolution    {cfg.velocity_resolution_mps:.4g} m/s")
    return 0


def _cmd_simulate(args) -> int:
    cfg = get_preset(args.preset)
    targets = _load_targets(args.targets)
    rng = np.random.default_rng(args.seed)
    amplitudes = np.exp(1j * rng.uniform(-np.pi, np.pi, size=len(targets)))
    targets = [
        Target(t.range_m, t.velocity_mps, t.azimuth_rad, amplitudes[i])
        for i, t in enumerate(targets)
    ]
    noise_var = 0.0 if args.noiseless else snr_to_noise_var(args.snr_db)
    obs = synthesize_observation(cfg, targets, noise_var, rng)
    write_observation(args.out, obs)
    print(f"wrote {args.out}: shape {obs.shape}, noise variance {obs.noise_var:g}",
          file=sys.stderr)
    return 0


def _cmd_estimate(args) -> int:
    cfg = get_preset(args.preset)
    obs = read_observation(getattr(args, "in"))
    if args.method in ("3dje-evd", "3dje-fsd"):
        dims = SmoothingDims.parse(args.dims)
        method = "evd" if args.method.endswith("evd") else "fsd"
        start = time.perf_counter()
        est = estimator.run_3dje(obs, cfg, dims, args.k, subspace_method=method,
                                 fsd_iters=args.fsd_iters, seed=args.seed)
        elapsed = time.perf_counter() - start
        triples = est.triples()
        extra = {
            "cond_eigvecs": est.cond_eigvecs,
            "diag_residual_velocity": est.diag_residual_velocity,
            "diag_residual_azimuth": est.diag_residual_azimuth,
            "eigval_moduli_range": np.abs(est.eigvals_range).tolist(),
        }
    elif args.method in ("dft2", "dft3"):
        fn = baselines.dft2d_estimate if args.method == "dft2" \
            else baselines.dft3d_estimate
        start = time.perf_counter()
        grid_est = fn(obs, cfg, args.k, args.oversample)
        elapsed = time.perf_counter() - start
        triples = grid_est.triples()
        extra = {"shortfall": grid_est.shortfall}
    else:
        raise ValueError(f"unknown method {args.method!r}")

    doc = {
        "method": args.method,
        "k": args.k,
        "wall_time_s": elapsed,
        "estimates": [
            {"range_m": float(r), "velocity_mps": float(v),
             "azimuth_deg": float(np.degrees(a))}
            for r, v, a in triples
        ],
        "diagnostics": extra,
    }
    if args.json:
        print(json.dumps(doc, indent=2))
    else:
        for i, e in enumerate(doc["estimates"]):
            print(f"target {i}: range {e['range_m']:.4f} m, "
                  f"velocity {e['velocity_mps']:.4f} m/s, "
                  f"azimuth {e['azimuth_deg']:.4f} deg")
    return 0


def _cmd_crb(args) -> int:
    cfg = get_preset(args.preset)
    targets = _load_targets(args.targets)
    snrs = _parse_snr_spec(args.snr_db)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["snr_db", "target", "crb_range_m2", "crb_velocity_mps2",
                     "crb_azimuth_deg2", "rcrb_range_m", "rcrb_velocity_mps",
                     "rcrb_azimuth_deg"])
    for snr in snrs:
        report = crb_report(cfg, targets, snr_to_noise_var(snr))
        for i in range(len(targets)):
            writer.writerow([
                repr(snr), i,
                repr(float(report.crb_range_m2[i])),
                repr(float(report.crb_velocity_mps2[i])),
                repr(float(report.crb_azimuth_deg2[i])),
                repr(float(report.rcrb_range_m[i])),
                repr(float(report.rcrb_velocity_mps[i])),
                repr(float(report.rcrb_azimuth_deg[i])),
            ])
    return 0


def _cmd_mc(args) -> int:
    with open(args.scenario) as fh:
        scenario = Scenario.from_json(fh.read())
    start = time.perf_counter()
    rows = run_sweep(scenario, workers=args.workers)
    elapsed = time.perf_counter() - start
    text = results_csv_text(rows, include_timing=args.timing)
    with open(args.out, "w") as fh:
        fh.write(text)
    for row in rows:
        print(f"snr {row.snr_db:+.1f} dB {row.method:>8}: "
              f"{row.wall_time_s:.2f}s over {row.trials} trials",
              file=sys.stderr)
    print(f"wrote {args.out} ({len(rows)} rows) in {elapsed:.1f}s",
          file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofdm-isac",
                                     description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("presets", help="list the built-in system presets")

    sim = sub.add_parser("simulate", help="synthesize one observation file")
    sim.add_argument("--preset", required=True)
    sim.add_argument("--targets", required=True,
                     help="JSON array of {range_m, velocity_mps, azimuth_deg}")
    sim.add_argument("--snr-db", type=float, default=0.0)
    sim.add_argument("--noiseless", action="store_true")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True)

    est = sub.add_parser("estimate", help="estimate targets from an observation file")
    est.add_argument("--in", required=True)
    est.add_argument("--preset", required=True,
                     help="waveform constants (the binary file carries only shape)")
    est.add_argument("--k", type=int, required=True)
    est.add_argument("--method", required=True,
                     choices=["3dje-evd", "3dje-fsd", "dft2", "dft3"])
    est.add_argument("--dims", default="7,15,15",
                     help="antenna,symbol,subcarrier smoothing windows")
    est.add_argument("--fsd-iters", type=int, default=None)
    est.add_argument("--oversample", type=int, default=4)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--json", action="store_true")

    crb_p = sub.add_parser("crb", help="emit variance-bound CSV")
    crb_p.add_argument("--preset", required=True)
    crb_p.add_argument("--targets", required=True)
    crb_p.add_argument("--snr-db", required=True,
                       help='single value or "start:stop:step" (use --snr-db=-20:5:5)')
    crb_p.add_argument("--csv", action="store_true",
                       help="accepted for symmetry; output is always CSV")

    mc = sub.add_parser("mc", help="run a Monte Carlo scenario")
    mc.add_argument("--scenario", required=True)
    mc.add_argument("--out", required=True)
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--timing", action="store_true",
                    help="embed measured wall time in the CSV (breaks "
                         "byte-reproducibility); timings always go to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "presets": _cmd_presets,
        "simulate": _cmd_simulate,
        "estimate": _cmd_estimate,
        "crb": _cmd_crb,
        "mc": _cmd_mc,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
