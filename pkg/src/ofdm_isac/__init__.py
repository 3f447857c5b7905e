"""OFDM sensing simulator: signal synthesis, smoothing, subspace estimation,
auto-paired range/velocity/azimuth recovery, variance bounds, grid baselines,
and a Monte Carlo RMSE harness."""

from .baselines import GridEstimate, PeriodogramGrid, dft2d_estimate, dft3d_estimate
from .crb import (CrbReport, FisherSingularError, crb_parameter_domain,
                  crb_phase_domain, crb_report)
from .estimator import (DegenerateGeometryError, EstimateSet,
                        SelectionOperators, build_selection_operators,
                        estimate, run_3dje)
from .harness import (ResultRow, Scenario, results_csv_text, rmse, run_sweep,
                      snr_to_noise_var, write_results_csv)
from .model import (C, ObservationTensor, PhaseTriple, PRESETS, SystemConfig,
                    Target, TimeDomainStream, composite_steering, demodulate,
                    derive_phases, generate_psk_symbols, get_preset,
                    max_detectable_range, steering_vector,
                    synthesize_observation, synthesize_time_domain)
from .obsio import read_observation, write_observation
from .smoothing import (Covariance, SmoothingDims, SnapshotMatrix,
                        sample_covariance, smooth)
from .subspace import (SignalSubspace, SubspaceSeparationWarning,
                       evd_signal_subspace, fsd_signal_subspace,
                       lanczos_diagnostics)

__all__ = [
    "C", "CrbReport", "Covariance", "DegenerateGeometryError", "EstimateSet",
    "FisherSingularError", "GridEstimate", "ObservationTensor",
    "PeriodogramGrid", "PhaseTriple", "PRESETS", "ResultRow", "Scenario",
    "SelectionOperators", "SignalSubspace", "SmoothingDims", "SnapshotMatrix",
    "SubspaceSeparationWarning", "SystemConfig", "Target", "TimeDomainStream",
    "build_selection_operators", "composite_steering", "crb_parameter_domain",
    "crb_phase_domain", "crb_report", "demodulate", "derive_phases",
    "dft2d_estimate", "dft3d_estimate", "estimate", "evd_signal_subspace",
    "fsd_signal_subspace", "generate_psk_symbols", "get_preset",
    "lanczos_diagnostics", "max_detectable_range", "read_observation",
    "results_csv_text", "rmse", "run_3dje", "run_sweep", "sample_covariance",
    "smooth", "snr_to_noise_var", "steering_vector", "synthesize_observation",
    "synthesize_time_domain", "write_observation", "write_results_csv",
]

__version__ = "0.1.0"
