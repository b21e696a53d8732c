"""Reconstruction runs, sweeps, statistics and record files."""
from .records import read_records, record_lines, write_aggregates, write_records
from .runner import RunConfig, RunRecord, log_checkpoints, make_target, run_reconstruction
from .stats import (Curve, Histogram, PowerLawFit, aggregate_curve, power_law_fit, reduction_factor,
                    rolling_power_law, threshold_statistics)
from .sweep import apply_variation, derive_seed, plan_sweep, run_sweep, splitmix64

__all__ = [
    "Curve", "Histogram", "PowerLawFit", "RunConfig", "RunRecord", "aggregate_curve", "apply_variation",
    "derive_seed", "log_checkpoints", "make_target", "plan_sweep", "power_law_fit", "read_records",
    "record_lines", "reduction_factor", "rolling_power_law", "run_reconstruction", "run_sweep",
    "splitmix64", "threshold_statistics", "write_aggregates", "write_records",
]
