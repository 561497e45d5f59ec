"""Configuration-driven experiments: sweep, comparison, bound verification and reports."""

from semattack.experiments.bound import check_bound, run_bound_verification, write_bound
from semattack.experiments.compare import ComparisonReport, check_comparison, run_attack_comparison, write_comparison
from semattack.experiments.report import report_run, summarize_results
from semattack.experiments.runs import Run, single_attack, target_model, training_data
from semattack.experiments.sweep import SweepReport, check_sweep, run_dimensionality_sweep, write_sweep

__all__ = [
    "ComparisonReport",
    "Run",
    "SweepReport",
    "check_bound",
    "check_comparison",
    "check_sweep",
    "report_run",
    "run_attack_comparison",
    "run_bound_verification",
    "run_dimensionality_sweep",
    "single_attack",
    "summarize_results",
    "target_model",
    "training_data",
    "write_bound",
    "write_comparison",
    "write_sweep",
]
