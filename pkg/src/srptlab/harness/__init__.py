"""Experiment orchestration: statistics, configuration, studies, ledger and CLI."""

from .config import ExperimentConfig
from .stats import empirical_cdf_and_ks, reflected_bm_marginal_cdf
from .study import ComparisonReport, run_convergence_study
from .verify import verify_suite

__all__ = ["ExperimentConfig", "ComparisonReport", "empirical_cdf_and_ks",
           "reflected_bm_marginal_cdf", "run_convergence_study", "verify_suite"]
