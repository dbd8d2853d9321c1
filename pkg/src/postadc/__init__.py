"""Selective inference after active data collection on a finite candidate set."""

from .adc import GpUcb, GpUcbConfig, ToyConfig, Tpe, TpeConfig, initial_design, make_algorithm, run_adc
from .candidates import CandidateSet, enumerate_windows, make_grid
from .distributions import (
    SelectiveResult,
    naive_inference,
    selective_ci,
    selective_p,
    tn_cdf,
)
from .geometry import compute_line, solve_constraints, truncation_set
from .harness import ExperimentConfig, aggregate, run_config, run_replicate
from .intervals import Interval, IntervalSet
from .pipeline import analyze, observe

__all__ = [
    "CandidateSet",
    "ExperimentConfig",
    "GpUcb",
    "GpUcbConfig",
    "Interval",
    "IntervalSet",
    "SelectiveResult",
    "ToyConfig",
    "Tpe",
    "TpeConfig",
    "aggregate",
    "analyze",
    "compute_line",
    "enumerate_windows",
    "initial_design",
    "make_algorithm",
    "make_grid",
    "naive_inference",
    "observe",
    "run_adc",
    "run_config",
    "run_replicate",
    "selective_ci",
    "selective_p",
    "solve_constraints",
    "tn_cdf",
    "truncation_set",
]
