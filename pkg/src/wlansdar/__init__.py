"""Coupled-queue Markov model and simulators for a single 802.11 DCF cell."""

from .params import AccessMode, MacParams, PhyParams, Scenario, compute_slot_durations
from .perf import PerfReport, analyze
from .saturation import attempt_profile, saturation_curve, solve_fixed_point
from .sim import empirical_report, simulate

__version__ = "0.1.0"

__all__ = [
    "AccessMode", "MacParams", "PhyParams", "Scenario", "compute_slot_durations",
    "PerfReport", "analyze", "attempt_profile", "saturation_curve", "solve_fixed_point",
    "empirical_report", "simulate",
]
