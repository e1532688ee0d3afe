"""Discrete-event simulators of one 802.11 cell."""

from .dcf import DcfCell, run_dcf
from .sdar import SdarCell, run_sdar
from .stats import EmpiricalReport, SimStats, empirical_report

ENGINES = {"sdar": run_sdar, "dcf": run_dcf}


def simulate(s, engine: str = "sdar", seed: int = 0, horizon: float = 100.0, **kw) -> SimStats:
    try:
        runner = ENGINES[engine]
    except KeyError:
        raise ValueError(f"unknown engine {engine!r}; choose from {sorted(ENGINES)}") from None
    return runner(s, seed=seed, horizon=horizon, **kw)


__all__ = [
    "DcfCell", "SdarCell", "SimStats", "EmpiricalReport",
    "empirical_report", "run_dcf", "run_sdar", "simulate", "ENGINES",
]
