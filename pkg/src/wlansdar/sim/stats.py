"""Simulation tallies and the empirical performance report."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import EmptyRun


@dataclass
class SimStats:
    """Raw tallies of one run, restricted to the post-warm-up window.

    Per-node arrays have length M. ``attempt_hist[n, a]`` counts slot
    boundaries seen with n non-empty queues and a transmission attempts
    (SDAR engine only). ``departure_hist[i][j]`` counts departures of
    node i that left j packets behind.
    """

    engine: str
    m: int
    k: Optional[int]
    seed: int
    horizon: float
    warmup: float
    offered: np.ndarray
    accepted: np.ndarray
    blocked: np.ndarray
    dropped: np.ndarray
    attempts: np.ndarray
    collisions: np.ndarray
    successes: np.ndarray
    delay_sum: np.ndarray
    service_sum: np.ndarray
    queue_area: np.ndarray
    busy_time: np.ndarray
    system_empty_time: float = 0.0
    attempt_hist: Optional[np.ndarray] = None
    departure_hist: list = field(default_factory=list)
    backlog_t: list = field(default_factory=list)
    backlog_v: list = field(default_factory=list)
    state_visits: Optional[dict] = None
    events: int = 0
    wall_clock: float = 0.0

    @classmethod
    def empty(cls, engine, m, k, seed, horizon, warmup, attempt_hist=False) -> "SimStats":
        z = lambda dt=np.int64: np.zeros(m, dtype=dt)  # noqa: E731
        return cls(
            engine=engine, m=m, k=k, seed=seed, horizon=horizon, warmup=warmup,
            offered=z(), accepted=z(), blocked=z(), dropped=z(),
            attempts=z(), collisions=z(), successes=z(),
            delay_sum=z(float), service_sum=z(float), queue_area=z(float), busy_time=z(float),
            attempt_hist=np.zeros((m + 1, m + 1), dtype=np.int64) if attempt_hist else None,
            departure_hist=[np.zeros((k if k is not None else 64) + 1, dtype=np.int64) for _ in range(m)],
        )

    @property
    def window(self) -> float:
        return self.horizon - self.warmup


@dataclass
class EmpiricalReport:
    engine: str
    gamma: float
    gamma_node: list
    theta_node: list
    theta_mean: float
    w_bar: float
    w_bar_node: list
    service_node: list
    q_bar_node: list
    block_prob_node: list
    system_empty_frac: float
    slot_probs: Optional[dict] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _ratio(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1.0), np.nan)


def slot_frequencies(hist: np.ndarray) -> dict:
    """Empirical P(idle), P(success), P(collision) per n, with the boundary counts."""
    out = {}
    for n in range(1, hist.shape[0]):
        tot = int(hist[n].sum())
        if tot:
            out[n] = {
                "boundaries": tot,
                "idle": hist[n, 0] / tot,
                "success": hist[n, 1] / tot,
                "collision": hist[n, 2:].sum() / tot,
            }
    return out


def empirical_report(st: SimStats) -> EmpiricalReport:
    if st.successes.sum() == 0:
        raise EmptyRun("no departures after warm-up")
    T = st.window
    gamma_node = _ratio(st.collisions, st.attempts)
    return EmpiricalReport(
        engine=st.engine,
        gamma=float(st.collisions.sum() / max(st.attempts.sum(), 1)),
        gamma_node=gamma_node.tolist(),
        theta_node=(st.successes / T).tolist(),
        theta_mean=float(st.successes.sum() / T / st.m),
        w_bar=float(st.delay_sum.sum() / st.successes.sum()),
        w_bar_node=_ratio(st.delay_sum, st.successes).tolist(),
        service_node=_ratio(st.service_sum, st.successes).tolist(),
        q_bar_node=(st.queue_area / T).tolist(),
        block_prob_node=_ratio(st.blocked, st.offered).tolist(),
        system_empty_frac=float(st.system_empty_time / T),
        slot_probs=slot_frequencies(st.attempt_hist) if st.attempt_hist is not None else None,
    )
