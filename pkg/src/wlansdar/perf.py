"""Performance measures from the stationary reduced chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import ArrivalPmfs, SlotTypeProbs
from .errors import InconsistentThroughput, NoAttempts, NoDepartures, ScenarioError
from .params import Scenario, SlotDurations, validate_scenario
from .saturation import AttemptProfile, attempt_profile, saturation_curve, stability_check
from .solver import StationaryDist, model_inputs, solve_sdar_model

CSV_COLUMNS = ("m", "k", "lambda", "gamma", "theta_node", "w_bar", "q_bar", "block_prob")
THROUGHPUT_SLACK = 1e-9


def occupancy_distribution(dist: StationaryDist) -> np.ndarray:
    """p(n), n = 0..M: total number of non-empty queues (tagged included)."""
    pi = dist.pi
    m = dist.m
    p = np.zeros(m + 1)
    p[:m] += pi[0]
    p[1:] += pi[1:].sum(axis=0)
    return p


def collision_probability(p_n: np.ndarray, profile: AttemptProfile) -> float:
    """Attempt-weighted collision probability sum p(n) n b (1-(1-b)^(n-1)) / sum p(n) n b."""
    n = np.arange(len(p_n))
    b = np.asarray(profile.betas[: len(p_n)])
    att = p_n * n * b
    den = att.sum()
    if den <= 0:
        raise NoAttempts("no transmission attempts under this occupancy")
    return float((att * (1.0 - (1.0 - b) ** np.maximum(n - 1, 0))).sum() / den)


def throughput(p_n: np.ndarray, stp: SlotTypeProbs, slots: SlotDurations) -> float:
    """Aggregate throughput (packets/s): mean successes per slot over mean slot length."""
    m1 = len(p_n)
    ps, pc = stp.p_succ[:m1], stp.p_coll[:m1]
    length = slots.sigma + pc * slots.t_c + ps * slots.t_s
    return float((p_n * ps).sum() / (p_n * length).sum())


def departure_distribution(dist: StationaryDist, stp: SlotTypeProbs, pmfs: ArrivalPmfs) -> np.ndarray:
    """Queue length left behind by a tagged departure, j = 0..K-1.

    The last entry takes the complement, as in an M/G/1/K queue.
    """
    K, m = dist.k, dist.m
    n = np.arange(m)
    rate = stp.p_succ[1 : m + 1] / (n + 1)
    w = dist.pi[1:] @ rate  # w[i-1]: departure weight from tagged level i
    total = w.sum()
    if total <= 0:
        raise NoDepartures("tagged node never departs")
    pd = np.zeros(K)
    for j in range(K - 1):
        i = np.arange(1, min(j + 1, K) + 1)
        pd[j] = (w[i - 1] * pmfs.s[j - i + 1]).sum() / total
    pd[K - 1] = max(1.0 - pd[: K - 1].sum(), 0.0)
    return pd


def delay(pd: np.ndarray, theta_node: float, lam: float) -> tuple:
    """Time-average queue distribution, mean queue and mean delay.

    Returns
    -------
    (alpha, q_bar, w_bar) with alpha[j], j = 0..K, and alpha[K] the
    blocking probability.
    """
    if lam <= 0 or theta_node <= 0:
        raise NoDepartures("delay needs positive arrival rate and throughput")
    if theta_node > lam * (1 + THROUGHPUT_SLACK):
        raise InconsistentThroughput(f"throughput {theta_node:.6g} exceeds offered load {lam:.6g}")
    block = max(1.0 - theta_node / lam, 0.0)
    alpha = np.append(pd * (1.0 - block), block)
    q_bar = float(np.arange(len(alpha)) @ alpha)
    return alpha, q_bar, q_bar / theta_node


@dataclass
class PerfReport:
    m: int
    k: int
    lam: float
    gamma: float
    theta_total: float
    theta_node: float
    q_bar: float
    w_bar: float
    block_prob: float
    p_n: list
    q: list
    departure_dist: list
    alpha: list
    iterations: int
    converged: bool
    stable_sufficient: bool
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def csv_row(self) -> list:
        return [self.m, self.k, self.lam, self.gamma, self.theta_node, self.w_bar, self.q_bar, self.block_prob]


def fmt(x) -> str:
    """Stable text form for CSV cells."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return "nan" if math.isnan(x) else repr(round(x, 12))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def analyze(s: Scenario, relaxation: float = 1.0) -> PerfReport:
    """Solve the coupled model for an equal-rate, finite-buffer scenario."""
    _, diags = validate_scenario(s, analytical=True)
    if diags:
        raise ScenarioError("; ".join(diags))
    lam = s.lambdas[0]
    profile = attempt_profile(s.m, s.mac)
    slots = s.slots()
    inputs = model_inputs(s, profile)
    dist, q, rep = solve_sdar_model(s, profile, relaxation=relaxation, inputs=inputs)
    p_n = occupancy_distribution(dist)
    gamma = collision_probability(p_n, profile)
    theta = throughput(p_n, inputs.stp, slots)
    pd = departure_distribution(dist, inputs.stp, inputs.pmfs)
    alpha, q_bar, w_bar = delay(pd, theta / s.m, lam)
    stab = stability_check(s, saturation_curve(profile, slots, s.m))
    return PerfReport(
        m=s.m, k=s.buffer, lam=lam,
        gamma=gamma, theta_total=theta, theta_node=theta / s.m,
        q_bar=q_bar, w_bar=w_bar, block_prob=float(alpha[-1]),
        p_n=p_n.tolist(), q=q.q.tolist(), departure_dist=pd.tolist(), alpha=alpha.tolist(),
        iterations=rep.iterations, converged=rep.converged,
        stable_sufficient=stab.stable_sufficient,
    )
