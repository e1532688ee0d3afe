"""Brute-force joint chain over all queue-length vectors.

For tiny cells the exact slot-embedded chain on (Q_1, ..., Q_M) is small
enough to write down and solve. It uses the same slot dynamics as the
reduced chain and the SDAR simulator:

* the slot type depends on the number n of non-empty queues,
* on success one non-empty queue, uniformly chosen, loses its head packet,
* every queue then gains its Poisson arrivals for that slot type and
  is clipped: Q' = min(K, Q - D + A).

Comparing it with the reduced chain isolates the error of replacing the
joint state by (tagged length, busy count) plus q(n).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .chain import ArrivalPmfs, QVector, SlotTypeProbs, arrival_pmfs, slot_type_probs
from .errors import StateSpaceTooLarge
from .params import Scenario
from .perf import collision_probability, delay, departure_distribution, occupancy_distribution, throughput
from .saturation import AttemptProfile, attempt_profile
from .solver import StationaryDist, solve_sdar_model, stationary_vector

# the joint matrix is dense (one slot can refill any queue), so memory is
# the binding constraint well before the 10^6 states the state map allows
MAX_STATES = 5000
MAX_ENUMERATION = 2_000_000


@dataclass(frozen=True)
class JointChain:
    p: np.ndarray
    m: int
    k: int

    @property
    def shape(self) -> tuple:
        return (self.k + 1,) * self.m

    def states(self) -> np.ndarray:
        """(S, M) array of queue vectors in row order."""
        return np.array(list(itertools.product(range(self.k + 1), repeat=self.m)), dtype=int).reshape(-1, self.m)


def _level_vector(pmf: np.ndarray, tail: np.ndarray, start: int, K: int) -> np.ndarray:
    """Distribution of min(K, start + A) for one queue."""
    v = np.zeros(K + 1)
    v[start:K] = pmf[: K - start]
    v[K] = tail[K - start]
    return v


def _kind_vectors(pmfs: ArrivalPmfs, K: int) -> dict:
    return {
        "d": (pmfs.d, pmfs.d_tail),
        "s": (pmfs.s, pmfs.s_tail),
        "c": (pmfs.c, pmfs.c_tail),
    }


def _row_by_products(state, K, stp, kinds) -> np.ndarray:
    """One row as a mixture of Kronecker products of per-queue laws."""
    n = int(np.count_nonzero(state))

    def product(kind, starts):
        pmf, tail = kinds[kind]
        return reduce(np.multiply.outer, [_level_vector(pmf, tail, q, K) for q in starts]).reshape(-1)

    row = stp.p_idle[n] * product("d", state)
    if n >= 2:
        row = row + stp.p_coll[n] * product("c", state)
    if n >= 1:
        for l in np.flatnonzero(state):
            after = list(state)
            after[l] -= 1
            row = row + stp.p_succ[n] / n * product("s", after)
    return row


def _row_by_enumeration(state, K, stp, kinds, index) -> np.ndarray:
    """One row by walking every (slot outcome, arrival vector) leaf."""
    m = len(state)
    n = int(np.count_nonzero(state))
    row = np.zeros((K + 1) ** m)
    outcomes = [("d", stp.p_idle[n], None)]
    if n >= 2:
        outcomes.append(("c", stp.p_coll[n], None))
    for l in np.flatnonzero(state):
        outcomes.append(("s", stp.p_succ[n] / n, int(l)))
    for kind, weight, leaver in outcomes:
        if weight == 0:
            continue
        pmf, tail = kinds[kind]
        # a = K stands for "K or more arrivals"
        prob_a = np.append(pmf[:K], tail[K])
        for arr in itertools.product(range(K + 1), repeat=m):
            w = weight
            nxt = []
            for i in range(m):
                w *= prob_a[arr[i]]
                base = state[i] - (1 if i == leaver else 0)
                nxt.append(min(K, base + arr[i]))
            if w:
                row[index[tuple(nxt)]] += w
    return row


def build_joint_chain(
    m: int,
    K: int,
    lam: float,
    profile: AttemptProfile,
    slots,
    method: str = "product",
    max_states: int = MAX_STATES,
) -> JointChain:
    """Joint transition matrix; ``method`` is ``"product"`` or ``"enumerate"``."""
    size = (K + 1) ** m
    if size > max_states:
        raise StateSpaceTooLarge(f"{size} joint states exceed the limit of {max_states}")
    if method == "enumerate" and size * size * (m + 2) > MAX_ENUMERATION * 50:
        raise StateSpaceTooLarge("enumeration too large; use method='product'")
    pmfs = arrival_pmfs(lam, slots, K + 1)
    stp = slot_type_probs(profile, m)
    kinds = _kind_vectors(pmfs, K)
    states = list(itertools.product(range(K + 1), repeat=m))
    index = {s: i for i, s in enumerate(states)}
    p = np.empty((size, size))
    for i, st in enumerate(states):
        if method == "product":
            p[i] = _row_by_products(np.array(st), K, stp, kinds)
        elif method == "enumerate":
            p[i] = _row_by_enumeration(np.array(st), K, stp, kinds, index)
        else:
            raise ValueError(f"unknown method {method!r}")
    return JointChain(p, m, K)


@dataclass(frozen=True)
class JointSolution:
    nu: np.ndarray  # shaped (K+1,)*M
    p_n: np.ndarray
    q: QVector
    tagged: StationaryDist  # (tagged length, busy others) marginal
    exchangeability_gap: float


def joint_stationary(chain: JointChain) -> JointSolution:
    nu, res = stationary_vector(chain.p)
    m, K = chain.m, chain.k
    states = chain.states()
    busy = states > 0
    nbusy = busy.sum(axis=1)
    p_n = np.bincount(nbusy, weights=nu, minlength=m + 1)

    others = nbusy - busy[:, 0]
    tagged = np.zeros((K + 1, m))
    np.add.at(tagged, (states[:, 0], others), nu)

    q = np.ones(m)
    for n in range(1, m + 1):
        sel = (nbusy == n) & busy[:, 0]
        den = nu[sel].sum()
        if den > 0:
            q[n - 1] = nu[sel & (states[:, 0] == 1)].sum() / den

    marg = [np.bincount(states[:, i], weights=nu, minlength=K + 1) for i in range(m)]
    gap = max(float(np.max(np.abs(mi - marg[0]))) for mi in marg)
    return JointSolution(nu.reshape(chain.shape), p_n, QVector(q), StationaryDist(tagged, res), gap)


@dataclass(frozen=True)
class OracleComparison:
    tv: float
    gamma_rel: float
    theta_rel: float
    w_bar_rel: float
    q_gap: float
    gamma_exact: float
    gamma_reduced: float
    theta_exact: float
    theta_reduced: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _measures(dist: StationaryDist, p_n, profile, stp, pmfs, slots, lam, m):
    gamma = collision_probability(p_n, profile)
    theta = throughput(p_n, stp, slots)
    pd = departure_distribution(dist, stp, pmfs)
    _, _, w_bar = delay(pd, theta / m, lam)
    return gamma, theta, w_bar


def compare_reduced_vs_oracle(s: Scenario, method: str = "product") -> OracleComparison:
    """Distance between the reduced and exact chains for one scenario."""
    if s.buffer is None or not s.equal_rates:
        raise ValueError("oracle comparison needs equal rates and a finite buffer")
    m, K, lam = s.m, s.buffer, s.lambdas[0]
    profile = attempt_profile(m, s.mac)
    slots = s.slots()
    exact = joint_stationary(build_joint_chain(m, K, lam, profile, slots, method=method))
    reduced, q_red, _ = solve_sdar_model(s, profile)

    pmfs = arrival_pmfs(lam, slots, K + 1)
    stp = slot_type_probs(profile, m)
    p_red = occupancy_distribution(reduced)
    g_e, t_e, w_e = _measures(exact.tagged, exact.p_n, profile, stp, pmfs, slots, lam, m)
    g_r, t_r, w_r = _measures(reduced, p_red, profile, stp, pmfs, slots, lam, m)

    def rel(a, b):
        return abs(a - b) / abs(b) if b else abs(a - b)

    return OracleComparison(
        tv=0.5 * float(np.abs(reduced.pi - exact.tagged.pi).sum()),
        gamma_rel=rel(g_r, g_e),
        theta_rel=rel(t_r, t_e),
        w_bar_rel=rel(w_r, w_e),
        q_gap=float(np.max(np.abs(q_red.q - exact.q.q))),
        gamma_exact=g_e, gamma_reduced=g_r,
        theta_exact=t_e, theta_reduced=t_r,
    )
