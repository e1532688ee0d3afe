"""Saturation analysis: state-dependent attempt probabilities.

For every population size n the saturated n-node cell is solved for its
per-slot attempt probability beta_n and conditional collision probability
gamma_n, from the coupled pair

    beta = G(gamma),   gamma = 1 - (1 - beta)**(n - 1).

The results feed both the analytical chain and the SDAR simulator.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NoConvergence
from .params import MacParams, Scenario, SlotDurations

GAMMA_TOL = 1e-12
_GAMMA_HI = 1.0 - 1e-9


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


def attempt_prob(gamma: float, mac: MacParams) -> float:
    """Attempt probability per slot of a saturated node that sees collision
    probability ``gamma``.

    ``mac.retry_model == "infinite"`` gives the closed form

        2(1-2g) / [(1-2g)(W+1) + g W (1-(2g)^m)]

    with W = cw_min + 1 and m doubling stages. It is evaluated in the
    factored form 2 / [(W+1) + g W sum_{k<m} (2g)^k], which is the same
    rational function with the g = 1/2 singularity cancelled, so no branch
    is needed. The ``"finite"`` model uses retry_limit R:

        sum_{k<=R} g^k / sum_{k<=R} g^k (b_k + 1),   b_k = CW_k / 2.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma={gamma} outside [0, 1]")
    if mac.retry_model == "infinite":
        w = mac.cw_min + 1
        m = mac.max_stage
        r = 2.0 * gamma * (mac.backoff_multiplier / 2.0)
        geom = sum(r**k for k in range(m))
        return 2.0 / ((w + 1) + gamma * w * geom)
    num = 0.0
    den = 0.0
    gk = 1.0
    for k in range(mac.retry_limit + 1):
        num += gk
        den += gk * (mac.window(k) / 2.0 + 1.0)
        gk *= gamma
    return num / den


def collision_map(beta: float, n: int) -> float:
    """gamma = 1 - (1 - beta)^(n-1): what one node sees among n saturated."""
    return 1.0 - (1.0 - beta) ** (n - 1)


def solve_fixed_point(n: int, mac: MacParams, max_iter: int = 200) -> tuple:
    """Solve gamma = 1 - (1 - G(gamma))^(n-1) by bisection.

    The map gamma -> Gamma(G(gamma)) is non-increasing, so
    h(gamma) = gamma - Gamma(G(gamma)) has exactly one root in [0, 1).

    Returns
    -------
    (beta_n, gamma_n)
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return attempt_prob(0.0, mac), 0.0

    def h(g):
        return g - collision_map(attempt_prob(g, mac), n)

    lo, hi = 0.0, _GAMMA_HI
    if h(hi) < 0:
        raise NoConvergence(f"no fixed point below gamma={hi} for n={n}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):  # adjacent floats
            break
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
    else:
        raise NoConvergence(f"bisection did not converge for n={n}")
    # pick the endpoint with the smaller residual
    gamma = lo if abs(h(lo)) <= abs(h(hi)) else hi
    if abs(h(gamma)) >= GAMMA_TOL:
        raise NoConvergence(f"residual {abs(h(gamma)):.3g} for n={n}")
    return attempt_prob(gamma, mac), gamma


@dataclass(frozen=True)
class AttemptProfile:
    """beta_n and gamma_n indexed directly by n; index 0 holds (0, 0)."""

    betas: np.ndarray
    gammas: np.ndarray

    @property
    def m(self) -> int:
        return len(self.betas) - 1

    def beta(self, n: int) -> float:
        return float(self.betas[n])

    def __hash__(self):
        return hash((self.betas.tobytes(), self.gammas.tobytes()))

    def __eq__(self, other):
        return (
            isinstance(other, AttemptProfile)
            and np.array_equal(self.betas, other.betas)
            and np.array_equal(self.gammas, other.gammas)
        )

    @classmethod
    def from_betas(cls, betas) -> "AttemptProfile":
        """Profile from explicit beta_1..beta_M (gammas implied by Gamma)."""
        b = np.concatenate([[0.0], np.asarray(betas, dtype=float)])
        g = np.array([0.0] + [collision_map(b[n], n) for n in range(1, len(b))])
        return cls(_frozen(b), _frozen(g))


@functools.lru_cache(maxsize=64)
def attempt_profile(m: int, mac: MacParams) -> AttemptProfile:
    """beta_n, gamma_n for n = 1..m, computed once per (m, mac)."""
    betas = [0.0]
    gammas = [0.0]
    for n in range(1, m + 1):
        b, g = solve_fixed_point(n, mac)
        betas.append(b)
        gammas.append(g)
    return AttemptProfile(_frozen(betas), _frozen(gammas))


@dataclass(frozen=True)
class SaturationCurve:
    """Saturated-cell throughput per population size, indexed by n (n=0 is the empty cell)."""

    theta_sat: np.ndarray
    l_sat: np.ndarray
    p_succ_sat: np.ndarray

    @property
    def m(self) -> int:
        return len(self.theta_sat) - 1


def saturation_curve(profile: AttemptProfile, slots: SlotDurations, m: int) -> SaturationCurve:
    n = np.arange(m + 1)
    b = np.asarray(profile.betas[: m + 1])
    p_idle = (1.0 - b) ** n
    p_succ = n * b * (1.0 - b) ** np.maximum(n - 1, 0)
    p_coll = 1.0 - p_idle - p_succ
    l_sat = slots.sigma + p_coll * slots.t_c + p_succ * slots.t_s
    return SaturationCurve(_frozen(p_succ / l_sat), _frozen(l_sat), _frozen(p_succ))


class Stability(NamedTuple):
    stable_sufficient: bool
    margin: float
    argmin_n: int


def stability_check(s: Scenario, curve: SaturationCurve) -> Stability:
    """Sufficient positive-recurrence condition: every rate positive and
    sum(lambda) < min_{1<=n<=M} Theta_sat,n (strict)."""
    theta = np.asarray(curve.theta_sat[1 : s.m + 1])
    k = int(np.argmin(theta))
    margin = float(theta[k]) - s.total_rate
    ok = margin > 0 and all(lam > 0 for lam in s.lambdas)
    return Stability(bool(ok), margin, k + 1)
