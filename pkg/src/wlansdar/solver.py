"""Stationary solve of the reduced chain and the outer iteration over q(n)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .chain import (
    PMF_PAD,
    BlockSet,
    QVector,
    ReducedTPM,
    arrival_pmfs,
    assemble_tpm,
    block_matrices,
    slot_type_probs,
)
from .errors import NoConvergence, SingularSystem
from .params import Scenario
from .saturation import AttemptProfile

log = logging.getLogger(__name__)

STATIONARY_TOL = 1e-10
Q_TOL = 1e-9
MAX_OUTER = 500


@dataclass(frozen=True)
class StationaryDist:
    """pi over states (j, k), stored as a (K+1, M) array: ``pi[j, k]``."""

    pi: np.ndarray
    residual: float

    @property
    def k(self) -> int:
        return self.pi.shape[0] - 1

    @property
    def m(self) -> int:
        return self.pi.shape[1]

    def flat(self) -> np.ndarray:
        return self.pi.reshape(-1)


def _single_closed_class(p: np.ndarray) -> bool:
    graph = csr_matrix(p > 0)
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    if ncomp == 1:
        return True
    # a component is closed when no edge leaves it
    rows, cols = graph.nonzero()
    leaving = np.zeros(ncomp, dtype=bool)
    leaving[labels[rows][labels[rows] != labels[cols]]] = True
    return int((~leaving).sum()) == 1


def _power(p: np.ndarray, tol: float, max_iter: int = 200_000) -> np.ndarray:
    x = np.full(p.shape[0], 1.0 / p.shape[0])
    # lazy chain so periodic chains still converge
    lazy = 0.5 * (p + np.eye(p.shape[0]))
    for _ in range(max_iter):
        nxt = x @ lazy
        if np.max(np.abs(nxt - x)) < tol * 1e-2:
            return nxt / nxt.sum()
        x = nxt
    return x / x.sum()


def gth(p: np.ndarray):
    """Grassmann-Taksar-Heyman elimination.

    Subtraction-free, so even states with probability 1e-30 come out with
    full relative accuracy; the q(n) ratios depend on exactly those.
    Returns None when a pivot vanishes (chain not irreducible).
    """
    a = np.array(p, dtype=float)
    n = a.shape[0]
    for k in range(n - 1, 0, -1):
        s = a[k, :k].sum()
        if not s > 0:
            return None
        a[:k, k] /= s
        a[:k, :k] += np.outer(a[:k, k], a[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ a[:k, k]
    return pi / pi.sum()


def _direct(p: np.ndarray):
    n = p.shape[0]
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        return None
    pi = np.where((pi < 0) & (pi > -1e-13), 0.0, pi)
    return pi / pi.sum()


def stationary_vector(p: np.ndarray, tol: float = STATIONARY_TOL) -> tuple:
    """Unique stationary row vector of a stochastic matrix.

    GTH elimination first; a direct solve of (P^T - I) pi = 0 with one
    equation swapped for sum(pi) = 1 next; power iteration last.

    Returns
    -------
    (pi, residual) with residual = max |pi P - pi|.
    """
    if not _single_closed_class(p):
        raise SingularSystem("chain has more than one closed class")
    for method in (gth, _direct, lambda m: _power(m, tol)):
        pi = method(p)
        if pi is None or not np.all(np.isfinite(pi)) or pi.min() < 0:
            continue
        res = float(np.max(np.abs(pi @ p - pi)))
        if res <= tol:
            return pi, res
        log.info("stationary solve via %s inaccurate (%.3g)", getattr(method, "__name__", "power"), res)
    raise SingularSystem(f"no stationary solve reached residual {tol:.1g}")


def stationary_distribution(tpm: ReducedTPM, tol: float = STATIONARY_TOL) -> StationaryDist:
    pi, res = stationary_vector(tpm.p, tol)
    return StationaryDist(pi.reshape(tpm.k + 1, tpm.m), res)


def update_q(dist: StationaryDist) -> QVector:
    """q(n) = pi(1, n-1) / sum_{j=1..K} pi(j, n-1), n = 1..M.

    A column with no busy-tagged mass gives no information; q = 1 is
    used there (the value does not affect the chain because those states
    are never visited).
    """
    busy = dist.pi[1:].sum(axis=0)
    one = dist.pi[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        q = np.where(busy > 0, one / busy, 1.0)
    return QVector(np.clip(q, 0.0, 1.0))


@dataclass
class IterationReport:
    converged: bool = False
    iterations: int = 0
    q_deltas: list = field(default_factory=list)
    stationary_residuals: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "q_deltas": list(self.q_deltas),
            "stationary_residuals": list(self.stationary_residuals),
        }


@dataclass(frozen=True)
class ModelInputs:
    """Everything the iteration needs that does not depend on q."""

    scenario: Scenario
    profile: AttemptProfile
    blocks: BlockSet
    pmfs: object
    stp: object


def model_inputs(s: Scenario, profile: AttemptProfile) -> ModelInputs:
    if s.buffer is None:
        raise ValueError("the analytical model needs a finite buffer")
    lam = s.lambdas[0]
    K = s.buffer
    pmfs = arrival_pmfs(lam, s.slots(), K + PMF_PAD)
    stp = slot_type_probs(profile, s.m)
    blocks = block_matrices(s.m, pmfs, stp)
    return ModelInputs(s, profile, blocks, pmfs, stp)


def solve_sdar_model(
    s: Scenario,
    profile: AttemptProfile,
    tol: float = Q_TOL,
    max_iter: int = MAX_OUTER,
    relaxation: float = 1.0,
    q0: float = 0.5,
    inputs: ModelInputs | None = None,
) -> tuple:
    """Iterate q -> P(q) -> pi -> q until max |delta q| < tol.

    ``relaxation`` (0, 1] damps the update: q <- q + w (q_new - q).

    Returns
    -------
    (StationaryDist, QVector, IterationReport)

    Raises
    ------
    NoConvergence
        after ``max_iter`` rounds; ``exc.report`` holds the history and
        ``exc.partial`` the last (dist, q).
    """
    if not 0 < relaxation <= 1:
        raise ValueError("relaxation must lie in (0, 1]")
    if inputs is None:
        inputs = model_inputs(s, profile)
    K = s.buffer
    q = QVector.constant(s.m, q0)
    report = IterationReport()
    dist = None
    for it in range(1, max_iter + 1):
        dist = stationary_distribution(assemble_tpm(inputs.blocks, q, K))
        q_new = update_q(dist)
        delta = float(np.max(np.abs(q_new.q - q.q)))
        report.iterations = it
        report.q_deltas.append(delta)
        report.stationary_residuals.append(dist.residual)
        q = QVector(q.q + relaxation * (q_new.q - q.q))
        if delta < tol:
            report.converged = True
            # one last solve so pi matches the q that is returned
            dist = stationary_distribution(assemble_tpm(inputs.blocks, q, K))
            return dist, q, report
    exc = NoConvergence(f"q iteration did not converge in {max_iter} rounds", report)
    exc.partial = (dist, q)
    raise exc
