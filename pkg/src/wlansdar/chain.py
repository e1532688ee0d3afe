"""Reduced-state chain (tagged queue length, busy non-tagged count).

Builds the ingredients of the level-structured transition matrix: Poisson
arrival pmfs per slot type, slot-type probabilities per number of
non-empty nodes, the A_j / B_j block families split into their
q-independent and q-proportional parts, and the finite-buffer matrix

    [ A_0    A_1  ...  A_{K-1}  sum_{j>=K}   A_j ]
    [ B_-1   B_0  ...  B_{K-2}  sum_{j>=K-1} B_j ]
    [  0    B_-1  ...           ...              ]
    [  0     0    ...  B_-1     sum_{j>=0}   B_j ]

with state (j, k) stored at row j*M + k.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.stats import poisson

from .errors import RowSumViolation
from .params import SlotDurations
from .saturation import AttemptProfile

PMF_PAD = 64  # extra pmf support beyond K
ROW_TOL = 1e-9
CLAMP_TOL = 1e-15


@dataclass(frozen=True)
class ArrivalPmfs:
    """Per-slot Poisson arrival pmfs for idle (d), success (s) and collision (c) slots.

    ``d[j]`` for j = 0..j_max; ``d_tail[J]`` = sum_{j >= J} d(j) for
    J = 0..j_max+1, by complement.
    """

    lam: float
    d: np.ndarray
    s: np.ndarray
    c: np.ndarray
    d_tail: np.ndarray
    s_tail: np.ndarray
    c_tail: np.ndarray

    @property
    def j_max(self) -> int:
        return len(self.d) - 1


def _tail_by_complement(pmf: np.ndarray) -> np.ndarray:
    head = np.concatenate([[0.0], np.cumsum(pmf)])
    return np.maximum(1.0 - head, 0.0)


def arrival_pmfs(lam: float, slots: SlotDurations, j_max: int) -> ArrivalPmfs:
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    j = np.arange(j_max + 1)
    pm = {}
    for key, length in (("d", slots.l_idle), ("s", slots.l_succ), ("c", slots.l_coll)):
        pm[key] = poisson.pmf(j, lam * length) if lam > 0 else (j == 0).astype(float)
    return ArrivalPmfs(
        lam=float(lam),
        d=pm["d"], s=pm["s"], c=pm["c"],
        d_tail=_tail_by_complement(pm["d"]),
        s_tail=_tail_by_complement(pm["s"]),
        c_tail=_tail_by_complement(pm["c"]),
    )


@dataclass(frozen=True)
class SlotTypeProbs:
    """Idle / success / collision probabilities for n = 0..M non-empty nodes."""

    p_idle: np.ndarray
    p_succ: np.ndarray
    p_coll: np.ndarray


def slot_type_probs(profile: AttemptProfile, m: int) -> SlotTypeProbs:
    n = np.arange(m + 1)
    b = np.asarray(profile.betas[: m + 1], dtype=float)
    p_idle = (1.0 - b) ** n
    p_succ = n * b * (1.0 - b) ** np.maximum(n - 1, 0)
    p_idle[0], p_succ[0] = 1.0, 0.0
    p_coll = 1.0 - p_idle - p_succ
    p_coll[:2] = 0.0
    return SlotTypeProbs(p_idle, p_succ, p_coll)


def _binom(a: int, b: int) -> int:
    return comb(a, b) if a >= b >= 0 else 0


def _newly_busy(m: int, x0: float, extra: int = 0) -> np.ndarray:
    """M x M matrix: among the M-n-1+extra idle non-tagged nodes exactly
    k-n+extra receive at least one arrival (per-node no-arrival prob x0).

    Entries with a zero binomial coefficient are exact zeros; powers are
    only formed where the coefficient is non-zero, so no negative exponent
    of (1 - x0) is ever evaluated.
    """
    out = np.zeros((m, m))
    for n in range(m):
        for k in range(m):
            coef = _binom(m - n - 1 + extra, k - n + extra)
            if coef:
                out[n, k] = coef * (1.0 - x0) ** (k - n + extra) * x0 ** (m - k - 1)
    return out


@dataclass(frozen=True)
class BlockSet:
    """A_j^(0), A_j^(1) (j = 0..j_max) and B_j^(0), B_j^(1) (j = -1..j_max).

    Arrays are shaped (levels, M, M). ``b0[j + 1]`` holds B_j^(0).
    ``a0_tail[J]`` = sum_{j >= J} A_j^(0) for J = 0..j_max+1 and
    ``b0_tail[J + 1]`` = sum_{j >= J} B_j^(0) for J = -1..j_max+1;
    likewise for the (1) parts.
    """

    m: int
    a0: np.ndarray
    a1: np.ndarray
    b0: np.ndarray
    b1: np.ndarray
    a0_tail: np.ndarray
    a1_tail: np.ndarray
    b0_tail: np.ndarray
    b1_tail: np.ndarray

    @property
    def j_max(self) -> int:
        return self.a0.shape[0] - 1

    def a(self, j: int, part: int = 0) -> np.ndarray:
        return (self.a0 if part == 0 else self.a1)[j]

    def b(self, j: int, part: int = 0) -> np.ndarray:
        return (self.b0 if part == 0 else self.b1)[j + 1]


def _blocks_from(dv, sv, cv, sv_next, m, stp, g_d, g_s, g_c, f_s):
    """Evaluate the four block families for vectors of pmf values.

    The blocks are linear in (d(j), s(j), c(j), s(j+1)), so passing pmf
    values gives A_j / B_j and passing tail masses gives their tail sums.
    Returns arrays shaped (len(dv), M, M).
    """
    n = np.arange(m)
    pi_n, ps_n, pc_n = stp.p_idle[:m], stp.p_succ[:m], stp.p_coll[:m]
    pi_n1, ps_n1, pc_n1 = stp.p_idle[1 : m + 1], stp.p_succ[1 : m + 1], stp.p_coll[1 : m + 1]
    col = lambda v: v[None, :, None]  # noqa: E731  (per-row n factor)
    dv, sv, cv, sv_next = (np.asarray(x, dtype=float)[:, None, None] for x in (dv, sv, cv, sv_next))

    a0 = dv * col(pi_n) * g_d + cv * col(pc_n) * g_c + sv * col(ps_n) * g_s
    a1 = sv * col(ps_n) * (f_s - g_s)
    tagged = ps_n1 / (n + 1)
    b0 = (
        dv * col(pi_n1) * g_d
        + cv * col(pc_n1) * g_c
        + sv * col(ps_n1) * g_s
        + col(tagged) * g_s * (sv_next - sv)
    )
    b1 = sv * col(n / (n + 1) * ps_n1) * (f_s - g_s)
    return a0, a1, b0, b1


def block_matrices(m: int, pmfs: ArrivalPmfs, stp: SlotTypeProbs, j_max: int | None = None) -> BlockSet:
    """Block families for j up to ``j_max`` (default: one less than the pmf
    truncation, since B_j needs s(j+1))."""
    if j_max is None:
        j_max = pmfs.j_max - 1
    if j_max + 1 > pmfs.j_max:
        raise ValueError("pmfs must extend one index beyond j_max")
    d0, s0, c0 = pmfs.d[0], pmfs.s[0], pmfs.c[0]
    g_d, g_s, g_c = _newly_busy(m, d0), _newly_busy(m, s0), _newly_busy(m, c0)
    f_s = _newly_busy(m, s0, extra=1)
    geo = (m, stp, g_d, g_s, g_c, f_s)

    d, s, c = pmfs.d, pmfs.s, pmfs.c
    j = np.arange(j_max + 1)
    a0, a1, _, _ = _blocks_from(d[j], s[j], c[j], s[j + 1], *geo)
    # B_j for j = -1..j_max; every pmf vanishes at -1
    _, _, b0, b1 = _blocks_from(
        np.concatenate([[0.0], d[j]]),
        np.concatenate([[0.0], s[j]]),
        np.concatenate([[0.0], c[j]]),
        s[: j_max + 2],
        *geo,
    )

    # tail sums over j >= J: J = 0..j_max+1 for A, J = -1..j_max+1 for B
    dt, st, ct = pmfs.d_tail, pmfs.s_tail, pmfs.c_tail
    J = np.arange(j_max + 2)
    a0t, a1t, _, _ = _blocks_from(dt[J], st[J], ct[J], st[J + 1], *geo)
    _, _, b0t, b1t = _blocks_from(
        np.concatenate([[1.0], dt[J]]),
        np.concatenate([[1.0], st[J]]),
        np.concatenate([[1.0], ct[J]]),
        st[: j_max + 3],
        *geo,
    )
    return BlockSet(m, a0, a1, b0, b1, a0t, a1t, b0t, b1t)


@dataclass(frozen=True)
class QVector:
    """q(n) for n = 1..M: P(non-empty queue holds exactly one packet | N = n)."""

    q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))

    @classmethod
    def constant(cls, m: int, value: float = 0.5) -> "QVector":
        return cls(np.full(m, value))

    def at(self, n: int) -> float:
        return float(self.q[n - 1])


@dataclass(frozen=True)
class ReducedTPM:
    p: np.ndarray
    m: int
    k: int
    raw_row_error: float

    def index(self, j: int, k: int) -> int:
        return j * self.m + k

    def state(self, row: int) -> tuple:
        return divmod(row, self.m)


def assemble_tpm(blocks: BlockSet, q: QVector, K: int) -> ReducedTPM:
    m = blocks.m
    if K < 1:
        raise ValueError("K must be >= 1")
    if blocks.j_max < K:
        raise ValueError(f"blocks cover j <= {blocks.j_max}, need {K}")
    qv = np.asarray(q.q, dtype=float)
    if qv.shape != (m,) or np.any(qv < 0) or np.any(qv > 1):
        raise ValueError("q must hold M probabilities")
    da = np.concatenate([[0.0], qv[: m - 1]])[:, None]  # diag(0, q(1..M-1))
    db = qv[:, None]  # diag(q(1..M))

    def A(j):
        return blocks.a0[j] + da * blocks.a1[j]

    def A_tail(J):
        return blocks.a0_tail[J] + da * blocks.a1_tail[J]

    def B(j):
        return blocks.b0[j + 1] + db * blocks.b1[j + 1]

    def B_tail(J):
        return blocks.b0_tail[J + 1] + db * blocks.b1_tail[J + 1]

    size = (K + 1) * m
    p = np.zeros((size, size))
    for lvl in range(K):
        p[0:m, lvl * m : (lvl + 1) * m] = A(lvl)
    p[0:m, K * m :] = A_tail(K)
    for i in range(1, K + 1):
        rows = slice(i * m, (i + 1) * m)
        for lvl in range(i - 1, K):
            p[rows, lvl * m : (lvl + 1) * m] = B(lvl - i)
        p[rows, K * m :] = B_tail(K - i)

    raw = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    if raw > ROW_TOL:
        raise RowSumViolation(f"row sums deviate from 1 by {raw:.3g}")
    neg = p < 0
    if neg.any():
        if p.min() < -CLAMP_TOL:
            raise RowSumViolation(f"negative transition probability {p.min():.3g}")
        p[neg] = 0.0
        p /= p.sum(axis=1, keepdims=True)
    return ReducedTPM(p, m, K, raw)
