"""PHY/MAC parameter sets, scenarios and channel-slot durations.

Durations are held internally as integer nanoseconds so that the
simulators order events exactly; the float-second attributes are
derived from them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

from .errors import NegativeRate, NonPositiveNodes, ScenarioError, ZeroBuffer

NS_PER_S = 1_000_000_000


def to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


class AccessMode(str, enum.Enum):
    BASIC = "basic"
    RTS_CTS = "rts_cts"


@dataclass(frozen=True)
class PhyParams:
    """802.11b DSSS, long preamble by default."""

    sigma: float = 20e-6
    sifs: float = 10e-6
    difs: float = 50e-6
    plcp_overhead: float = 192e-6
    mac_header_bits: int = 28 * 8
    ack_bits: int = 14 * 8
    rts_bits: int = 20 * 8
    cts_bits: int = 14 * 8
    basic_rate: float = 2e6
    data_rate: float = 11e6

    def __post_init__(self):
        for name in ("sigma", "sifs", "difs", "plcp_overhead"):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name} must be positive")
        if not self.difs > self.sifs:
            raise ScenarioError("difs must exceed sifs")
        if not (self.basic_rate > 0 and self.data_rate > 0):
            raise ScenarioError("rates must be positive")
        for name in ("mac_header_bits", "ack_bits", "rts_bits", "cts_bits"):
            if getattr(self, name) < 0:
                raise ScenarioError(f"{name} must be non-negative")


@dataclass(frozen=True)
class MacParams:
    """Backoff parameters shared by every node.

    ``retry_model`` selects the attempt-rate map used by the saturation
    analysis: ``"finite"`` honours ``retry_limit``, ``"infinite"`` is the
    classic closed form with unbounded retries.
    """

    cw_min: int = 31
    cw_max: int = 1023
    retry_limit: int = 6
    backoff_multiplier: float = 2.0
    retry_model: str = "finite"

    def __post_init__(self):
        if not self.cw_max >= self.cw_min >= 1:
            raise ScenarioError("need cw_max >= cw_min >= 1")
        if self.retry_limit < 0:
            raise ScenarioError("retry_limit must be >= 0")
        if self.backoff_multiplier < 1:
            raise ScenarioError("backoff_multiplier must be >= 1")
        if self.retry_model not in ("finite", "infinite"):
            raise ScenarioError(f"unknown retry_model {self.retry_model!r}")

    def window(self, stage: int) -> int:
        """Contention window CW (largest backoff value) at a backoff stage."""
        w = (self.cw_min + 1) * self.backoff_multiplier**stage
        return int(min(w, self.cw_max + 1)) - 1

    @property
    def max_stage(self) -> int:
        """First backoff stage whose window has reached cw_max."""
        stage = 0
        while self.backoff_multiplier > 1 and self.window(stage) < self.cw_max:
            stage += 1
        return stage


@dataclass(frozen=True)
class Scenario:
    """One single-cell experiment.

    ``buffer`` is the per-node buffer size K in packets (including the
    packet in service); ``None`` means infinite.
    """

    lambdas: tuple
    buffer: Optional[int] = 5
    payload_bits: int = 1000 * 8
    access_mode: AccessMode = AccessMode.BASIC
    phy: PhyParams = field(default_factory=PhyParams)
    mac: MacParams = field(default_factory=MacParams)

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        object.__setattr__(self, "access_mode", AccessMode(self.access_mode))

    @property
    def m(self) -> int:
        return len(self.lambdas)

    @property
    def equal_rates(self) -> bool:
        return len(set(self.lambdas)) <= 1

    @property
    def total_rate(self) -> float:
        return sum(self.lambdas)

    @classmethod
    def homogeneous(cls, m: int, lam: float, **kwargs) -> "Scenario":
        return cls(lambdas=(float(lam),) * m, **kwargs)

    def with_rate(self, lam: float) -> "Scenario":
        return replace(self, lambdas=(float(lam),) * self.m)

    def slots(self) -> "SlotDurations":
        return compute_slot_durations(self.phy, self.payload_bits, mode=self.access_mode)


@dataclass(frozen=True)
class SlotDurations:
    """Channel-slot anatomy; canonical values in integer nanoseconds."""

    sigma_ns: int
    t_s_ns: int
    t_c_ns: int

    @property
    def t_s(self) -> float:
        return self.t_s_ns / NS_PER_S

    @property
    def t_c(self) -> float:
        return self.t_c_ns / NS_PER_S

    @property
    def sigma(self) -> float:
        return self.sigma_ns / NS_PER_S

    @property
    def l_idle(self) -> float:
        return self.sigma

    @property
    def l_succ(self) -> float:
        return (self.t_s_ns + self.sigma_ns) / NS_PER_S

    @property
    def l_coll(self) -> float:
        return (self.t_c_ns + self.sigma_ns) / NS_PER_S


def _airtime_ns(phy: PhyParams, bits: int, rate: float) -> int:
    return to_ns(phy.plcp_overhead + bits / rate)


def compute_slot_durations(
    phy: PhyParams,
    payload_bits: int,
    mac_header_bits: Optional[int] = None,
    mode: AccessMode = AccessMode.BASIC,
) -> SlotDurations:
    """Success and collision airtimes for the given frame anatomy.

    Basic access: T_s = DATA + SIFS + ACK + DIFS, T_c = DATA + DIFS.
    RTS/CTS: T_s = RTS + SIFS + CTS + SIFS + DATA + SIFS + ACK + DIFS,
    T_c = RTS + DIFS. Control frames go at the basic rate, DATA at the
    data rate; each frame carries the PLCP overhead.
    """
    if mac_header_bits is None:
        mac_header_bits = phy.mac_header_bits
    mode = AccessMode(mode)
    sifs, difs = to_ns(phy.sifs), to_ns(phy.difs)
    t_data = _airtime_ns(phy, mac_header_bits + payload_bits, phy.data_rate)
    t_ack = _airtime_ns(phy, phy.ack_bits, phy.basic_rate)
    if mode is AccessMode.BASIC:
        t_s = t_data + sifs + t_ack + difs
        t_c = t_data + difs
    else:
        t_rts = _airtime_ns(phy, phy.rts_bits, phy.basic_rate)
        t_cts = _airtime_ns(phy, phy.cts_bits, phy.basic_rate)
        t_s = t_rts + sifs + t_cts + sifs + t_data + sifs + t_ack + difs
        t_c = t_rts + difs
    return SlotDurations(sigma_ns=to_ns(phy.sigma), t_s_ns=t_s, t_c_ns=t_c)


class CheckedScenario(NamedTuple):
    scenario: Scenario
    diagnostics: tuple


UNEQUAL_RATES = "unequal rates: simulation only"


def validate_scenario(s: Scenario, analytical: bool = False) -> CheckedScenario:
    """Check scenario invariants.

    Hard violations raise; soft ones (e.g. unequal rates when the
    analytical path is requested) come back as diagnostics.
    """
    if s.m < 1:
        raise NonPositiveNodes("scenario needs at least one node")
    if any(not (lam >= 0 and math.isfinite(lam)) for lam in s.lambdas):
        raise NegativeRate("arrival rates must be finite and >= 0")
    if s.buffer is not None and s.buffer < 1:
        raise ZeroBuffer("buffer size must be >= 1 (or None for infinite)")
    if s.payload_bits <= 0:
        raise ScenarioError("payload_bits must be positive")
    diags = []
    if analytical:
        if not s.equal_rates:
            diags.append(UNEQUAL_RATES)
        if s.buffer is None:
            diags.append("infinite buffer: simulation only")
    return CheckedScenario(s, tuple(diags))

